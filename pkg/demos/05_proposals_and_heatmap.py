"""Score one frame, threshold into proposals, and render the heatmap.

Needs the checkpoint from 04_training_loop.py. Writes the heatmap, a
proposal overlay, and the proposals CSV to demos/output/.
"""

from pathlib import Path

from sonarprop.geometry import WindowConfig
from sonarprop.nn import load_checkpoint
from sonarprop.pgm import write_pgm
from sonarprop.proposals import (
    ProposalConfig,
    draw_proposals,
    render_heatmap,
    score_frame,
    threshold_proposals,
    write_proposals_csv,
)
from sonarprop.synth import SceneConfig, generate_frame

OUT = Path(__file__).parent / "output"
ckpt = OUT / "demo.ckpt"
if not ckpt.exists():
    raise SystemExit("run 04_training_loop.py first")

net, meta = load_checkpoint(ckpt)
frame = generate_frame(SceneConfig(count_min=1, count_max=1, seed=42), 99)
print(f"frame {frame.frame_id}: truth {[(b.x, b.y, b.w, b.h) for b in frame.boxes]}")

scored = score_frame(net, frame, WindowConfig())
print(f"scored {len(scored)} windows, max score {max(sw.score for sw in scored):.3f}")

for threshold in (0.3, 0.5, 0.8):
    cfg = ProposalConfig(threshold=threshold)
    kept = threshold_proposals(scored, cfg)
    nms_cfg = ProposalConfig(threshold=threshold, use_nms=True)
    merged = threshold_proposals(scored, nms_cfg)
    print(f"  threshold {threshold}: {len(kept)} proposals, {len(merged)} after NMS")

cfg = ProposalConfig(threshold=0.5, use_nms=True)
proposals = threshold_proposals(scored, cfg)
write_proposals_csv([(frame.frame_id, sw) for sw in proposals], OUT / "proposals.csv")
write_pgm(OUT / "overlay.pgm", draw_proposals(frame.image, proposals))
write_pgm(OUT / "heatmap.pgm", render_heatmap(scored, WindowConfig(), frame.image.shape))
print(f"wrote proposals.csv, overlay.pgm, heatmap.pgm to {OUT}")
