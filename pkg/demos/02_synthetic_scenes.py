"""Generate a handful of synthetic sonar frames and save them as PGMs.

Each frame gets speckle background inside the fan, dark outside, and a
bright elliptical object with an acoustic shadow. Boxes are printed per
frame so you can eyeball the annotations against the images.
"""

from pathlib import Path

from sonarprop.pgm import write_pgm
from sonarprop.synth import SceneConfig, generate_frame

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

cfg = SceneConfig(count_min=1, count_max=1, seed=42)
print(cfg.to_json())

for i in range(4):
    frame = generate_frame(cfg, i)
    write_pgm(OUT / f"scene_{frame.frame_id}.pgm", frame.image)
    annotated = frame.image.copy()
    for box in frame.boxes:
        annotated[box.y:box.y + box.h, box.x] = 255
        annotated[box.y:box.y + box.h, box.x + box.w - 1] = 255
        annotated[box.y, box.x:box.x + box.w] = 255
        annotated[box.y + box.h - 1, box.x:box.x + box.w] = 255
    write_pgm(OUT / f"scene_{frame.frame_id}_boxes.pgm", annotated)
    boxes = ", ".join(f"({b.x},{b.y},{b.w},{b.h})" for b in frame.boxes)
    print(f"{frame.frame_id}: {len(frame.boxes)} object(s) {boxes}")

print(f"wrote 8 images to {OUT}")
