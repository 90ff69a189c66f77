"""Deterministic random streams, including per-frame substreams.

Reproducibility contract: every stochastic operation takes either an explicit
seed or a Generator derived from one, and per-frame work uses an independent
stream keyed on (master seed, frame id) so serial and parallel runs agree.
Python's built-in hash() is salted per process, so string ids are folded into
the seed material with SHA-256 instead.
"""

import hashlib

import numpy as np


def _to_entropy(component) -> int:
    if isinstance(component, (int, np.integer)):
        if component < 0:
            raise ValueError(f"seed components must be non-negative, got {component}")
        return int(component)
    if isinstance(component, str):
        digest = hashlib.sha256(component.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"seed component must be int or str, got {type(component).__name__}")


def derive_rng(*components) -> np.random.Generator:
    """A Generator seeded from a sequence of ints and/or strings.

    Identical components always give an identical stream, on any platform.
    """
    if not components:
        raise ValueError("at least one seed component is required")
    entropy = [_to_entropy(c) for c in components]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def frame_rng(master_seed: int, frame_id) -> np.random.Generator:
    """The independent substream for one frame (see module docstring)."""
    return derive_rng(master_seed, frame_id if isinstance(frame_id, str) else int(frame_id))
