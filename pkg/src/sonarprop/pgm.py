"""Binary PGM (P5) reader/writer for single-channel sonar frames.

Supports maxval 255 (uint8) and 65535 (uint16, big-endian payload per the
format). Header comments (# ...) are tolerated on read.
"""

from pathlib import Path

import numpy as np

from .errors import DataError


def write_pgm(path, image: np.ndarray) -> None:
    """Write a 2-D uint8 or uint16 array as binary PGM."""
    if image.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {image.shape}")
    if image.dtype == np.uint8:
        maxval = 255
        payload = image.tobytes()
    elif image.dtype == np.uint16:
        maxval = 65535
        payload = image.astype(">u2").tobytes()
    else:
        raise ValueError(f"image dtype must be uint8 or uint16, got {image.dtype}")
    h, w = image.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + payload)


def _read_header_tokens(data: bytes, count: int):
    """Pull `count` whitespace-separated tokens, skipping comment lines."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise DataError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # payload starts after single whitespace byte


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM into a uint8 (maxval 255) or uint16 (65535) array."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read PGM {path}: {e}") from e
    if data[:2] != b"P5":
        raise DataError(f"{path}: not a binary PGM (bad magic {data[:2]!r})")
    try:
        tokens, offset = _read_header_tokens(data[2:], 3)
    except DataError as e:
        raise DataError(f"{path}: {e}") from e
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as e:
        raise DataError(f"{path}: malformed PGM header") from e
    if w <= 0 or h <= 0:
        raise DataError(f"{path}: invalid PGM dimensions {w}x{h}")
    if maxval not in (255, 65535):
        # other maxvals are legal PGM but would normalize wrong downstream
        raise DataError(f"{path}: unsupported PGM maxval {maxval}, expected 255 or 65535")
    payload = data[2 + offset :]
    if maxval <= 255:
        expected = w * h
        if len(payload) < expected:
            raise DataError(f"{path}: PGM payload truncated ({len(payload)} < {expected})")
        img = np.frombuffer(payload[:expected], dtype=np.uint8).reshape(h, w)
    else:
        expected = w * h * 2
        if len(payload) < expected:
            raise DataError(f"{path}: PGM payload truncated ({len(payload)} < {expected})")
        img = np.frombuffer(payload[:expected], dtype=">u2").astype(np.uint16).reshape(h, w)
    return img.copy()
