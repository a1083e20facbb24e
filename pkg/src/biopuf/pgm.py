"""Binary PGM (P5) reader and writer.

Supports maxval up to 65535; 16-bit samples are big-endian per the netpbm
convention.
"""

from __future__ import annotations

import numpy as np

from .exceptions import FormatError, ParameterError


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comment lines
    while pos < len(data):
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM file into a 2D uint8 or uint16 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data:
        raise FormatError(f"empty PGM file: {path}")
    magic, pos = _read_header_token(data, 0)
    if magic != b"P5":
        raise FormatError(f"not a binary PGM (P5) file: magic {magic!r}")
    fields = []
    for _ in range(3):
        tok, pos = _read_header_token(data, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise FormatError(f"non-numeric PGM header field {tok!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError("PGM dimensions must be positive")
    if not 0 < maxval < 65536:
        raise FormatError(f"PGM maxval {maxval} out of range")
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    if len(data) - pos < count * dtype.itemsize:
        raise FormatError("PGM raster shorter than header promises")
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    img = raster.reshape(height, width)
    return img.astype(np.uint16) if maxval > 255 else img.copy()


def write_pgm(path, image: np.ndarray, maxval: int | None = None) -> None:
    """Write a 2D integer array as binary PGM."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ParameterError("image must be 2D")
    if maxval is None:
        maxval = 255 if img.max(initial=0) <= 255 else 65535
    if not 0 < maxval < 65536:
        raise ParameterError(f"maxval {maxval} out of range")
    if img.min(initial=0) < 0 or img.max(initial=0) > maxval:
        raise ParameterError("image values outside [0, maxval]")
    height, width = img.shape
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n{maxval}\n".encode("ascii"))
        fh.write(img.astype(dtype).tobytes())
