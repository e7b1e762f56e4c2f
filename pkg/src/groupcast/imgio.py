"""Depth-image file I/O: PFM (float32) and 16-bit PGM (millimeters).

PFM follows the usual convention: grayscale ``Pf`` header, negative scale
meaning little-endian, rows stored bottom-to-top. PGM is binary ``P5`` with
maxval 65535 (two bytes per sample, most significant first); depths are
quantized to millimeters and clamped to the representable range.
"""

from __future__ import annotations

import numpy as np


def write_pfm(path, image: np.ndarray) -> None:
    """Write a (h, w) array as little-endian float32 PFM."""
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError("PFM writer expects a 2-d grayscale image")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(img[::-1, :].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM into a float64 (h, w) array."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM file (magic {magic!r})")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(4 * w * h), dtype=dtype)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated PFM payload")
    return data.reshape(h, w)[::-1, :].astype(np.float64)


def write_pgm16(path, image_m: np.ndarray) -> None:
    """Write depths in meters as 16-bit PGM, quantized to millimeters."""
    img = np.asarray(image_m, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM writer expects a 2-d image")
    mm = np.clip(np.rint(img * 1000.0), 0, 65535).astype(">u2")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(mm.tobytes())


def read_pgm16(path) -> np.ndarray:
    """Read a 16-bit PGM back into meters (float64)."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM file (magic {magic!r})")
        line = fh.readline()
        while line.startswith(b"#"):
            line = fh.readline()
        w, h = (int(x) for x in line.split())
        maxval = int(fh.readline().strip())
        if maxval != 65535:
            raise ValueError(f"{path}: expected 16-bit PGM, maxval {maxval}")
        data = np.frombuffer(fh.read(2 * w * h), dtype=">u2")
    if data.size != w * h:
        raise ValueError(f"{path}: truncated PGM payload")
    return data.reshape(h, w).astype(np.float64) / 1000.0
