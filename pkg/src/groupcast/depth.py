"""Depth-image post-processing: sensor noise, dropout patches, inpainting.

Real stereo depth shows Gaussian jitter plus patches of invalid pixels from
reflections, motion blur, and matcher failures; rendered depth is clean.
This module reproduces those artifacts on rendered images and then repairs
the holes the same way the live pipeline does, so train-time and run-time
inputs look alike.

Randomness is counter-based and fully documented so any implementation can
reproduce a stream from (seed, stream id, draw index):

- generator: Philox4x64 keyed with the 128-bit value ``seed + (stream_id <<
  64)``, counter starting at zero (streams: 0 = Gaussian noise, 1 = patches);
- the stream yields uniform doubles in [0, 1), one per 64-bit draw;
- Gaussian values come from Box-Muller over consecutive uniform pairs:
  pixel ``i`` (row-major) uses draws ``2i`` and ``2i + 1`` as
  ``sqrt(-2 ln(1 - u0)) * cos(2 pi u1)``;
- integers in [a, b] come from single draws as ``a + floor(u * (b - a + 1))``.

Every operation is a pure function of (image, config), so images may be
processed concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllInvalidError
from .raycast import DepthMap

GAUSSIAN_STREAM = 0
PATCH_STREAM = 1

INPAINT_TOL = 1e-4
INPAINT_MAX_ITERS = 500


@dataclass(frozen=True)
class NoiseConfig:
    """Noise/artifact parameters.

    The defaults below are placeholders, not measured sensor statistics;
    calibrate ``gaussian_sigma`` and the patch ranges against the actual
    depth camera before relying on them.
    """

    gaussian_sigma: float = 0.0       # meters
    patch_count_range: tuple[int, int] = (0, 0)
    patch_size_range: tuple[int, int] = (2, 8)   # pixels per side
    hole_fill_value: float = 0.0      # sentinel written into hole pixels
    seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0.0:
            raise ValueError("gaussian_sigma must be >= 0")
        for name, (lo, hi) in (
            ("patch_count_range", self.patch_count_range),
            ("patch_size_range", self.patch_size_range),
        ):
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a non-empty non-negative range")


@dataclass(frozen=True, eq=False)
class DepthImage:
    """(height, width) float64 depth with a validity mask.

    Invalid pixels are holes: their value is a sentinel and downstream
    stages must not trust it. ``normalized`` flags values mapped to [0, 1].
    """

    values: np.ndarray
    valid: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        mask = np.array(self.valid, dtype=bool)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("values must be a non-empty 2-d array")
        if mask.shape != vals.shape:
            raise ValueError("valid mask must match values shape")
        if self.normalized:
            v = vals[mask]
            if v.size and (v.min() < 0.0 or v.max() > 1.0):
                raise ValueError("normalized image must lie in [0, 1]")
        vals.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", mask)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def from_depth_map(dm: DepthMap) -> "DepthImage":
        return DepthImage(dm.image(), np.ones((dm.height, dm.width), dtype=bool))


def _uniforms(seed: int, stream: int, n: int) -> np.ndarray:
    key = (int(seed) & ((1 << 64) - 1)) + (int(stream) << 64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(n)


def _rand_int(u: float, lo: int, hi: int) -> int:
    """Map one uniform draw to an integer in [lo, hi]."""
    return lo + min(int(u * (hi - lo + 1)), hi - lo)


def add_gaussian_noise(img: DepthImage, cfg: NoiseConfig) -> DepthImage:
    """Perturb each valid pixel with i.i.d. N(0, sigma^2) meters.

    Invalid pixels are untouched and still consume their draws, so the
    noise at a pixel depends only on (seed, pixel index).
    """
    if cfg.gaussian_sigma == 0.0:
        return DepthImage(img.values, img.valid, img.normalized)
    n = img.width * img.height
    u = _uniforms(cfg.seed, GAUSSIAN_STREAM, 2 * n)
    z = np.sqrt(-2.0 * np.log1p(-u[0::2])) * np.cos(2.0 * math.pi * u[1::2])
    noise = (cfg.gaussian_sigma * z).reshape(img.height, img.width)
    out = img.values.copy()
    out[img.valid] += noise[img.valid]
    return DepthImage(out, img.valid, img.normalized)


def add_patch_artifacts(img: DepthImage, cfg: NoiseConfig) -> DepthImage:
    """Punch k ~ U(count range) rectangular holes at uniform positions.

    Patch sides are drawn from the size range (clamped to the image), and
    positions are uniform over placements that keep the patch inside the
    frame. Holes get ``hole_fill_value`` and a cleared validity bit.
    """
    lo_k, hi_k = cfg.patch_count_range
    draws = _uniforms(cfg.seed, PATCH_STREAM, 1 + 4 * hi_k)
    k = _rand_int(draws[0], lo_k, hi_k)
    if k == 0:
        return DepthImage(img.values, img.valid, img.normalized)
    values = img.values.copy()
    valid = img.valid.copy()
    lo_s, hi_s = cfg.patch_size_range
    for j in range(k):
        u_w, u_h, u_x, u_y = draws[1 + 4 * j : 5 + 4 * j]
        w = min(_rand_int(u_w, lo_s, hi_s), img.width)
        h = min(_rand_int(u_h, lo_s, hi_s), img.height)
        if w == 0 or h == 0:
            continue
        x0 = _rand_int(u_x, 0, img.width - w)
        y0 = _rand_int(u_y, 0, img.height - h)
        values[y0 : y0 + h, x0 : x0 + w] = cfg.hole_fill_value
        valid[y0 : y0 + h, x0 : x0 + w] = False
    return DepthImage(values, valid, img.normalized)


def inpaint_holes(
    img: DepthImage, tol: float = INPAINT_TOL, max_iters: int = INPAINT_MAX_ITERS
) -> DepthImage:
    """Fill invalid pixels by iterative 4-neighbor diffusion.

    Holes start at the mean of the valid pixels and relax toward the
    harmonic fill (Jacobi sweeps) until the largest update drops below
    ``tol`` meters or ``max_iters`` sweeps have run. Valid pixels never
    change, and filled values stay inside the valid min/max by convexity.

    Raises:
        AllInvalidError: when the image contains no valid pixel.
    """
    hole = ~img.valid
    if not hole.any():
        return DepthImage(img.values, img.valid, img.normalized)
    if not img.valid.any():
        raise AllInvalidError("cannot inpaint an image with no valid pixels")
    filled = img.values.copy()
    filled[hole] = img.values[img.valid].mean()

    count = np.zeros(img.values.shape, dtype=np.float64)
    count[1:, :] += 1.0
    count[:-1, :] += 1.0
    count[:, 1:] += 1.0
    count[:, :-1] += 1.0

    for _ in range(max_iters):
        acc = np.zeros_like(filled)
        acc[1:, :] += filled[:-1, :]
        acc[:-1, :] += filled[1:, :]
        acc[:, 1:] += filled[:, :-1]
        acc[:, :-1] += filled[:, 1:]
        new = acc[hole] / count[hole]
        delta = np.abs(new - filled[hole]).max()
        filled[hole] = new
        if delta < tol:
            break
    return DepthImage(filled, np.ones_like(img.valid), img.normalized)


def clip_normalize(img: DepthImage, near: float, far: float) -> DepthImage:
    """Clamp to [near, far] then map affinely onto [0, 1]."""
    if not far > near:
        raise ValueError("need far > near")
    clamped = np.clip(img.values, near, far)
    return DepthImage((clamped - near) / (far - near), img.valid, normalized=True)


def denormalize(img: DepthImage, near: float, far: float) -> DepthImage:
    """Inverse of clip_normalize on in-range values."""
    if not far > near:
        raise ValueError("need far > near")
    return DepthImage(img.values * (far - near) + near, img.valid, normalized=False)


def apply_pipeline(img: DepthImage, cfg: NoiseConfig, near: float, far: float) -> DepthImage:
    """Full chain: Gaussian noise, dropout patches, inpaint, clip/normalize.

    Output has zero invalid pixels and values in [0, 1]; with sigma 0 and a
    zero patch count this is exactly ``clip_normalize``.
    """
    out = add_gaussian_noise(img, cfg)
    out = add_patch_artifacts(out, cfg)
    out = inpaint_holes(out)
    return clip_normalize(out, near, far)
