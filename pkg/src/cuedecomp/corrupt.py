"""The five-corruption robustness suite with intensity grids.

Identity sentinels per kind: contrast 1.0, lowpass sigma 0, highpass sigma
inf, noise width 0, phase width 0. sweep() bypasses the transform at the
identity sentinel so grids can include an uncorrupted reference point.
"""
import math

import numpy as np

from .eed import gaussian_kernel
from . import _eed_kernels as _k
from .rng import RngStream, as_generator
from .validation import check_image, clamp01

KINDS = ("contrast", "highpass", "lowpass", "noise", "phase")

DEFAULT_GRIDS = {
    "contrast": (1.0, 0.5, 0.3, 0.2, 0.1, 0.05),
    "lowpass": (1.0, 2.0, 4.0, 8.0, 16.0),
    "highpass": (3.0, 1.5, 1.0, 0.7, 0.45),
    "noise": (0.0, 0.1, 0.2, 0.35, 0.6, 0.9),
    "phase": (0.0, 30.0, 60.0, 90.0, 120.0, 150.0),
}

IDENTITY_INTENSITY = {
    "contrast": 1.0,
    "lowpass": 0.0,
    "highpass": math.inf,
    "noise": 0.0,
    "phase": 0.0,
}


def contrast(img, c):
    """Scale intensities about mid-gray: clamp((v - 0.5) * c + 0.5)."""
    img = check_image(img)
    if not 0 < c <= 1:
        raise ValueError(f"contrast level must be in (0, 1], got {c}")
    return clamp01((img - 0.5) * c + 0.5)


def lowpass(img, sigma):
    """Gaussian blur with kernel radius ceil(3 sigma), reflective boundary.

    Uses the rotation-symmetric smoothing, so blurring commutes exactly with
    90 degree image rotation.
    """
    img = check_image(img)
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    w = gaussian_kernel(2 * radius + 1, sigma)
    u = np.ascontiguousarray(np.moveaxis(img, 2, 0))
    tmp, alt, out = np.empty_like(u), np.empty_like(u), np.empty_like(u)
    _k.smooth_symmetric(u, w, tmp, alt, out)
    return clamp01(np.moveaxis(out, 0, 2))


def highpass(img, sigma):
    """Difference from the blurred image, recentred at mid-gray."""
    img = check_image(img)
    return clamp01(img - lowpass(img, sigma) + 0.5)


def uniform_noise(img, width, rng):
    """Additive zero-mean uniform noise of the given peak-to-peak width,
    one draw per pixel shared across channels."""
    img = check_image(img)
    if width < 0:
        raise ValueError(f"noise width must be >= 0, got {width}")
    if width == 0:
        return img.copy()
    gen = as_generator(rng)
    noise = gen.uniform(-width / 2.0, width / 2.0, size=img.shape[:2])
    return clamp01(img + noise[:, :, None])


def _antisymmetric_phase(h, w, width_rad, gen):
    """Per-frequency phase offsets with theta(-k) = -theta(k).

    One uniform draw per conjugate-symmetric frequency pair; self-paired
    frequencies (DC and Nyquist lines) stay at zero so the inverse
    transform is real and the mean is untouched.
    """
    draws = gen.uniform(-width_rad, width_rad, size=(h, w))
    idx = np.arange(h * w).reshape(h, w)
    partner = ((-np.arange(h)) % h)[:, None] * w + ((-np.arange(w)) % w)[None, :]
    theta = np.where(idx < partner, draws, -draws.ravel()[partner].reshape(h, w))
    theta[idx == partner] = 0.0
    return theta


def phase_noise(img, width_degrees, rng):
    """Perturb Fourier phases by uniform offsets, magnitudes untouched.

    The same offsets are applied to every channel so the channels stay
    aligned.
    """
    img = check_image(img)
    if not 0 <= width_degrees <= 180:
        raise ValueError(f"phase width must be in [0, 180] degrees, got {width_degrees}")
    h, w = img.shape[:2]
    gen = as_generator(rng)
    theta = _antisymmetric_phase(h, w, math.radians(width_degrees), gen)
    rot = np.exp(1j * theta)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        spectrum = np.fft.fft2(img[:, :, c])
        out[:, :, c] = np.fft.ifft2(spectrum * rot).real
    return clamp01(out)


def apply_corruption(img, kind, intensity, rng=None):
    """Dispatch a single corruption; identity sentinel returns a copy."""
    if kind not in KINDS:
        raise ValueError(f"unknown corruption kind {kind!r}; expected one of {KINDS}")
    if intensity == IDENTITY_INTENSITY[kind]:
        return check_image(img).copy()
    if kind == "contrast":
        return contrast(img, intensity)
    if kind == "lowpass":
        return lowpass(img, intensity)
    if kind == "highpass":
        return highpass(img, intensity)
    if kind == "noise":
        return uniform_noise(img, intensity, rng)
    return phase_noise(img, intensity, rng)


def sweep(img, kind, grid=None, rng=None):
    """Corrupt at every grid intensity, one derived stream per grid point.

    rng must be an RngStream (so intensity-keyed sub-streams can be derived)
    unless the kind is deterministic. Returns a list of (intensity, image)
    in grid order.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown corruption kind {kind!r}; expected one of {KINDS}")
    grid = DEFAULT_GRIDS[kind] if grid is None else tuple(grid)
    if not grid:
        raise ValueError("intensity grid is empty")
    out = []
    for intensity in grid:
        if isinstance(rng, RngStream):
            sub = rng.spawn(f"{kind}:{intensity!r}")
        else:
            sub = rng
        out.append((intensity, apply_corruption(img, kind, intensity, sub)))
    return out
