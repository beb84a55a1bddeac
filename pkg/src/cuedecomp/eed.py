"""Edge-enhancing anisotropic diffusion: the shape-cue extractor.

The image is repeatedly diffused with a tensor whose eigenvector across the
local (pre-smoothed, channel-summed) gradient carries the Charbonnier
diffusivity and whose along-edge eigenvector carries diffusivity 1, so
texture is smoothed away while region boundaries survive.
"""
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import _eed_kernels as _k
from .validation import check_image, clamp01

DEFAULT_KAPPA = 1.0 / 15.0
DEFAULT_KERNEL_SIZE = 5
DEFAULT_SIGMA = math.sqrt(5.0)
DEFAULT_STEPS_CLASSIFICATION = 16384
DEFAULT_STEPS_SEGMENTATION = 5792
DEFAULT_TAU = 0.2

# With the nonnegative stencil and tensor eigenvalues in (0, 1], every
# stencil weight is >= 0 and their per-pixel sum is at most 5, so any
# tau <= 1/5 makes the step a convex combination of neighbor values.
TAU_LIMIT = 0.2


@dataclass(frozen=True)
class EedParams:
    """Parameters of the diffusion run.

    steps defaults to the classification setting; pass
    DEFAULT_STEPS_SEGMENTATION for segmentation-sized inputs.
    """

    kappa: float = DEFAULT_KAPPA
    presmooth_kernel_size: int = DEFAULT_KERNEL_SIZE
    presmooth_sigma: float = DEFAULT_SIGMA
    steps: int = DEFAULT_STEPS_CLASSIFICATION
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.presmooth_kernel_size < 1 or self.presmooth_kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd >= 1, got {self.presmooth_kernel_size}")
        if not self.presmooth_sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.presmooth_sigma}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if not 0 < self.tau <= TAU_LIMIT:
            raise ValueError(f"tau must be in (0, {TAU_LIMIT}], got {self.tau}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def gaussian_kernel(size, sigma):
    """Sampled 1-D Gaussian, w_k ~ exp(-k^2 / (2 sigma^2)), normalized to sum 1."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd >= 1, got {size}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    r = (size - 1) // 2
    k = np.arange(-r, r + 1, dtype=np.float64)
    w = np.exp(-(k * k) / (2.0 * sigma * sigma))
    return w / w.sum()


def charbonnier(s, kappa):
    """Charbonnier diffusivity 1 / sqrt(1 + s / kappa^2) for s >= 0."""
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("squared gradient magnitude must be >= 0")
    return 1.0 / np.sqrt(1.0 + s / (kappa * kappa))


def _to_planar(img):
    return np.ascontiguousarray(np.moveaxis(img, 2, 0))


def _from_planar(u):
    return np.ascontiguousarray(np.moveaxis(u, 0, 2))


def gaussian_smooth(img, size, sigma):
    """2-D Gaussian smoothing with reflective boundary.

    Averages the two separable pass orders so the operator commutes exactly
    with 90 degree rotation.
    """
    img = check_image(img)
    w = gaussian_kernel(size, sigma)
    u = _to_planar(img)
    tmp, alt, out = np.empty_like(u), np.empty_like(u), np.empty_like(u)
    _k.smooth_symmetric(u, w, tmp, alt, out)
    return _from_planar(out)


def structure_tensor(img, params=None):
    """Per-pixel channel-summed gradient outer products of the smoothed image.

    Returns an (H, W, 3) array holding (j11, j12, j22).
    """
    img = check_image(img)
    params = params or EedParams()
    us = _to_planar(gaussian_smooth(img, params.presmooth_kernel_size, params.presmooth_sigma))
    st = np.empty((3, us.shape[1], us.shape[2]))
    _k.structure_tensor_kernel(us, st)
    return _from_planar(st)


def diffusion_tensor(st, kappa=DEFAULT_KAPPA):
    """Diffusion tensor field (d11, d12, d22) from a structure tensor field.

    The eigenvector along the dominant structure direction gets eigenvalue
    g(mu1), the orthogonal one gets 1; zero-gradient pixels get the identity.
    """
    st = np.asarray(st, dtype=np.float64)
    if st.ndim != 3 or st.shape[2] != 3:
        raise ValueError(f"structure tensor field must be (H, W, 3), got {st.shape}")
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    mins = min(st[:, :, 0].min(), st[:, :, 2].min())
    if mins < -1e-9:
        raise ValueError("structure tensor field has negative diagonal entries")
    stp = _to_planar(st)
    dt = np.empty_like(stp)
    _k.diffusion_tensor_kernel(stp, float(kappa), dt)
    return _from_planar(dt)


def _check_tensor_field(dt, shape):
    dt = np.asarray(dt, dtype=np.float64)
    if dt.ndim != 3 or dt.shape[2] != 3:
        raise ValueError(f"diffusion tensor field must be (H, W, 3), got {dt.shape}")
    if dt.shape[:2] != shape[:2]:
        raise ValueError(f"tensor field {dt.shape[:2]} does not match image {shape[:2]}")
    d11, d12, d22 = dt[:, :, 0], dt[:, :, 1], dt[:, :, 2]
    if d11.min() < 0 or d22.min() < 0:
        raise ValueError("diffusion tensor has negative diagonal entries")
    # eigenvalues must not exceed 1 for the tau <= 0.2 stability guarantee
    if d11.max() > 1 + 1e-9 or d22.max() > 1 + 1e-9:
        raise ValueError("diffusion tensor eigenvalues exceed 1")
    if np.any((1.0 - d11) * (1.0 - d22) + 1e-9 < d12 * d12):
        raise ValueError("diffusion tensor eigenvalues exceed 1")
    return dt


def _flux_buffers(H, W, C=None):
    fx = np.empty((H, max(W - 1, 1)))
    fy = np.empty((max(H - 1, 1), W))
    fp = np.empty((max(H - 1, 1), max(W - 1, 1)))
    fm = np.empty((max(H - 1, 1), max(W - 1, 1)))
    return fx, fy, fp, fm


def diffuse_step(img, dt, tau=DEFAULT_TAU):
    """One explicit step of the divergence-form diffusion.

    All channels share the tensor field; flux through the border is zero,
    so each channel's mean is conserved to rounding error. The output is
    not clamped. tau must lie in (0, 0.2]: with tensor eigenvalues <= 1
    (enforced) the step is then a convex combination of neighbor values,
    so no new extrema appear.
    """
    img = check_image(img)
    if not 0 < tau <= TAU_LIMIT:
        raise ValueError(f"tau must be in (0, {TAU_LIMIT}], got {tau}")
    dt = _check_tensor_field(dt, img.shape)
    u = _to_planar(img)
    d4 = np.empty((4,) + u.shape[1:])
    _k.split_tensor_kernel(_to_planar(dt), d4)
    fx, fy, fp, fm = _flux_buffers(u.shape[1], u.shape[2])
    out = np.empty_like(u)
    _k.flux_step_kernel(u, d4, float(tau), fx, fy, fp, fm, out)
    return _from_planar(out)


def run_eed(img, params=None):
    """Iterate the diffusion, rebuilding the tensor from the current state
    every step; the result is clamped to [0, 1] once at the end."""
    img = check_image(img)
    params = params or EedParams()
    if params.steps == 0:
        return img.copy()
    w = gaussian_kernel(params.presmooth_kernel_size, params.presmooth_sigma)
    u = _to_planar(img)
    C, H, W = u.shape
    tmp, alt, us = np.empty_like(u), np.empty_like(u), np.empty_like(u)
    st = np.empty((3, H, W))
    dt = np.empty((3, H, W))
    d4 = np.empty((4, H, W))
    fx, fy, fp, fm = _flux_buffers(H, W)
    out = np.empty_like(u)
    final = _k.run_loop(u, w, float(params.kappa), float(params.tau), int(params.steps),
                        tmp, alt, us, st, dt, d4, fx, fy, fp, fm, out)
    return clamp01(_from_planar(final))
