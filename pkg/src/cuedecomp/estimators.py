"""Scikit-learn style transformers over the cue-extraction operations.

Each transformer is stateless (fit only validates), maps a batch of images
to a batch of images, and inherits get_params/set_params from BaseEstimator,
so the transforms drop into sklearn pipelines. Batches are 4-D arrays or
sequences of (H, W, C) images; a list in gives a list out. Randomized
transforms draw a per-item stream from (seed, "<name>:<index>"), so results
do not depend on batch order or splitting.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import corrupt as _corrupt
from . import eed as _eed
from . import shuffle as _shuffle
from .rng import derive_stream
from .validation import check_image_batch


class _ImageTransformer(BaseEstimator, TransformerMixin):
    def fit(self, X, y=None):
        check_image_batch(X)
        return self

    def transform(self, X):
        as_array = isinstance(X, np.ndarray) and X.ndim == 4
        images = check_image_batch(X)
        out = [self._transform_one(img, i) for i, img in enumerate(images)]
        return np.stack(out) if as_array else out

    def _transform_one(self, img, index):
        raise NotImplementedError


class EdgeEnhancingDiffusion(_ImageTransformer):
    """Texture-removing, edge-preserving anisotropic diffusion."""

    def __init__(self, kappa=_eed.DEFAULT_KAPPA, kernel_size=_eed.DEFAULT_KERNEL_SIZE,
                 sigma=_eed.DEFAULT_SIGMA, steps=_eed.DEFAULT_STEPS_CLASSIFICATION,
                 tau=_eed.DEFAULT_TAU):
        self.kappa = kappa
        self.kernel_size = kernel_size
        self.sigma = sigma
        self.steps = steps
        self.tau = tau

    def _params(self):
        return _eed.EedParams(kappa=self.kappa, presmooth_kernel_size=self.kernel_size,
                              presmooth_sigma=self.sigma, steps=self.steps, tau=self.tau)

    def fit(self, X, y=None):
        self._params()
        check_image_batch(X)
        return self

    def _transform_one(self, img, index):
        return _eed.run_eed(img, self._params())


class VoronoiShuffler(_ImageTransformer):
    """Refill random Voronoi cells with shifted crops of the same image."""

    def __init__(self, sites=_shuffle.DEFAULT_SITES, seed=0):
        self.sites = sites
        self.seed = seed

    def _transform_one(self, img, index):
        rng = derive_stream(self.seed, f"voronoi:{index}")
        out, _, _ = _shuffle.voronoi_shuffle(img, n=self.sites, rng=rng)
        return out


class PatchShuffler(_ImageTransformer):
    """Permute the cells of a regular square grid."""

    def __init__(self, patches_per_side=_shuffle.DEFAULT_PATCHES_PER_SIDE, seed=0):
        self.patches_per_side = patches_per_side
        self.seed = seed

    def _transform_one(self, img, index):
        rng = derive_stream(self.seed, f"patch:{index}")
        return _shuffle.patch_shuffle(img, self.patches_per_side, rng=rng)


class DiamondShuffler(_ImageTransformer):
    """Permute diamond cells of the 45-degree lattice (pixel-exact)."""

    def __init__(self, half_diag=None, seed=0):
        self.half_diag = half_diag
        self.seed = seed

    def _transform_one(self, img, index):
        rng = derive_stream(self.seed, f"diamond:{index}")
        return _shuffle.diamond_shuffle(img, half_diag=self.half_diag, rng=rng)


class TextureResidual(_ImageTransformer):
    """Mid-gray recentred difference between the image and its diffused version.

    Runs the diffusion internally; set patch_shuffle=True for the
    patch-shuffled variant.
    """

    def __init__(self, kappa=_eed.DEFAULT_KAPPA, kernel_size=_eed.DEFAULT_KERNEL_SIZE,
                 sigma=_eed.DEFAULT_SIGMA, steps=_eed.DEFAULT_STEPS_CLASSIFICATION,
                 tau=_eed.DEFAULT_TAU, patch_shuffle=False,
                 patches_per_side=_shuffle.DEFAULT_PATCHES_PER_SIDE, seed=0):
        self.kappa = kappa
        self.kernel_size = kernel_size
        self.sigma = sigma
        self.steps = steps
        self.tau = tau
        self.patch_shuffle = patch_shuffle
        self.patches_per_side = patches_per_side
        self.seed = seed

    def _transform_one(self, img, index):
        params = _eed.EedParams(kappa=self.kappa, presmooth_kernel_size=self.kernel_size,
                                presmooth_sigma=self.sigma, steps=self.steps, tau=self.tau)
        residual = _shuffle.texture_residual(img, _eed.run_eed(img, params))
        if not self.patch_shuffle:
            return residual
        rng = derive_stream(self.seed, f"tex_eed_patch:{index}")
        return _shuffle.patch_shuffle(residual, self.patches_per_side, rng=rng)


class Corruptor(_ImageTransformer):
    """Apply one corruption kind at a fixed intensity."""

    def __init__(self, kind="contrast", intensity=1.0, seed=0):
        self.kind = kind
        self.intensity = intensity
        self.seed = seed

    def fit(self, X, y=None):
        if self.kind not in _corrupt.KINDS:
            raise ValueError(f"kind must be one of {_corrupt.KINDS}, got {self.kind!r}")
        check_image_batch(X)
        return self

    def _transform_one(self, img, index):
        rng = derive_stream(self.seed, f"corrupt:{self.kind}:{self.intensity!r}:{index}")
        return _corrupt.apply_corruption(img, self.kind, self.intensity, rng)
