"""Input validation helpers shared by the functional API and the estimators."""
import numpy as np


def check_image(img, name="image"):
    """Validate and canonicalize an image to float64 (H, W, C), C in {1, 3}.

    Accepts (H, W) grayscale or (H, W, C) arrays with intensities in [0, 1].
    Returns a float64 copy-free view where possible.
    """
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {arr.shape[2]}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} has empty spatial dimensions {arr.shape[:2]}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
        raise ValueError(
            f"{name} intensities must lie in [0, 1], got range "
            f"[{arr.min():.4g}, {arr.max():.4g}]"
        )
    return arr


def check_mask(mask, shape, name="mask"):
    """Validate a label mask against an image's (H, W)."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape != tuple(shape[:2]):
        raise ValueError(f"{name} shape {arr.shape} does not match image {tuple(shape[:2])}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must hold integer labels, got dtype {arr.dtype}")
    return arr


def check_same_shape(a, b, names=("first image", "second image")):
    if a.shape != b.shape:
        raise ValueError(f"{names[0]} shape {a.shape} != {names[1]} shape {b.shape}")


def check_image_batch(X):
    """Canonicalize a batch: 4-D array or a sequence of images. Returns a list."""
    if isinstance(X, np.ndarray) and X.ndim == 4:
        return [check_image(X[i], name=f"X[{i}]") for i in range(X.shape[0])]
    if isinstance(X, np.ndarray) and X.ndim in (2, 3):
        return [check_image(X, name="X")]
    try:
        items = list(X)
    except TypeError:
        raise ValueError("X must be a 4-D array or a sequence of images") from None
    return [check_image(im, name=f"X[{i}]") for i, im in enumerate(items)]


def clamp01(img):
    return np.clip(img, 0.0, 1.0)
