"""Image I/O and preprocessing geometry.

Images are plain float64 numpy arrays of shape (H, W, C) with intensities
in [0, 1] and C in {1, 3}. 8-bit stored bytes are treated as linear
intensities; no color management is applied.
"""
import numpy as np
from PIL import Image, UnidentifiedImageError

from .validation import check_image, clamp01


class ImageLoadError(Exception):
    """Base class for image reading failures."""


class ImageDecodeError(ImageLoadError):
    """The file could not be decoded (missing, truncated, or not a raster)."""


class UnsupportedBitDepthError(ImageLoadError):
    """The raster stores more than 8 bits per sample."""


_HIGH_DEPTH_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


def load_image(path):
    """Read an 8-bit raster file into a float (H, W, C) buffer in [0, 1].

    Grayscale files load as one channel, color files as three; palette and
    CMYK images are converted to RGB, alpha channels are dropped.
    """
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in _HIGH_DEPTH_MODES:
                raise UnsupportedBitDepthError(f"{path}: unsupported bit depth (mode {mode})")
            if mode in ("1", "L"):
                im = im.convert("L")
            elif mode == "LA":
                im = im.convert("L")
            else:
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except UnsupportedBitDepthError:
        raise
    except (FileNotFoundError, UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def quantize(img):
    """Map [0, 1] intensities to bytes with round-half-up: round(v * 255)."""
    img = check_image(img)
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255).astype(np.uint8)


def save_image(img, path):
    """Write a buffer to a lossless 8-bit PNG (round-half-up quantization)."""
    data = quantize(img)
    if data.shape[2] == 1:
        pil = Image.fromarray(data[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(data, mode="RGB")
    pil.save(path, format="PNG")


def load_mask(path):
    """Read an 8-bit grayscale PNG of class indices as an int64 (H, W) array."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "P", "1"):
                raise ImageDecodeError(f"{path}: label masks must be 8-bit grayscale")
            return np.asarray(im.convert("L"), dtype=np.int64)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ImageDecodeError(f"{path}: {exc}") from exc


def save_mask(mask, path):
    """Write class indices (0..255) as an 8-bit grayscale PNG."""
    arr = np.asarray(mask)
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("mask labels must fit 8 bits")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG")


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def _linear_resample_1d(arr, new_size, axis):
    """Bilinear (separable linear) resampling along one axis, align-corners=false."""
    old_size = arr.shape[axis]
    if new_size == old_size:
        return arr
    scale = old_size / new_size
    src = (np.arange(new_size) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, old_size - 1.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, old_size - 1)
    frac = src - lo
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = new_size
    return a + frac.reshape(shape) * (b - a)


def resize_bilinear(img, width, height):
    """Resize to exactly width x height with align-corners=false bilinear sampling."""
    img = check_image(img)
    out = _linear_resample_1d(img, height, axis=0)
    out = _linear_resample_1d(out, width, axis=1)
    return clamp01(out)


def resize_center_crop(img, resize_spec, crop):
    """Resize then take a centered crop.

    resize_spec: (width, height) for a fixed target, or an int to scale the
    shorter side to that length while preserving aspect ratio (the longer
    side rounds half-up). crop: (width, height); offsets are
    floor((dim - crop) / 2). Raises ValueError if the crop exceeds the
    resized image.
    """
    img = check_image(img)
    h, w = img.shape[:2]
    if isinstance(resize_spec, (int, np.integer)):
        short = int(resize_spec)
        if short < 1:
            raise ValueError("shorter-side length must be >= 1")
        if w <= h:
            new_w = short
            new_h = _round_half_up(short * h / w)
        else:
            new_h = short
            new_w = _round_half_up(short * w / h)
    else:
        new_w, new_h = int(resize_spec[0]), int(resize_spec[1])
    crop_w, crop_h = int(crop[0]), int(crop[1])
    if crop_w > new_w or crop_h > new_h:
        raise ValueError(
            f"crop {crop_w}x{crop_h} larger than resized image {new_w}x{new_h}"
        )
    out = resize_bilinear(img, new_w, new_h)
    off_x = (new_w - crop_w) // 2
    off_y = (new_h - crop_h) // 2
    return out[off_y:off_y + crop_h, off_x:off_x + crop_w]
