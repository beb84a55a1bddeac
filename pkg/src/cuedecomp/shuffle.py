"""Shape-destroying shuffles: the texture-cue extractors.

Voronoi shuffling partitions the image by nearest random sites and refills
each cell with a randomly shifted crop of the same image; patch and diamond
shuffling permute grid cells; the texture residual keeps what diffusion
removed.
"""
import math
from dataclasses import dataclass

import numpy as np

from .rng import as_generator
from .validation import check_image, check_mask, check_same_shape, clamp01

DEFAULT_SITES = 32
DEFAULT_PATCHES_PER_SIDE = 8

_ASSIGN_CHUNK_ROWS = 64


@dataclass(frozen=True)
class VoronoiDiagram:
    """Sites, per-pixel nearest-site assignment, and per-site shift vectors."""

    sites: np.ndarray        # (N, 2) int64 (x, y)
    assignment: np.ndarray   # (H, W) int64 site index
    shifts: np.ndarray       # (N, 2) int64 (dx, dy)

    def to_dict(self):
        return {
            "sites": self.sites.tolist(),
            "shifts": self.shifts.tolist(),
        }


def sample_sites(width, height, n, rng):
    """Draw n distinct pixel coordinates, uniformly without replacement.

    Returns an (n, 2) array of (x, y) in draw order.
    """
    total = width * height
    if n < 1:
        raise ValueError(f"need at least one site, got {n}")
    if n > total:
        raise ValueError(f"cannot place {n} distinct sites on {width}x{height}")
    gen = as_generator(rng)
    flat = gen.choice(total, size=n, replace=False)
    return np.stack([flat % width, flat // width], axis=1).astype(np.int64)


def assign_cells(width, height, sites):
    """Nearest-site index per pixel (Euclidean); ties go to the lowest index.

    Brute force over sites; exact, since squared integer distances are
    representable in float64 at any supported image size.
    """
    sites = np.asarray(sites, dtype=np.int64)
    if sites.ndim != 2 or sites.shape[1] != 2 or len(sites) == 0:
        raise ValueError("sites must be a nonempty (N, 2) array")
    xs = np.arange(width, dtype=np.int64)
    assignment = np.empty((height, width), dtype=np.int64)
    sx = sites[:, 0][None, None, :]
    sy = sites[:, 1][None, None, :]
    for y0 in range(0, height, _ASSIGN_CHUNK_ROWS):
        ys = np.arange(y0, min(y0 + _ASSIGN_CHUNK_ROWS, height), dtype=np.int64)
        dx = xs[None, :, None] - sx
        dy = ys[:, None, None] - sy
        d2 = dx * dx + dy * dy
        assignment[y0:y0 + len(ys)] = np.argmin(d2, axis=2)
    return assignment


def sample_shifts(assignment, width, height, n_sites, rng):
    """Per cell, draw a uniform integer shift keeping the cell's bounding box
    inside the image; cells with no slack get (0, 0)."""
    gen = as_generator(rng)
    shifts = np.zeros((n_sites, 2), dtype=np.int64)
    ys, xs = np.nonzero(assignment >= 0)
    cell = assignment[ys, xs]
    for s in range(n_sites):
        sel = cell == s
        if not sel.any():
            continue
        cx = xs[sel]
        cy = ys[sel]
        lo_x, hi_x = -cx.min(), width - 1 - cx.max()
        lo_y, hi_y = -cy.min(), height - 1 - cy.max()
        shifts[s, 0] = gen.integers(lo_x, hi_x + 1)
        shifts[s, 1] = gen.integers(lo_y, hi_y + 1)
    return shifts


def voronoi_shuffle(img, n=DEFAULT_SITES, rng=None, mask=None):
    """Fill each Voronoi cell with a randomly shifted crop of the image.

    output[x] = input[x + shift(cell(x))]. The mask, when given, is sampled
    at the same source pixels with no interpolation. Returns
    (image, mask or None, diagram).
    """
    img = check_image(img)
    h, w = img.shape[:2]
    if mask is not None:
        mask = check_mask(mask, img.shape)
    sites = sample_sites(w, h, n, rng)
    assignment = assign_cells(w, h, sites)
    shifts = sample_shifts(assignment, w, h, len(sites), rng)
    diagram = VoronoiDiagram(sites=sites, assignment=assignment, shifts=shifts)

    ys, xs = np.mgrid[0:h, 0:w]
    src_x = xs + shifts[assignment, 0]
    src_y = ys + shifts[assignment, 1]
    out = img[src_y, src_x]
    out_mask = mask[src_y, src_x] if mask is not None else None
    return out, out_mask, diagram


def patch_shuffle(img, patches_per_side=DEFAULT_PATCHES_PER_SIDE, rng=None, permutation=None):
    """Split the image into an axis-aligned k x k grid and permute the patches."""
    img = check_image(img)
    h, w = img.shape[:2]
    k = int(patches_per_side)
    if k < 1:
        raise ValueError(f"patches_per_side must be >= 1, got {k}")
    if h % k or w % k:
        raise ValueError(f"image {w}x{h} not divisible into {k}x{k} patches")
    ph, pw = h // k, w // k
    if permutation is None:
        permutation = as_generator(rng).permutation(k * k)
    else:
        permutation = np.asarray(permutation, dtype=np.int64)
        if sorted(permutation.tolist()) != list(range(k * k)):
            raise ValueError("permutation must be a bijection on patch indices")
    # (k, k, ph, pw, C) patch grid -> permute -> reassemble
    patches = img.reshape(k, ph, k, pw, -1).transpose(0, 2, 1, 3, 4).reshape(k * k, ph, pw, -1)
    shuffled = patches[permutation]
    out = shuffled.reshape(k, k, ph, pw, -1).transpose(0, 2, 1, 3, 4).reshape(img.shape)
    return np.ascontiguousarray(out)


def default_half_diag(width):
    """Half-diagonal giving diamond cells with area close to (width/8)^2."""
    return max(1, round(width / (8.0 * math.sqrt(2.0))))


def _wrapped_delta(a, p, size):
    """Canonical wrapped displacement a - p in [-size//2, size - size//2)."""
    return (a - p + size // 2) % size - size // 2


def _diamond_cells(width, height, half_diag):
    """Partition pixels into diamond cells of the 45-degree lattice.

    Anchors are the lattice points inside the image; pixels join the anchor
    at smallest toroidally wrapped L1 distance (ties by smallest wrapped
    (dy, dx)), so the partition wraps around the borders and is covariant
    under lattice translations.
    Returns (anchors (N,2) int64 (x, y), assignment (H, W) int64).
    """
    h = int(half_diag)
    anchors = []
    for a in range((width + h - 1) // h):
        for b in range((height + h - 1) // h):
            if (a + b) % 2 == 0:
                anchors.append((a * h, b * h))
    anchors = np.array(sorted(anchors), dtype=np.int64)
    ax = anchors[:, 0][None, None, :]
    ay = anchors[:, 1][None, None, :]
    xs = np.arange(width, dtype=np.int64)[None, :, None]
    ys = np.arange(height, dtype=np.int64)[:, None, None]
    dx = _wrapped_delta(ax, xs, width)
    dy = _wrapped_delta(ay, ys, height)
    dist = np.abs(dx) + np.abs(dy)
    # lexicographic (dist, dy, dx) via a single integer key; offsets keep
    # each component nonnegative and within its slot
    kd = dist.astype(np.int64)
    ky = dy + height
    kx = dx + width
    key = ((kd * (2 * height + 1)) + ky) * (2 * width + 1) + kx
    assignment = np.argmin(key, axis=2)
    return anchors, assignment


def diamond_shuffle(img, half_diag=None, rng=None, permutation=None):
    """Permute diamond cells of the 45-degree lattice by pure translations.

    Cells are grouped by their wrapped-displacement footprint; the random
    permutation acts within each congruence group, so the map is a pixel
    bijection and the output histogram equals the input's exactly. On sizes
    where the lattice tiles the torus (2*half_diag divides both sides) all
    cells are congruent and shuffle freely.
    """
    img = check_image(img)
    h, w = img.shape[:2]
    if half_diag is None:
        half_diag = default_half_diag(min(h, w))
    if half_diag < 1:
        raise ValueError(f"half_diag must be >= 1, got {half_diag}")
    anchors, assignment = _diamond_cells(w, h, half_diag)
    n = len(anchors)

    ys, xs = np.mgrid[0:h, 0:w]
    dx = _wrapped_delta(xs, anchors[assignment, 0], w)
    dy = _wrapped_delta(ys, anchors[assignment, 1], h)
    # congruence grouping by each cell's sorted displacement footprint
    footprints = [[] for _ in range(n)]
    flat_cell = assignment.ravel()
    flat_dx = dx.ravel()
    flat_dy = dy.ravel()
    order = np.lexsort((flat_dx, flat_dy, flat_cell))
    for idx in order:
        footprints[flat_cell[idx]].append((flat_dy[idx], flat_dx[idx]))
    groups = {}
    for c in range(n):
        groups.setdefault(tuple(footprints[c]), []).append(c)

    if permutation is None:
        gen = as_generator(rng)
        permutation = np.arange(n)
        for key in sorted(groups):
            members = np.array(groups[key], dtype=np.int64)
            permutation[members] = members[gen.permutation(len(members))]
    else:
        permutation = np.asarray(permutation, dtype=np.int64)
        if sorted(permutation.tolist()) != list(range(n)):
            raise ValueError("permutation must be a bijection on cell indices")
        for key, members in groups.items():
            if sorted(tuple(footprints[permutation[c]]) for c in members) != [key] * len(members):
                raise ValueError("permutation must map each congruence group to itself")

    src_cell = permutation[assignment]
    src_x = (anchors[src_cell, 0] + dx) % w
    src_y = (anchors[src_cell, 1] + dy) % h
    return img[src_y, src_x]


def texture_residual(original, diffused):
    """Pixel-wise difference of the image and its diffused version,
    recentred at mid-gray so negative differences survive 8-bit storage."""
    original = check_image(original)
    diffused = check_image(diffused)
    check_same_shape(original, diffused, ("original", "diffused image"))
    return clamp01(original - diffused + 0.5)


def texture_residual_patched(original, diffused, patches_per_side=DEFAULT_PATCHES_PER_SIDE,
                             rng=None, permutation=None):
    """Patch-shuffled texture residual."""
    return patch_shuffle(texture_residual(original, diffused), patches_per_side,
                         rng=rng, permutation=permutation)
