import numpy as np
import pytest

from cuedecomp.rng import derive_stream
from cuedecomp.shuffle import (assign_cells, default_half_diag, diamond_shuffle,
                               patch_shuffle, sample_shifts, sample_sites,
                               texture_residual, texture_residual_patched,
                               voronoi_shuffle)


def stream(key="k", seed=11):
    return derive_stream(seed, key)


# --- sites -------------------------------------------------------------------

def test_exhaustive_sites_cover_every_pixel():
    sites = sample_sites(4, 3, 12, stream())
    assert sorted(map(tuple, sites)) == [(x, y) for y in range(3) for x in range(4)]


def test_sites_deterministic():
    a = sample_sites(224, 224, 32, stream("s"))
    b = sample_sites(224, 224, 32, stream("s"))
    np.testing.assert_array_equal(a, b)


def test_sites_distinct_and_in_bounds():
    sites = sample_sites(224, 224, 32, stream())
    assert len({tuple(s) for s in sites}) == 32
    assert sites[:, 0].min() >= 0 and sites[:, 0].max() < 224
    assert sites[:, 1].min() >= 0 and sites[:, 1].max() < 224


def test_too_many_sites_rejected():
    with pytest.raises(ValueError):
        sample_sites(4, 4, 17, stream())


# --- cell assignment ---------------------------------------------------------

def test_assignment_basic_geometry():
    cells = assign_cells(4, 4, [(0, 0), (3, 3)])
    assert cells[1, 1] == 0   # dist sqrt(2) vs 2*sqrt(2)
    assert cells[3, 3] == 1
    assert cells[0, 0] == 0


def test_single_site_owns_everything():
    cells = assign_cells(5, 7, [(2, 3)])
    np.testing.assert_array_equal(cells, np.zeros((7, 5), dtype=np.int64))


def test_equidistant_ties_take_lowest_index():
    # pixel (1, 0) is equidistant to sites 1 and 3; site 0 is farther
    cells = assign_cells(3, 1, [(1, 0)] * 0 + [(2, 0), (0, 0), (2, 0), (0, 0)])
    assert cells[0, 1] == 1


def test_partition_is_complete_and_disjoint():
    sites = sample_sites(16, 16, 9, stream())
    cells = assign_cells(16, 16, sites)
    counts = np.bincount(cells.ravel(), minlength=9)
    assert counts.sum() == 256
    nearest_ok = True
    for y in range(16):
        for x in range(16):
            d = [(x - sx) ** 2 + (y - sy) ** 2 for sx, sy in sites]
            nearest_ok &= d[cells[y, x]] == min(d)
    assert nearest_ok


# --- shifts ------------------------------------------------------------------

def test_whole_image_cell_gets_zero_shift():
    cells = np.zeros((8, 8), dtype=np.int64)
    shifts = sample_shifts(cells, 8, 8, 1, stream())
    np.testing.assert_array_equal(shifts, [[0, 0]])


def test_shifts_deterministic():
    sites = sample_sites(32, 32, 8, stream("sites"))
    cells = assign_cells(32, 32, sites)
    a = sample_shifts(cells, 32, 32, 8, stream("sh"))
    b = sample_shifts(cells, 32, 32, 8, stream("sh"))
    np.testing.assert_array_equal(a, b)


def test_shift_keeps_cells_inside():
    sites = sample_sites(20, 20, 6, stream())
    cells = assign_cells(20, 20, sites)
    shifts = sample_shifts(cells, 20, 20, 6, stream("z"))
    ys, xs = np.nonzero(cells >= 0)
    sx = xs + shifts[cells[ys, xs], 0]
    sy = ys + shifts[cells[ys, xs], 1]
    assert sx.min() >= 0 and sx.max() < 20
    assert sy.min() >= 0 and sy.max() < 20


# --- voronoi shuffle ---------------------------------------------------------

def test_single_site_is_identity(rng):
    img = rng.random((12, 12, 3))
    out, _, diagram = voronoi_shuffle(img, n=1, rng=stream())
    np.testing.assert_array_equal(out, img)
    np.testing.assert_array_equal(diagram.shifts, [[0, 0]])


def test_pixel_provenance_exhaustive(rng):
    img = rng.random((16, 16, 3))
    out, _, d = voronoi_shuffle(img, n=5, rng=stream("prov"))
    for y in range(16):
        for x in range(16):
            dx, dy = d.shifts[d.assignment[y, x]]
            np.testing.assert_array_equal(out[y, x], img[y + dy, x + dx])


def test_every_output_value_occurs_in_input(rng):
    img = rng.random((64, 64, 3))
    out, _, _ = voronoi_shuffle(img, n=32, rng=stream("member"))
    assert not np.array_equal(out, img)  # histogram generally changes
    in_values = set(np.unique(img[:, :, 0]))
    assert set(np.unique(out[:, :, 0])) <= in_values


def test_mask_shuffled_identically(rng):
    img = rng.random((16, 16, 1))
    mask = np.arange(256, dtype=np.int64).reshape(16, 16)
    out, out_mask, d = voronoi_shuffle(img, n=4, rng=stream("m"), mask=mask)
    for y in range(16):
        for x in range(16):
            dx, dy = d.shifts[d.assignment[y, x]]
            assert out_mask[y, x] == mask[y + dy, x + dx]


def test_voronoi_deterministic(rng):
    img = rng.random((24, 24, 3))
    a, _, _ = voronoi_shuffle(img, n=7, rng=stream("det"))
    b, _, _ = voronoi_shuffle(img, n=7, rng=stream("det"))
    np.testing.assert_array_equal(a, b)


def test_mask_dimension_mismatch_rejected(rng):
    with pytest.raises(ValueError):
        voronoi_shuffle(rng.random((8, 8, 1)), n=2, rng=stream(),
                        mask=np.zeros((9, 8), dtype=np.int64))


# --- patch shuffle -----------------------------------------------------------

def test_patch_identity_permutation(rng):
    img = rng.random((16, 16, 3))
    out = patch_shuffle(img, 4, permutation=np.arange(16))
    np.testing.assert_array_equal(out, img)


def test_patch_preserves_value_multiset(rng):
    img = rng.random((24, 24, 3))
    out = patch_shuffle(img, 8, rng=stream("p"))
    np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(img.ravel()))


def test_patch_moves_whole_patches(rng):
    img = rng.random((224, 224, 3))
    out = patch_shuffle(img, 8, rng=stream("q"))
    # recover the permutation by matching 28x28 patch contents
    k, p = 8, 28
    patches_in = img.reshape(k, p, k, p, 3).transpose(0, 2, 1, 3, 4).reshape(64, -1)
    patches_out = out.reshape(k, p, k, p, 3).transpose(0, 2, 1, 3, 4).reshape(64, -1)
    matches = [np.flatnonzero((patches_in == po).all(axis=1)) for po in patches_out]
    assert sorted(m[0] for m in matches) == list(range(64))


def test_patch_indivisible_rejected(rng):
    with pytest.raises(ValueError):
        patch_shuffle(rng.random((10, 10, 1)), 3)


def test_patch_bad_permutation_rejected(rng):
    with pytest.raises(ValueError):
        patch_shuffle(rng.random((8, 8, 1)), 2, permutation=[0, 1, 2, 2])


# --- diamond shuffle ---------------------------------------------------------

def test_diamond_identity_permutation(rng):
    img = rng.random((32, 32, 3))
    out = diamond_shuffle(img, 4, permutation=None, rng=stream())
    n_cells = len(np.unique(_cells_of(img, 4)))
    out = diamond_shuffle(img, 4, permutation=np.arange(n_cells))
    np.testing.assert_array_equal(out, img)


def _cells_of(img, half_diag):
    from cuedecomp.shuffle import _diamond_cells
    _, assignment = _diamond_cells(img.shape[1], img.shape[0], half_diag)
    return assignment


@pytest.mark.parametrize("size,half_diag", [(32, 4), (48, 5), (64, 6), (60, 7)])
def test_diamond_preserves_histogram_exactly(rng, size, half_diag):
    img = rng.random((size, size, 3))
    out = diamond_shuffle(img, half_diag, rng=stream(f"d{size}"))
    np.testing.assert_array_equal(np.sort(out.ravel()), np.sort(img.ravel()))


def test_diamond_shuffles_commensurate_grid(rng):
    # 2 * half_diag divides the side: every cell is congruent, all cells move
    img = rng.random((32, 32, 3))
    out = diamond_shuffle(img, 4, rng=stream("dc"))
    assert not np.array_equal(out, img)


def test_diamond_default_cell_count_comparable_to_patch_grid():
    # cell area ~ (224/8)^2 so the count is comparable to 64 (within +-50%)
    half = default_half_diag(224)
    assert half == 20
    cells = _cells_of(np.zeros((224, 224, 1)), half)
    n = len(np.unique(cells))
    assert 32 <= n <= 96


def test_diamond_deterministic(rng):
    img = rng.random((40, 40, 3))
    a = diamond_shuffle(img, 5, rng=stream("dd"))
    b = diamond_shuffle(img, 5, rng=stream("dd"))
    np.testing.assert_array_equal(a, b)


# --- texture residual --------------------------------------------------------

def test_residual_of_identical_inputs_is_mid_gray(rng):
    img = rng.random((8, 8, 3))
    np.testing.assert_array_equal(texture_residual(img, img), np.full((8, 8, 3), 0.5))


def test_residual_clamps_both_sides():
    a = np.full((2, 2, 1), 0.9)
    b = np.full((2, 2, 1), 0.2)
    np.testing.assert_array_equal(texture_residual(a, b), np.ones((2, 2, 1)))
    np.testing.assert_array_equal(texture_residual(b, a), np.zeros((2, 2, 1)))


def test_residual_patched_histogram_matches_residual(rng):
    img = rng.random((16, 16, 3))
    diffused = rng.random((16, 16, 3))
    plain = texture_residual(img, diffused)
    shuffled = texture_residual_patched(img, diffused, 4, rng=stream("tp"))
    np.testing.assert_array_equal(np.sort(plain.ravel()), np.sort(shuffled.ravel()))


def test_residual_patched_deterministic(rng):
    img = rng.random((16, 16, 3))
    diffused = rng.random((16, 16, 3))
    a = texture_residual_patched(img, diffused, 4, rng=stream("tq"))
    b = texture_residual_patched(img, diffused, 4, rng=stream("tq"))
    np.testing.assert_array_equal(a, b)


def test_residual_shape_mismatch_rejected(rng):
    with pytest.raises(ValueError):
        texture_residual(rng.random((8, 8, 1)), rng.random((8, 9, 1)))
