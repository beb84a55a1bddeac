import numpy as np
import pytest

from conftest import make_disk_image
from cuedecomp.eed import (EedParams, charbonnier, diffuse_step, diffusion_tensor,
                           gaussian_kernel, gaussian_smooth, run_eed, structure_tensor)

KAPPA = 1.0 / 15.0


# --- gaussian kernel ---------------------------------------------------------

def test_kernel_matches_sampled_exponential():
    # oracle: sample exp(-k^2 / (2*5)) for k in -2..2 and normalize
    raw = np.exp(-np.arange(-2, 3) ** 2 / 10.0)
    expected = raw / raw.sum()
    w = gaussian_kernel(5, np.sqrt(5))
    np.testing.assert_allclose(w, expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(w, [0.1615, 0.2180, 0.2410, 0.2180, 0.1615], atol=1e-4)


def test_kernel_size_one():
    np.testing.assert_array_equal(gaussian_kernel(1, 2.0), [1.0])


@pytest.mark.parametrize("size,sigma", [(3, 0.5), (7, 1.7), (25, 8.0), (5, np.sqrt(5))])
def test_kernel_normalized(size, sigma):
    assert abs(gaussian_kernel(size, sigma).sum() - 1.0) < 1e-12


def test_kernel_rejects_bad_args():
    with pytest.raises(ValueError):
        gaussian_kernel(4, 1.0)
    with pytest.raises(ValueError):
        gaussian_kernel(5, 0.0)


# --- charbonnier diffusivity -------------------------------------------------

def test_charbonnier_values():
    assert charbonnier(0.0, 0.3) == 1.0
    for kappa in (0.1, 1.0, KAPPA):
        assert abs(charbonnier(kappa ** 2, kappa) - 1 / np.sqrt(2)) < 1e-15
    assert abs(charbonnier(4.0 / 225.0, KAPPA) - 1 / np.sqrt(5)) < 1e-15


def test_charbonnier_strictly_decreasing():
    s = np.linspace(0, 5, 300)
    g = charbonnier(s, KAPPA)
    assert np.all(np.diff(g) < 0)
    assert np.all((g > 0) & (g <= 1))


def test_charbonnier_rejects_negative():
    with pytest.raises(ValueError):
        charbonnier(-1e-9, 1.0)
    with pytest.raises(ValueError):
        charbonnier(1.0, 0.0)


# --- structure tensor --------------------------------------------------------

def test_structure_tensor_zero_on_constant():
    st = structure_tensor(np.full((12, 12, 3), 0.4))
    np.testing.assert_array_equal(st, np.zeros((12, 12, 3)))


def test_structure_tensor_vertical_edge():
    img = np.zeros((16, 16, 1))
    img[:, 8:] = 1.0
    st = structure_tensor(img)
    edge = st[5, 6:10]
    assert np.all(edge[:, 0] > 0)          # j11 > 0 near the edge
    np.testing.assert_allclose(st[:, :, 1], 0, atol=1e-15)  # j12 = 0
    np.testing.assert_allclose(st[:, :, 2], 0, atol=1e-15)  # j22 = 0


def test_structure_tensor_sums_over_channels(rng):
    one = rng.random((10, 10, 1))
    three = np.repeat(one, 3, axis=2)
    st1 = structure_tensor(one)
    st3 = structure_tensor(three)
    np.testing.assert_allclose(st3, 3.0 * st1, rtol=1e-12, atol=1e-18)


def test_structure_tensor_psd(rng):
    st = structure_tensor(rng.random((20, 20, 3)))
    j11, j12, j22 = st[:, :, 0], st[:, :, 1], st[:, :, 2]
    assert j11.min() >= 0 and j22.min() >= 0
    assert np.all(j12 ** 2 <= j11 * j22 + 1e-9)


# --- diffusion tensor --------------------------------------------------------

def test_diffusion_tensor_axis_aligned():
    a2 = 0.7
    st = np.zeros((3, 3, 3))
    st[:, :, 0] = a2  # diag(a^2, 0)
    dt = diffusion_tensor(st, kappa=1.0)
    g = charbonnier(a2, 1.0)
    np.testing.assert_allclose(dt[:, :, 0], g, atol=1e-15)
    np.testing.assert_allclose(dt[:, :, 1], 0, atol=1e-15)
    np.testing.assert_allclose(dt[:, :, 2], 1, atol=1e-15)


def test_diffusion_tensor_identity_at_zero_gradient():
    dt = diffusion_tensor(np.zeros((4, 5, 3)), kappa=KAPPA)
    np.testing.assert_array_equal(dt[:, :, 0], 1.0)
    np.testing.assert_array_equal(dt[:, :, 1], 0.0)
    np.testing.assert_array_equal(dt[:, :, 2], 1.0)


def test_diffusion_tensor_45_degrees():
    # oracle: rotate diag(g(mu), 1) by 45 degrees
    mu = 0.31
    st = np.zeros((2, 2, 3))
    st[:, :, 0] = mu / 2
    st[:, :, 1] = mu / 2
    st[:, :, 2] = mu / 2
    g = charbonnier(mu, KAPPA)
    r = np.array([[1, -1], [1, 1]]) / np.sqrt(2)
    oracle = r @ np.diag([g, 1.0]) @ r.T
    dt = diffusion_tensor(st, kappa=KAPPA)
    np.testing.assert_allclose(dt[0, 0], [oracle[0, 0], oracle[0, 1], oracle[1, 1]],
                               rtol=1e-12)


def test_diffusion_tensor_eigenvalues_in_unit_interval(rng):
    st = structure_tensor(rng.random((24, 24, 3)))
    dt = diffusion_tensor(st, kappa=KAPPA)
    d11, d12, d22 = dt[:, :, 0], dt[:, :, 1], dt[:, :, 2]
    tr = d11 + d22
    disc = np.sqrt((d11 - d22) ** 2 + 4 * d12 ** 2)
    hi = 0.5 * (tr + disc)
    lo = 0.5 * (tr - disc)
    assert np.all(hi <= 1 + 1e-12)
    assert np.all(lo > 0)


# --- diffusion step ----------------------------------------------------------

def _identity_field(h, w):
    dt = np.zeros((h, w, 3))
    dt[:, :, 0] = 1.0
    dt[:, :, 2] = 1.0
    return dt


def _heat_step_oracle(img, tau):
    """Independent 5-point Laplacian step with replicate-reflective boundary."""
    padded = np.pad(img, [(1, 1), (1, 1), (0, 0)], mode="edge")
    lap = (padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2]
           + padded[1:-1, 2:] - 4 * img)
    return img + tau * lap


def test_constant_image_is_fixed_point(rng):
    img = np.full((9, 11, 3), 0.37)
    st = structure_tensor(rng.random((9, 11, 3)))
    dt = diffusion_tensor(st, KAPPA)
    out = diffuse_step(img, dt, tau=0.2)
    np.testing.assert_array_equal(out, img)


def test_identity_tensor_equals_heat_step(rng):
    img = rng.random((5, 5, 1))
    out = diffuse_step(img, _identity_field(5, 5), tau=0.2)
    oracle = _heat_step_oracle(img, 0.2)
    assert np.abs(out - oracle).max() < 1e-12


def test_step_conserves_channel_means(rng):
    img = rng.random((32, 24, 3))
    dt = diffusion_tensor(structure_tensor(img), KAPPA)
    out = diffuse_step(img, dt, tau=0.2)
    for c in range(3):
        before = img[:, :, c].mean()
        after = out[:, :, c].mean()
        assert abs(after - before) <= 1e-10 * abs(before)


def test_step_rejects_bad_tau(rng):
    img = rng.random((8, 8, 1))
    dt = _identity_field(8, 8)
    for tau in (0.0, -0.1, 0.21, 1.0):
        with pytest.raises(ValueError):
            diffuse_step(img, dt, tau=tau)


def test_step_rejects_oversized_eigenvalues(rng):
    img = rng.random((8, 8, 1))
    dt = _identity_field(8, 8)
    dt[:, :, 0] = 1.5
    with pytest.raises(ValueError):
        diffuse_step(img, dt, tau=0.1)


# --- full runs ---------------------------------------------------------------

def test_zero_steps_returns_input(rng):
    img = rng.random((10, 10, 3))
    np.testing.assert_array_equal(run_eed(img, EedParams(steps=0)), img)


def test_constant_unchanged_any_steps():
    img = np.full((12, 12, 3), 0.25)
    np.testing.assert_array_equal(run_eed(img, EedParams(steps=40)), img)


def test_run_is_deterministic(rng):
    img = rng.random((16, 16, 3))
    p = EedParams(steps=25)
    np.testing.assert_array_equal(run_eed(img, p), run_eed(img, p))


def test_mean_conserved_over_run(rng):
    img = rng.random((32, 32, 3)) * 0.8 + 0.1  # margin so the final clamp is inactive
    out = run_eed(img, EedParams(steps=200))
    for c in range(3):
        assert abs(out[:, :, c].mean() - img[:, :, c].mean()) <= 1e-6 * img[:, :, c].mean()


def test_extrema_never_grow_on_structured_images():
    yy, xx = np.mgrid[0:48, 0:48]
    stripes = np.repeat((((xx + yy) // 5) % 2).astype(float)[:, :, None], 3, axis=2)
    disk = make_disk_image(48, 15)
    for img in (stripes, disk):
        p = EedParams(steps=1)
        cur = img
        for _ in range(60):
            nxt = run_eed(cur, p)
            assert nxt.max() <= cur.max() + 1e-7
            assert nxt.min() >= cur.min() - 1e-7
            cur = nxt


def test_rotation_equivariance_exact(rng):
    img = rng.random((24, 40, 3))
    p = EedParams(steps=12)
    rotated_then_run = run_eed(np.ascontiguousarray(np.rot90(img)), p)
    run_then_rotated = np.rot90(run_eed(img, p))
    np.testing.assert_array_equal(rotated_then_run, run_then_rotated)


def test_smoothing_rotation_equivariance(rng):
    img = rng.random((17, 23, 3))
    a = gaussian_smooth(np.ascontiguousarray(np.rot90(img)), 5, np.sqrt(5))
    b = np.rot90(gaussian_smooth(img, 5, np.sqrt(5)))
    np.testing.assert_array_equal(a, b)


def test_params_validation():
    with pytest.raises(ValueError):
        EedParams(kappa=0)
    with pytest.raises(ValueError):
        EedParams(presmooth_kernel_size=4)
    with pytest.raises(ValueError):
        EedParams(presmooth_sigma=-1)
    with pytest.raises(ValueError):
        EedParams(steps=-1)
    with pytest.raises(ValueError):
        EedParams(tau=0.25)
    p = EedParams()
    assert EedParams.from_dict(p.to_dict()) == p
