import numpy as np
import pytest
from scipy.special import erf

from strichartz.errors import DomainError, ResolutionError
from strichartz.extension import (
    SpaceTimeBox,
    extend,
    extend_points,
    min_resolution,
    schrodinger_evolve,
    slice_masses,
    spacetime_norm,
    strichartz_ratio,
)
from strichartz.sampling import SampledFunction
from strichartz.search import gaussian_profile, random_function


def const(d, res=256):
    return SampledFunction.from_callable(lambda *x: np.ones_like(x[0], dtype=complex), ((0, 1),) * d, res)


def exp_transform(a, x):
    # int_0^1 exp(2 pi i (a - x) xi) dxi
    w = 2j * np.pi * (a - np.asarray(x, dtype=float))
    safe = np.where(w == 0, 1, w)
    return np.where(w == 0, 1.0, (np.exp(safe) - 1) / safe)


def test_constant_at_origin_is_one():
    val = extend_points(const(2), [[0.0, 0.0]], [0.0])
    assert abs(val[0] - 1) < 1e-12


def test_constant_at_half_has_modulus_two_over_pi():
    val = extend_points(const(1, 1024), [0.5], [0.0])[0]
    assert abs(abs(val) - 2 / np.pi) < 1e-6


def test_time_zero_slice_is_fourier_transform():
    a = 0.3
    g = SampledFunction.from_callable(lambda xi: np.exp(2j * np.pi * a * xi), ((0, 1),), 2048)
    box = SpaceTimeBox(X=4, T=1, nx=64, nt=2)
    F = extend(g, box)
    y, t = box.y, box.t
    assert t[1] == 0
    np.testing.assert_allclose(F.values[:, 1], exp_transform(a, y), atol=1e-6)


def test_schrodinger_at_time_zero_is_inverse_transform():
    a = -0.2
    u0 = SampledFunction.from_callable(lambda xi: np.exp(2j * np.pi * a * xi), ((0, 1),), 2048)
    x = np.linspace(-3, 3, 13)
    u = schrodinger_evolve(u0, x, np.zeros_like(x))
    # inverse transform: int exp(2 pi i (a + x) xi) dxi
    np.testing.assert_allclose(u, exp_transform(a, -x), atol=1e-6)


def test_schrodinger_is_reflected_extension_bit_for_bit():
    g = random_function(3, "band-limited", 2, 64)
    x = np.array([[0.5, -1.0], [2.0, 0.25]])
    t = np.array([0.3, -0.7])
    assert np.array_equal(schrodinger_evolve(g, x, t), extend_points(g, -x, -t))


@pytest.mark.parametrize("d", [1, 2])
def test_mass_is_conserved(d):
    g = random_function(5, "gaussian-profile", d, 128)
    box = SpaceTimeBox(X=12, T=1, nx=128 if d == 2 else 512, nt=8)
    masses = slice_masses(g, box)
    np.testing.assert_allclose(masses, g.norm(2), rtol=1e-2)


def test_norm_of_one_on_unit_volume():
    F = SampledFunction.from_callable(lambda x, t: np.ones_like(x), ((-0.5, 0.5), (0, 1)), (16, 8))
    for q in [1, 2.5, 6]:
        assert spacetime_norm(F, q) == pytest.approx(1.0, abs=1e-14)


def test_norm_is_homogeneous():
    F = SampledFunction.from_callable(lambda x, t: np.cos(x) + 1j * t, ((-1, 1), (0, 2)), (32, 16))
    assert spacetime_norm(F.scaled(-3.5), 4) == pytest.approx(3.5 * spacetime_norm(F, 4), rel=1e-14)
    with pytest.raises(DomainError):
        spacetime_norm(F, 0.5)


def test_gaussian_norm_matches_closed_form():
    L = 3.0
    F = SampledFunction.from_callable(lambda x, t: np.exp(-np.pi * (x**2 + t**2)), ((-L, L), (-L, L)), 256)
    # int exp(-4 pi s^2) over [-L, L] is erf(2 sqrt(pi) L) / 2, once per axis
    axis = erf(2 * np.sqrt(np.pi) * L) / 2
    assert abs(spacetime_norm(F, 4) - axis ** (2 / 4)) < 1e-4


def test_norm_rejects_mismatched_box():
    box = SpaceTimeBox(X=2, T=1, nx=16, nt=8)
    F = SampledFunction.from_callable(lambda x, t: x + t, ((-2, 2), (-1, 1)), (16, 16))
    with pytest.raises(DomainError):
        spacetime_norm(F, 2, box)


def test_ratio_is_scale_invariant():
    g = random_function(2, "band-limited", 1, 256)
    box = SpaceTimeBox(X=16, T=8, nx=128, nt=64)
    r = strichartz_ratio(g, 6, box)
    assert strichartz_ratio(g.scaled(2.5 - 1j), 6, box) == pytest.approx(r, rel=1e-12)


def test_ratio_rejects_zero_and_coarse_grids():
    box = SpaceTimeBox(X=16, T=8, nx=128, nt=64)
    zero = SampledFunction.from_callable(lambda x: 0 * x, ((0, 1),), 64)
    with pytest.raises(DomainError):
        strichartz_ratio(zero, 6, box)
    coarse = random_function(0, "band-limited", 1, 32)
    with pytest.raises(ResolutionError, match="under-resolves"):
        strichartz_ratio(coarse, 6, box)
    with pytest.raises(DomainError):
        extend(SampledFunction.from_callable(lambda x: x, ((0, 2),), 64), box)


def test_min_resolution_passes_phase_check():
    box = SpaceTimeBox(X=8, T=8, nx=32, nt=8)
    K = min_resolution(box)
    g = random_function(1, "band-limited", 1, K)
    extend(g, box)
    with pytest.raises(ResolutionError):
        extend(random_function(1, "band-limited", 1, K // 2), box)


@pytest.mark.parametrize("X,nx", [(8, 64), (6, 64)])
def test_fft_matches_direct_one_dimension(X, nx):
    # X = 8 takes the exact zero-padded FFT, X = 6 the chirp-z path
    g = random_function(4, "band-limited", 1, 64)
    box = SpaceTimeBox(X=X, T=2, nx=nx, nt=8)
    a = extend(g, box, "fft").values
    b = extend(g, box, "direct").values
    assert np.max(np.abs(a - b)) < 1e-8


def test_fft_matches_direct_two_dimensions_and_points():
    g = random_function(7, "gaussian-profile", 2, 64)
    box = SpaceTimeBox(X=6, T=2, nx=32, nt=4)
    F = extend(g, box, "fft")
    assert np.max(np.abs(F.values - extend(g, box, "direct").values)) < 1e-8
    i, j, k = 5, 20, 3
    t = box.t[k]
    x = np.array([[box.y[i] + box.velocity * t, box.y[j] + box.velocity * t]])
    assert abs(extend_points(g, x, [t])[0] - F.values[i, j, k]) < 1e-8


def test_modulation_translates_extension():
    x0 = 1.5
    g = random_function(9, "band-limited", 1, 256)
    mod = g.with_values(g.values * np.exp(-2j * np.pi * x0 * g.axes[0]))
    x = np.linspace(-5, 5, 21)
    t = np.full_like(x, 0.4)
    np.testing.assert_allclose(extend_points(mod, x, t), extend_points(g, x + x0, t), atol=1e-12)
    box = SpaceTimeBox(X=16, T=4, nx=256, nt=32)
    assert strichartz_ratio(mod, 6, box) == pytest.approx(strichartz_ratio(g, 6, box), rel=1e-3)


def test_gaussian_ratio_stable_under_box_doubling():
    center, width = (0.5,), 0.2
    g = SampledFunction.from_callable(lambda xi: gaussian_profile((xi,), center, width), ((0, 1),), 512)
    box = SpaceTimeBox(X=72, T=64, nx=512, nt=512)
    r = strichartz_ratio(g, 6, box)
    big = box.doubled()
    r2 = strichartz_ratio(SampledFunction.from_callable(g.fn, g.bounds, min_resolution(big)), 6, big)
    assert np.isfinite(r) and abs(r2 - r) / r < 0.01
