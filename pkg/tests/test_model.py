import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from strichartz.bumps import BumpSpec, packet_freq
from strichartz.dyadic import ClosePair, interval
from strichartz.errors import DomainError
from strichartz.extension import extend
from strichartz.model import (
    ZERO_LEVEL,
    ModelTruncation,
    bilinear_product,
    counting_norms,
    dyadic_level,
    indicator_triple,
    level_set_report,
    model_norm,
    model_operator,
    model_operator_bruteforce,
    model_pairs,
    prop31_ratio,
    prop31_sum,
    prop31_truncation,
    time_cells,
    trilinear_form,
)
from strichartz.sampling import SampledFunction
from strichartz.search import random_function

TR = ModelTruncation(N=6, X=16, T=2, nx=64, nt=16)
F1 = random_function(1, "indicator-smooth", 2, 128)
G1 = random_function(2, "band-limited", 2, 128)
ONE = lambda x: np.ones_like(np.asarray(x, dtype=float))
C0 = 0.37339839761765  # baseline ratio for h = 1 on ([0, 1/4], [1/2, 3/4]), brute-force checked below


def smooth_H(trunc):
    fn = lambda x, y, t: np.exp(-(x**2 + y**2) / 50) * np.cos(t) + 1j * np.sin(x * t / 5)
    bounds = ((-trunc.X, trunc.X),) * 2 + ((-trunc.T, trunc.T),)
    return SampledFunction.from_callable(fn, bounds, (trunc.nx, trunc.nx, 4 * trunc.nt))


def zero2(res=128):
    return SampledFunction.from_callable(lambda x, y: 0j * x, ((0, 1), (0, 1)), res)


def field_at(F, idx, ts):
    rows = [list(F.m_values).index(int(np.floor(t))) for t in ts]
    return np.array([F.values[r, i, j] for r, (i, j) in zip(rows, idx)])


def test_model_pairs_counts():
    assert model_pairs(0) == [] and model_pairs(1) == []
    assert len(model_pairs(2)) == 2
    for k in range(3, 7):
        assert len(model_pairs(k)) == 2**k - 2
        assert all(p.offset == 2 for p in model_pairs(k))


def test_truncation_time_cells():
    tr = ModelTruncation(N=4, X=4, T=2, nx=16, nt=8)
    assert list(tr.m_values) == [-2, -1, 0, 1]
    np.testing.assert_allclose(tr.m_lengths, 1.0)
    with pytest.raises(DomainError):
        ModelTruncation(N=4, X=4, T=2, nx=16, nt=6)


def test_bilinear_product_is_pointwise():
    from strichartz.extension import SpaceTimeBox

    box = SpaceTimeBox(X=4, T=1, nx=16, nt=4)
    f = random_function(3, "band-limited", 2, 32)
    P = bilinear_product(f, f, box)
    np.testing.assert_allclose(P.values, extend(f, box).values ** 2, rtol=1e-13)
    assert np.all(bilinear_product(zero2(32), f, box).values == 0)
    # Cauchy-Schwarz on samples: ||E f E g||_2 <= ||E f||_4 ||E g||_4
    g = random_function(4, "gaussian-profile", 2, 32)
    lhs = bilinear_product(f, g, box).norm(2)
    assert lhs <= extend(f, box).norm(4) * extend(g, box).norm(4) * (1 + 1e-12)


def test_model_operator_zero_inputs():
    assert np.all(model_operator(zero2(), G1, 2, 2, trunc=TR).values == 0)
    assert np.all(model_operator(F1, zero2(), 2, 2, trunc=TR).values == 0)
    # no close pairs below scale two
    assert np.all(model_operator(F1, G1, 1, 2, trunc=TR).values == 0)


def test_model_operator_is_linear():
    F2 = random_function(5, "gaussian-profile", 2, 128)
    s = F1.with_values(F1.values + 2j * F2.values)
    lhs = model_operator(s, G1, 2, 2, trunc=TR).values
    rhs = model_operator(F1, G1, 2, 2, trunc=TR).values + 2j * model_operator(F2, G1, 2, 2, trunc=TR).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(lhs)))


@pytest.mark.parametrize("sharp", [0, 2])
def test_model_operator_matches_bruteforce(sharp):
    F = model_operator(F1, G1, 2, 2, sharp, TR)
    rng = np.random.default_rng(sharp)
    idx = rng.integers(0, TR.nx + 1, size=(5, 2))
    ts = rng.uniform(-TR.T, TR.T, 5)
    pts = np.column_stack([TR.x[idx[:, 0]], TR.x[idx[:, 1]], ts])
    bf = model_operator_bruteforce(F1, G1, 2, 2, pts, TR, sharp=sharp)
    fast = field_at(F, idx, ts)
    assert np.max(np.abs(bf)) > 1e-6
    assert np.max(np.abs(fast - bf)) <= 1e-10


def test_model_operator_stable_in_N():
    tr = ModelTruncation(N=16, X=16, T=2, nx=64, nt=16)
    a = model_operator(F1, G1, 2, 2, trunc=tr).values
    b = model_operator(F1, G1, 2, 2, trunc=tr.with_N(32)).values
    assert np.max(np.abs(a - b)) < 1e-4 * np.max(np.abs(b))


def test_sharp_offset_not_larger():
    q = 2 + 8 * 0.125 / 0.75
    n0 = model_norm(model_operator(F1, G1, 2, 2, 0, TR), q)
    n2 = model_norm(model_operator(F1, G1, 2, 2, 2, TR), q)
    assert 0 < n2 <= n0


def test_trilinear_duality():
    F = model_operator(F1, G1, 2, 2, trunc=TR)
    # pairing T~ against its own conjugate makes the form a squared norm
    base = smooth_H(TR)
    H = base.with_values(np.conj(F.sampled(base.axes[2])) * 1e4 + base.values)
    Hm = time_cells(H, TR)
    W = np.multiply.outer(TR.x_weights, TR.x_weights)
    direct = sum(L * np.sum(W * v * np.conj(h)) for L, v, h in zip(F.m_lengths, F.values, Hm))
    lam = trilinear_form(F1, G1, H, 2, 2, TR)
    assert abs(lam) > 1e-3
    assert abs(lam - direct) <= 1e-8 and abs(lam - direct) <= 1e-10 * abs(lam)
    assert trilinear_form(F1, G1, H.scaled(0), 2, 2, TR) == 0


def test_trivial_estimate_on_indicators():
    tr = ModelTruncation(N=8, X=8, T=2, nx=64, nt=16)
    worst = 0.0
    for seed in range(3):
        f, g, H, meas = indicator_triple(seed, tr)
        lam = trilinear_form(f, g, H, 2, 2, tr)
        worst = max(worst, abs(lam) / (meas["E1"] * meas["E2"] * meas["F"]))
    assert 0 < worst <= 10


def test_time_cells_require_integer_nodes():
    tr = ModelTruncation(N=4, X=4, T=2, nx=16, nt=8)
    bad = SampledFunction.from_callable(lambda x, y, t: x + t, ((-4, 4), (-4, 4), (-2.5, 2.5)), (16, 16, 8))
    with pytest.raises(DomainError):
        time_cells(bad, tr)
    ones = SampledFunction.from_callable(lambda x, y, t: 1 + 0 * x, ((-4, 4), (-4, 4), (-2, 2)), (16, 16, 8))
    np.testing.assert_allclose(time_cells(ones, tr), 1.0, atol=1e-14)


# the one-dimensional sum


def brute_prop31(h1, h2, pair, N, M, spec=BumpSpec()):
    total = 0.0
    for m in range(-M, M + 1):
        c = []
        for h, I in [(h1, pair.first), (h2, pair.second)]:
            pk0 = packet_freq(I, 0, spec)
            (lo, hi), = pk0.support
            xi = np.linspace(lo, hi, 8001)
            hv = h(xi) * np.exp(-2j * np.pi * m * xi**2)
            c.append(np.array([trapezoid(hv * np.conj(packet_freq(I, n, spec)(xi)), xi) for n in range(-N, N + 1)]))
        total += float(np.sum(np.abs(c[0]) ** 2 * np.abs(c[1]) ** 2))
    return total


def test_prop31_matches_bruteforce():
    pair = ClosePair(interval(2, 0), interval(2, 2))
    h2 = random_function(8, "band-limited", 1, 256).fn
    for a, b in [(ONE, ONE), (ONE, h2)]:
        fast = prop31_sum(a, b, pair, 10, 6)
        slow = brute_prop31(a, b, pair, 10, 6)
        assert fast == pytest.approx(slow, rel=1e-8)


def test_prop31_baseline_constant():
    pair = ClosePair(interval(2, 0), interval(2, 2))
    N, M = prop31_truncation(2)
    r = prop31_ratio(ONE, ONE, pair, N, M)
    assert r == pytest.approx(C0, rel=1e-6)


def test_prop31_zero_and_swap():
    pair = ClosePair(interval(3, 2), interval(3, 4))
    zero = lambda x: 0 * np.asarray(x, dtype=float)
    h1 = random_function(1, "band-limited", 1, 256).fn
    h2 = random_function(2, "gaussian-profile", 1, 256).fn
    assert prop31_sum(zero, h2, pair, 20, 20) == 0
    swapped = ClosePair(pair.second, pair.first)
    assert prop31_sum(h1, h2, pair, 20, 30) == pytest.approx(prop31_sum(h2, h1, swapped, 20, 30), rel=1e-12)
    with pytest.raises(DomainError):
        prop31_sum(h1, h2, pair, 0, 5)


def test_prop31_monotone_and_stable():
    pair = ClosePair(interval(3, 2), interval(3, 4))
    h1 = random_function(3, "band-limited", 1, 256).fn
    h2 = random_function(4, "band-limited", 1, 256).fn
    N, M = prop31_truncation(3)
    vals = [prop31_sum(h1, h2, pair, n, m) for n, m in [(N // 4, M // 4), (N // 2, M // 2), (N, M)]]
    assert vals[0] <= vals[1] * (1 + 1e-12) and vals[1] <= vals[2] * (1 + 1e-12)
    r = prop31_sum(h1, h2, pair, N, M, details=True)
    assert r.bessel_ratio <= 1 + 1e-4
    assert abs(prop31_sum(h1, h2, pair, 2 * N, 2 * M) - r.value) < 1e-4 * r.value


# level sets


def test_dyadic_level_bins():
    v = np.array([1.0, 0.75, 0.5, 0.3, 2.0, 3.0, 0.0])
    np.testing.assert_array_equal(dyadic_level(v)[:-1], [0, 0, 1, 1, -1, -2])
    assert dyadic_level(v)[-1] == ZERO_LEVEL
    q = np.abs(np.random.default_rng(0).normal(size=1000)) + 1e-9
    lev = dyadic_level(q)
    assert np.all((2.0 ** (-lev - 1) < q) & (q <= 2.0 ** (-lev)))


def test_counting_norms_small_sets():
    assert counting_norms([]) == (0, 0)
    assert counting_norms([[1, 2, 0, 0, 1, 1, 0]]) == (1, 1)
    members = [[0, 0, 0, 0, 0, 0, 0], [1, 0, 0, 1, 0, 0, 0], [0, 1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 0]]
    assert counting_norms(members) == (2, 2)


def test_counting_norm_product_bound():
    rng = np.random.default_rng(1)
    for _ in range(20):
        members = np.unique(rng.integers(0, 3, size=(40, 7)), axis=0)
        first, second = counting_norms(members)
        outer_first = len(np.unique(members[:, [1, 2, 4]], axis=0))
        outer_second = len(np.unique(members[:, [0, 2, 5]], axis=0))
        assert len(members) <= first * outer_first
        assert len(members) <= second * outer_second


def test_level_set_report_zero_inputs():
    tr = ModelTruncation(N=4, X=8, T=2, nx=32, nt=8)
    Hz = SampledFunction.from_callable(lambda x, y, t: 0j * x, ((-8, 8), (-8, 8), (-2, 2)), (32, 32, 32))
    r = level_set_report(zero2(64), zero2(64), Hz, 2, 2, tr)
    assert r.x_total == 0 and r.x_bins == []
    assert all(v == [] for v in r.levels.values())
    empty = level_set_report(zero2(64), zero2(64), Hz, 1, 1, tr)
    assert empty.x_total == 0


def test_level_set_report_constants():
    tr = ModelTruncation(N=6, X=8, T=2, nx=64, nt=16)
    f, g, H, meas = indicator_triple(0, tr)
    r = level_set_report(f, g, H, 2, 3, tr, measures=meas)
    assert r.x_total > 0
    for key in ["lemma_1", "lemma_2", "lemma_3", "lemma_4"]:
        assert 0 < r.constants[key] <= 4
    assert sum(b["count"] for b in r.x_bins) == r.x_total
    assert abs(r.lam - trilinear_form(f, g, H, 2, 3, tr)) < 1e-12
    back = json.loads(r.to_json())
    assert back["k1"] == 2 and back["constants"]["lemma_1"] == r.constants["lemma_1"]
