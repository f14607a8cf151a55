"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The experiment settings come from the shipped files in ``configs/`` so the
suite and the command line check the same thing.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest

from strichartz.cli import load_config
from strichartz.experiments import EXPERIMENTS
from strichartz.model import (
    ModelTruncation,
    model_norm,
    model_operator,
    model_operator_bruteforce,
    model_pairs,
    time_cells,
    trilinear_form,
)
from strichartz.sampling import SampledFunction
from strichartz.search import random_function

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, elapsed, limit, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}; runtime {elapsed:.1f}s < {limit}s"
        with capsys.disabled():
            print("\n" + line)
    return emit


def run(config):
    name, cfg = load_config(CONFIGS / config)
    t0 = time.perf_counter()
    res = EXPERIMENTS[name](cfg)
    return res, cfg, time.perf_counter() - t0


@pytest.mark.acceptance
def test_1_whitney_geometry(report):
    res, cfg, dt = run("verify-whitney.toml")
    s = res.summary
    assert cfg["max_scale"] == 8
    ok = (not s["overlapping"] and s["min_multiplicity"] == 1 and s["max_multiplicity"] == 1
          and set(s["gap_ratios"]) <= {1.0, 2.0} and s["split_classes"] <= 4 and s["split_functional"] and dt < 5)
    report(1, "Whitney geometry", ok, dt, 5,
           f"{s['rectangles']} rectangles, {len(s['overlapping'])} overlaps, multiplicity "
           f"[{s['min_multiplicity']}, {s['max_multiplicity']}] on {s['lattice_points']} points, "
           f"gap ratios {s['gap_ratios']}, {s['split_classes']} classes")
    assert ok


@pytest.mark.acceptance
def test_2_packet_analysis(report):
    res, cfg, dt = run("verify-bessel.toml")
    s = res.summary
    recon = dict(res.tables["reconstruction"][1])
    assert cfg["seeds"] == 50 and 64 in recon
    ok = recon[64] <= 1e-6 and s["max_bessel_ratio"] <= 1 + 1e-4 and s["max_parseval_gap"] <= 1e-6 and dt < 60
    report(2, "packet analysis", ok, dt, 60,
           f"reconstruction error {recon[64]:.3e} at N=64, worst Bessel ratio {s['max_bessel_ratio']:.12f} "
           f"over {cfg['seeds']} seeds, Parseval gap {s['max_parseval_gap']:.2e}")
    assert ok


@pytest.mark.acceptance
def test_3_bilinear_uniformity(report):
    res, cfg, dt = run("verify-prop31.toml")
    s = res.summary
    assert cfg["seeds"] == 20 and (cfg["k_min"], cfg["k_max"]) == (2, 6)
    ks = sorted({r[1] for r in res.tables["sums"][1]})
    assert ks == [2, 3, 4, 5, 6]
    ok = s["max_growth"] <= 3 and s["max_relative_change"] <= 1e-4 and dt < 600
    report(3, "bilinear sum uniformity", ok, dt, 600,
           f"max R(k)/R(2) {s['max_growth']:.4f}, max doubling change {s['max_relative_change']:.2e}, "
           f"Bessel ratio {s['max_bessel_ratio']:.12f}")
    assert ok


@pytest.mark.acceptance
@pytest.mark.parametrize("config,d,q", [("strichartz-scan-d1.toml", 1, 6.0), ("strichartz-scan-d2.toml", 2, 4.5)])
def test_4_strichartz_ratios(report, config, d, q):
    res, cfg, dt = run(config)
    assert (cfg["d"], cfg["q"], cfg["seeds"]) == (d, q, 100)
    _, rows = res.tables["ratios"]
    assert len(rows) == 100
    finite = all(math.isfinite(v) for r in rows for v in (r[1], r[2], r[3]))
    box = max(r[5] for r in rows)
    grid = max(r[6] for r in rows)
    ok = finite and box < 0.02 and grid < 0.02 and dt < 1800
    s = res.summary
    report(4, f"Strichartz ratios d={d} q={q}", ok, dt, 1800,
           f"all finite {finite}, max box change {box:.2e}, max grid change {grid:.2e}, "
           f"max seeded ratio {s['max_ratio']:.4f}, ascent value {s.get('ascent_value', float('nan')):.4f}")
    assert ok


@pytest.mark.acceptance
def test_5_model_decay(report):
    # there are no close pairs at scale one, so that operator vanishes identically
    assert model_pairs(1) == []
    tr = ModelTruncation(N=4, X=8, T=2, nx=32, nt=8)
    f = random_function(0, "band-limited", 2, 64)
    n1 = model_norm(model_operator(f, f, 1, 1, trunc=tr), 10 / 3)
    assert n1 == 0

    res, cfg, dt = run("model-decay.toml")
    assert cfg["k_values"] == [2, 3, 4] and (cfg["sharp_k"], cfg["sharp"]) == (2, 2)
    norms = [v for _, v, _ in res.tables["decay"][1]]
    slope = res.summary["fit_slope"]
    sharp = res.summary["sharp_norm"]
    nonincreasing = all(b <= a for a, b in zip(norms, norms[1:]))
    ok = nonincreasing and slope <= -0.05 and sharp <= norms[0] and dt < 3600
    report(5, "model operator decay", ok, dt, 3600,
           f"N(1) = {n1}, N(2..4) = {[round(v, 5) for v in norms]}, fit slope {slope:.3f}, "
           f"offset-2 norm {sharp:.5f} vs {norms[0]:.5f}")
    assert ok


@pytest.mark.acceptance
def test_6_level_sets(report):
    res, cfg, dt = run("levelsets.toml")
    assert cfg["k_max"] <= 3
    s = res.summary
    lemma = max(s["constants"][k] for k in ("lemma_1", "lemma_2", "lemma_3", "lemma_4"))
    counts = (s["constants"]["count_square"], s["constants"]["count_linear"])
    product = next(c for c in res.checks if c.name == "product_bound").passed
    ok = s["nonempty_instances"] > 0 and lemma <= 4 and all(math.isfinite(c) for c in counts) and product and dt < 1200
    report(6, "level-set diagnostics", ok, dt, 1200,
           f"{s['nonempty_instances']} nonempty instances, worst lemma constant {lemma:.4f}, "
           f"counting constants {counts[0]:.3e} / {counts[1]:.3e}")
    assert ok


@pytest.mark.acceptance
def test_7_coefficient_decay(report):
    res, cfg, dt = run("coeff-decay.toml")
    assert (cfg["u_min"], cfg["u_max"], cfg["t_minus_m"]) == (8, 32, 0.5)
    slope = res.summary["loglog_slope"]
    ok = slope <= -4 and dt < 60
    report(7, "coefficient decay", ok, dt, 60, f"log-log slope {slope:.3f}")
    assert ok


@pytest.mark.acceptance
def test_8_oracle_equivalence(report):
    t0 = time.perf_counter()
    tr = ModelTruncation(N=6, X=16, T=2, nx=64, nt=16)
    f = random_function(1, "indicator-smooth", 2, 128)
    g = random_function(2, "band-limited", 2, 128)
    worst_oracle = 0.0
    for sharp in (0, 2):
        F = model_operator(f, g, 2, 2, sharp, tr)
        rng = np.random.default_rng([8, sharp])
        idx = rng.integers(0, tr.nx + 1, size=(12, 2))
        ts = rng.uniform(-tr.T, tr.T, 12)
        pts = np.column_stack([tr.x[idx[:, 0]], tr.x[idx[:, 1]], ts])
        slow = model_operator_bruteforce(f, g, 2, 2, pts, tr, sharp=sharp)
        rows = [list(F.m_values).index(int(np.floor(t))) for t in ts]
        fast = np.array([F.values[r, i, j] for r, (i, j) in zip(rows, idx)])
        assert np.max(np.abs(slow)) > 1e-6
        worst_oracle = max(worst_oracle, float(np.max(np.abs(fast - slow))))

    # duality: the form equals the sampled pairing of the operator with H
    F = model_operator(f, g, 2, 2, trunc=tr)
    bounds = ((-tr.X, tr.X),) * 2 + ((-tr.T, tr.T),)
    base = SampledFunction.from_callable(lambda x, y, t: np.exp(-(x**2 + y**2) / 50) * np.cos(t),
                                         bounds, (tr.nx, tr.nx, 4 * tr.nt))
    H = base.with_values(np.conj(F.sampled(base.axes[2])) * 1e4 + base.values)
    W = np.multiply.outer(tr.x_weights, tr.x_weights)
    direct = sum(L * np.sum(W * v * np.conj(h)) for L, v, h in zip(F.m_lengths, F.values, time_cells(H, tr)))
    lam = trilinear_form(f, g, H, 2, 2, tr)
    dual = abs(lam - direct)
    dt = time.perf_counter() - t0
    ok = worst_oracle <= 1e-10 and dual <= 1e-8 and abs(lam) > 1e-3 and dt < 300
    report(8, "oracle equivalence", ok, dt, 300,
           f"sup difference from brute force {worst_oracle:.2e}, duality gap {dual:.2e} on |form| {abs(lam):.3e}")
    assert ok
