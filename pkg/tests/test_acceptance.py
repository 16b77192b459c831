"""Acceptance gate: twelve end-to-end criteria at their stated tolerances.

Each criterion is a plain function returning ``(passed, detail)``. The pytest
wrappers assert on it, and a one-line PASS/FAIL verdict per criterion is
printed in the terminal summary (see ``conftest.py``). Running this file
directly prints the same lines.
"""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from swiet_relay.channel import Geometry, SystemConfig, decompose, generate_channel
from swiet_relay.experiment import SCHEMES, load_scenario, rows_to_csv, run_scenario, summarize
from swiet_relay.oracle import (
    enumerate_pairings,
    grid_power_tsr,
    grid_rho,
    sample_covariances,
)
from swiet_relay.psr import SubchannelCoefficients, optimal_log_rate, optimal_rho, rate_derivative
from swiet_relay.tsr import (
    TsrOptimizerSettings,
    alternate_power_allocation,
    g_of_alpha,
    optimal_energy_beam,
    pair_subchannels,
    search_alpha,
    tsr_rate_at_alpha,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
RESULTS: dict[int, tuple[bool, str]] = {}


def _cfg(power_dbm=30.0, k=4, n=2):
    return SystemConfig.from_db(power_dbm, num_subcarriers=k, n_source=n, n_relay=n, n_dest=n)


def _eig(cfg, seed, geo=Geometry()):
    return decompose(generate_channel(cfg, geo, seed), cfg)


def _means(rows, scheme):
    return np.array([s.mean for s in summarize(rows) if s.scheme == scheme])


# -- criteria --------------------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    exact, worst = True, 0.0
    for _ in range(100):
        a = float(10 ** rng.uniform(-2, 3))
        w = float(rng.uniform(0.01, 1.0))
        coeff = SubchannelCoefficients(a, a)
        rho = optimal_rho(coeff, w)
        exact &= rho == 0.5
        worst = max(worst, abs(grid_rho(coeff, w, 1e-5) - rho))
    dt = time.perf_counter() - t0
    return exact and worst <= 1e-4 and dt < 5, f"exact 0.5: {exact}, max grid gap {worst:.2e}, {dt:.1f} s"


def criterion_2():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(1000):
        a, q = 10 ** rng.uniform(-2, 3, size=2)
        w = float(rng.uniform(0.01, 1.0))
        coeff = SubchannelCoefficients(a, q)
        worst = max(worst, abs(optimal_rho(coeff, w) - grid_rho(coeff, w, 1e-5)))
    dt = time.perf_counter() - t0
    return worst <= 1e-4 and dt < 30, f"max |closed - grid| {worst:.2e}, {dt:.1f} s"


def criterion_3():
    t0 = time.perf_counter()
    cfg = _cfg(30, 4, 2)
    worst = -np.inf
    for t in range(50):
        real = generate_channel(cfg, Geometry(), 3000 + t)
        closed = cfg.source_power * optimal_energy_beam(decompose(real)).lambda_max
        sampled = sample_covariances(real, cfg.source_power, 10_000, seed=t)
        worst = max(worst, (sampled - closed) / closed)
    dt = time.perf_counter() - t0
    return worst <= 1e-9 and dt < 60, f"max relative excess of sampled over closed form {worst:.2e}, {dt:.1f} s"


def criterion_4():
    rng = np.random.default_rng(404)
    settings = TsrOptimizerSettings(epsilon=1e-6, max_iters=200)
    mono, conv, max_it = True, True, 0
    for t in range(100):
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, 3))
        cfg = _cfg(float(rng.uniform(0, 50)), k, n)
        geo = Geometry(phi=float(rng.uniform(0.1, 0.9)))
        res = alternate_power_allocation(float(rng.uniform(0.05, 0.95)), _eig(cfg, 4000 + t, geo), cfg, settings)
        h = np.asarray(res.history)
        mono &= bool(np.all(np.diff(h) >= 0))
        conv &= res.iterations <= 200 and (h.size < 2 or abs(h[-1] - h[-2]) <= 1e-6)
        max_it = max(max_it, res.iterations)
    gaps = []
    for t in range(20):
        k, n = (2, 1) if t % 2 else (1, 2)
        cfg = _cfg(float(rng.uniform(0, 50)), k, n)
        eig = _eig(cfg, 4500 + t, Geometry(phi=float(rng.uniform(0.1, 0.9))))
        alpha = float(rng.uniform(0.05, 0.95))
        oracle = grid_power_tsr(alpha, eig, cfg, 1e-3)[2]
        gaps.append((oracle - alternate_power_allocation(alpha, eig, cfg, settings).rate) / oracle)
    gap = max(gaps)
    ok = mono and conv and gap <= 5e-3
    return ok, f"monotone {mono}, converged {conv} (max {max_it} passes), worst KN=2 oracle gap {gap:.2e}"


def criterion_5():
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    worst = {"tsr": -np.inf, "psr": -np.inf}
    for t in range(20):
        k, n = [(3, 1), (4, 1), (2, 2)][t % 3]
        cfg = _cfg(float(rng.uniform(0, 50)), k, n)
        eig = _eig(cfg, 5000 + t, Geometry(phi=float(rng.uniform(0.1, 0.9))))
        sorted_perm = tuple(pair_subchannels(eig.lambda_s, eig.lambda_r).perm)
        for mode in worst:
            _, best, rates = enumerate_pairings(eig, cfg, mode, alpha=0.3)
            worst[mode] = max(worst[mode], (best - rates[sorted_perm]) / rates[sorted_perm])
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and dt < 300
    return ok, f"best-permutation excess tsr {worst['tsr']:.2e}, psr {worst['psr']:.2e}, {dt:.1f} s"


def criterion_6():
    alphas = np.round(np.arange(1, 50) * 0.02, 2)
    rng = np.random.default_rng(606)
    worst = np.inf
    for t in range(50):
        cfg = _cfg(float(rng.uniform(0, 50)))
        g = g_of_alpha(alphas, _eig(cfg, 6000 + t), cfg)
        worst = min(worst, float(np.min(np.diff(g))))
    return worst >= -1e-6, f"smallest step of the log2 sum along alpha {worst:.2e}"


def criterion_7():
    rng = np.random.default_rng(707)
    h = 1e-6
    worst = 0.0
    for _ in range(1000):
        a, q = 10 ** rng.uniform(-2, 2, size=2)
        w = float(rng.uniform(1e-3, 1.0))
        c = SubchannelCoefficients(a, q)
        fd = (optimal_log_rate(c, w + h) - optimal_log_rate(c, w - h)) / (2 * h)
        worst = max(worst, abs(rate_derivative(c, w) - fd))
    mono = True
    grid = np.linspace(0.0, 1.0, 1000)
    for _ in range(50):
        a, q = 10 ** rng.uniform(-2, 4, size=2)
        mono &= bool(np.all(np.diff(optimal_log_rate(SubchannelCoefficients(a, q), grid)) >= 0))
    zero = all(optimal_log_rate(SubchannelCoefficients(a, q), 0.0) == 0.0
               for a, q in 10 ** rng.uniform(-2, 4, size=(50, 2)))
    ok = worst <= 1e-6 and mono and zero
    return ok, f"max |derivative - FD| {worst:.2e}, monotone {mono}, zero at origin {zero}"


def criterion_8():
    cfg = _cfg(50, 4, 2)
    gaps = []
    for t in range(50):
        eig = _eig(cfg, 8000 + t, Geometry(phi=0.3))
        r1 = search_alpha(eig, cfg, method="alternate").rate
        r2 = search_alpha(eig, cfg, method="highsnr").rate
        gaps.append(abs(r1 - r2) / r1)
    mean_gap = float(np.mean(gaps))
    return mean_gap <= 0.02, f"mean high-SNR gap {mean_gap:.2e} (max {max(gaps):.2e})"


def criterion_9():
    t0 = time.perf_counter()
    sc = load_scenario(SCENARIOS / "power_sweep.txt")
    rows = run_scenario(sc)
    dt = time.perf_counter() - t0
    incr = all(bool(np.all(np.diff(_means(rows, s)) > 0)) for s in SCHEMES)
    psr, tsr1, simple = (_means(rows, s) for s in ("optimized_psr", "optimized_tsr_1", "simple_tsr"))
    order = bool(np.all(psr >= tsr1) and np.all(tsr1 >= simple))
    band = [r.alpha_star for r in rows if r.scheme == "optimized_tsr_1" and 30 <= r.sweep_value <= 40]
    alpha = float(np.mean(band))
    ok = incr and order and 0.24 <= alpha <= 0.44 and dt < 600
    return ok, f"increasing {incr}, PSR >= TSR-I >= simple TSR {order}, mean alpha* {alpha:.3f}, {dt:.0f} s"


def _describe(vals):
    return "[" + ", ".join(f"{v / 1e6:.3f}" for v in vals) + "] Mbit/s"


def criterion_10():
    t0 = time.perf_counter()
    barrier = run_scenario(load_scenario(SCENARIOS / "placement_barrier.txt"))
    line = run_scenario(load_scenario(SCENARIOS / "placement_line.txt"))
    dt = time.perf_counter() - t0
    barrier_ok = all(bool(np.all(np.diff(_means(barrier, s)) <= 0)) for s in SCHEMES)
    psr = _means(line, "optimized_psr")
    tsr = _means(line, "optimized_tsr_1")
    psr_ok = bool(np.all(np.diff(psr) <= 0))
    tsr_ok = tsr[0] > tsr.min() and tsr[-1] > tsr.min()
    ok = barrier_ok and psr_ok and tsr_ok and dt < 600
    detail = (f"h=25 all non-increasing {barrier_ok} (PSR {_describe(_means(barrier, 'optimized_psr'))}); "
              f"h=0 PSR non-increasing {psr_ok} ({_describe(psr)}); "
              f"h=0 TSR interior minimum {tsr_ok}; {dt:.0f} s")
    return ok, detail


def criterion_11():
    ants = run_scenario(load_scenario(SCENARIOS / "antenna_sweep.txt"))
    subs_sc = load_scenario(SCENARIOS / "subcarrier_sweep.txt")
    subs = run_scenario(subs_sc)
    k = np.asarray(subs_sc.values)
    n_ok = all(bool(np.all(np.diff(_means(ants, s)) > 0)) for s in SCHEMES)
    k_inc, k_dim, raw_dim, bad = True, True, True, []
    for s in SCHEMES:
        m = _means(subs, s)
        # non-uniform K grid: compare slopes (divided differences)
        slopes = np.diff(m) / np.diff(k)
        inc = bool(np.all(np.diff(m) > 0))
        dim = bool(np.all(np.diff(slopes) <= 0))
        k_inc &= inc
        k_dim &= dim
        raw_dim &= bool(np.all(np.diff(m, 2) <= 0))
        if not (inc and dim):
            bad.append(f"{s} {_describe(m)}")
    ok = n_ok and k_inc and k_dim
    detail = (f"increasing in N {n_ok}, increasing in K {k_inc}, diminishing slope in K {k_dim} "
              f"(index-wise second differences non-positive: {raw_dim})")
    if bad:
        detail += "; off-trend: " + "; ".join(bad)
    return ok, detail


def criterion_12():
    cfg = _cfg(30)
    eig = _eig(cfg, 12)
    ends = tsr_rate_at_alpha(0.0, eig, cfg) == 0.0 and tsr_rate_at_alpha(1.0, eig, cfg) == 0.0
    sc = replace(load_scenario(SCENARIOS / "smoke.txt"), schemes=SCHEMES)
    same = rows_to_csv(run_scenario(sc)) == rows_to_csv(run_scenario(sc))
    return ends and same, f"zero at alpha in (0, 1): {ends}, byte-identical CSV: {same}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


def verdict_line(idx: int, passed: bool, detail: str) -> str:
    return f"[{'PASS' if passed else 'FAIL'}] criterion {idx:2d}: {detail}"


@pytest.mark.acceptance
@pytest.mark.parametrize("idx", range(1, len(CRITERIA) + 1))
def test_criterion(idx):
    passed, detail = CRITERIA[idx - 1]()
    RESULTS[idx] = (passed, detail)
    print(verdict_line(idx, passed, detail))
    assert passed, detail


if __name__ == "__main__":
    for i, fn in enumerate(CRITERIA, 1):
        print(verdict_line(i, *fn()), flush=True)
