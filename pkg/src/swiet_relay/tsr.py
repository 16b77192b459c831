"""Time-switching relaying (TSR) optimizer.

The period is split into an energy phase of length ``alpha`` followed by two
information phases of length ``(1 - alpha)/2``. The optimizer proceeds in
three decoupled steps: rank-one energy beamforming on the strongest
eigenmode, sorted subchannel pairing, then a grid search over ``alpha`` with
an inner source/relay power allocation.

Inside the allocation routines each subchannel pair ``l`` is described by two
per-unit SNRs: ``snr_s[l] = P_S * lambda_s[l] / sigma_R^2`` (first hop, per
unit of source allocation ``omega``) and ``snr_r[l] = P_R * lambda_r[l2] /
sigma_D^2`` (second hop of the paired subchannel, per unit of relay
allocation ``varpi``). Pair arrays are indexed by the first-hop subchannel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .channel import EigenChannel, Pairing, SystemConfig

__all__ = [
    "SolverError",
    "TsrOptimizerSettings",
    "TsrSolution",
    "EnergyBeam",
    "PowerAllocation",
    "optimal_energy_beam",
    "relay_power_budget",
    "pair_subchannels",
    "tsr_pair_rate",
    "conditional_omega",
    "conditional_varpi",
    "budget_multiplier",
    "alternate_power_allocation",
    "highsnr_power_allocation",
    "search_alpha",
    "tsr_rate_at_alpha",
    "g_of_alpha",
    "alpha_grid",
]


class SolverError(RuntimeError):
    """Raised when a multiplier search cannot bracket the unit budget."""


@dataclass(frozen=True)
class TsrOptimizerSettings:
    """Numerical knobs of the TSR optimizer.

    ``epsilon`` is the stopping threshold (bit/s) on the change of the rate
    between two passes of the alternating allocation.
    ``restarts`` adds that many random (Dirichlet) initializations on top of
    the uniform one and keeps the best result.
    """

    alpha_step: float = 0.01
    epsilon: float = 1e-6
    max_iters: int = 200
    multiplier_tolerance: float = 1e-10
    restarts: int = 0
    restart_seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha_step < 1:
            raise ValueError("alpha_step must lie in (0, 1)")
        if self.epsilon <= 0 or self.max_iters < 1 or self.multiplier_tolerance <= 0:
            raise ValueError("epsilon, max_iters and multiplier_tolerance must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")


class EnergyBeam(NamedTuple):
    subcarrier: int
    vector: np.ndarray
    lambda_max: float


class PowerAllocation(NamedTuple):
    """Result of an inner allocation for a fixed ``alpha``.

    ``omega`` is indexed by first-hop subchannel, ``varpi`` by second-hop
    subchannel. ``history`` lists the objective (bit/s) after every pass.
    """

    omega: np.ndarray
    varpi: np.ndarray
    rate: float
    history: tuple = ()
    iterations: int = 0


@dataclass(frozen=True)
class TsrSolution:
    alpha: float
    omega: np.ndarray
    varpi: np.ndarray
    pairing: Pairing
    beam_subcarrier: int
    beam_vector: np.ndarray
    relay_power: float
    rate: float
    method: str = "alternate"
    rate_curve: np.ndarray = field(default=None, repr=False)


# -- energy transfer ---------------------------------------------------------

def optimal_energy_beam(eig: EigenChannel) -> EnergyBeam:
    """Subcarrier and right-singular vector that maximize harvested power.

    All source power goes along the dominant right-singular vector of the
    subcarrier with the largest top singular value (lowest index on ties).
    """
    top = eig.sv_s[:, 0]
    c = int(np.argmax(top))
    v = eig.vh_s[c][0].conj().copy()
    return EnergyBeam(c, v, float(top[c] ** 2))


def relay_power_budget(alpha: float, lambda_max: float, config: SystemConfig) -> float:
    """Relay transmit power available after harvesting for a fraction ``alpha``."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1); the information phase vanishes at alpha = 1")
    return 2.0 * alpha / (1.0 - alpha) * config.harvester_efficiency * config.source_power * lambda_max


# -- pairing -------------------------------------------------------------------

def pair_subchannels(lambda_s, lambda_r) -> Pairing:
    """Match subchannels of equal descending rank across the two hops."""
    lambda_s = np.asarray(lambda_s, dtype=float)
    lambda_r = np.asarray(lambda_r, dtype=float)
    if lambda_s.shape != lambda_r.shape:
        raise ValueError("gain vectors must have equal length")
    order_s = np.argsort(-lambda_s, kind="stable")
    order_r = np.argsort(-lambda_r, kind="stable")
    perm = np.empty(lambda_s.size, dtype=np.intp)
    perm[order_s] = order_r
    return Pairing(perm)


# -- rates -----------------------------------------------------------------------

def _bandwidth_factor(config: SystemConfig) -> float:
    k = config.num_subcarriers
    return config.bandwidth_hz / (2 * k) if config.tsr_inner_half else config.bandwidth_hz / k


def _af_log2(x, y):
    """``log2(1 + x*y/(1 + x + y))`` evaluated as a product of factors."""
    return np.log2((1.0 + x) * (1.0 + y) / (1.0 + x + y))


def tsr_pair_rate(omega_l, varpi_l, lambda_s, lambda_r, relay_power, config: SystemConfig):
    """Information rate (bit/s) of one subchannel pair during the TSR phases."""
    x = config.source_power * np.asarray(omega_l) * np.asarray(lambda_s) / config.noise_var_relay
    y = relay_power * np.asarray(varpi_l) * np.asarray(lambda_r) / config.noise_var_dest
    return _bandwidth_factor(config) * _af_log2(x, y)


# -- conditional (KKT) updates --------------------------------------------------------

def _kkt_alloc(own, other, mu):
    """Maximizer of ``ln((1+x)(1+y)/(1+x+y)) - mu*alloc`` with ``x = own*alloc``.

    ``other`` is the fixed SNR ``y`` of the opposite hop. Written so that a
    zero ``other`` gives exactly zero without dividing by it.
    """
    own = np.asarray(own, dtype=float)
    other = np.asarray(other, dtype=float)
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = own / mu
        ry = np.sqrt(other)
        u = 2.0 * t * ry / (ry + np.sqrt(other + 4.0 * t))
        alloc = np.where(own > 0, np.maximum(u - 1.0, 0.0) / own, 0.0)
    return np.nan_to_num(alloc, nan=0.0, posinf=0.0)


def conditional_omega(varpi, mu, snr_s, snr_r):
    """Source allocation maximizing the rate for fixed relay allocation.

    ``mu`` is the multiplier of the source budget, in natural-log rate per
    unit of ``omega``.
    """
    return _kkt_alloc(snr_s, np.asarray(snr_r) * np.asarray(varpi), mu)


def conditional_varpi(omega, nu, snr_s, snr_r):
    """Relay allocation maximizing the rate for fixed source allocation."""
    return _kkt_alloc(snr_r, np.asarray(snr_s) * np.asarray(omega), nu)


def _alloc_slope(own, other, mu):
    """KKT allocation per row and the derivative of its sum in ``ln(mu)``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = own / mu[:, None]
        root = np.sqrt(other + 4.0 * t)
        ry = np.sqrt(other)
        u = 2.0 * t * ry / (ry + root)
        on = (own > 0) & (u > 1.0)
        alloc = np.where(on, (u - 1.0) / own, 0.0)
        slope = -np.where(on, ry / root, 0.0).sum(axis=1) / mu
    return np.nan_to_num(alloc, nan=0.0, posinf=0.0), slope


def budget_multiplier(own, other, tol=1e-10, max_steps=400):
    """Multiplier per row such that the KKT allocation uses the unit budget.

    ``own`` is the per-unit SNR of the hop being allocated and ``other`` the
    fixed SNR of the opposite hop, both of shape ``(m, n)`` (or ``(n,)`` for
    a single row). Returns the allocation and the multiplier per row; the
    search stops once the allocation sum is within ``tol`` of one and the
    allocation is then rescaled onto the budget. The bracket is analytic:
    the largest zero-allocation marginal gives an empty allocation, the
    largest unit-allocation marginal at least a full one. Newton steps in
    ``ln(mu)`` are taken when they stay inside the bracket, geometric
    bisection otherwise. Rows where no allocation helps (every ``other``
    zero) return zeros.
    """
    other = np.asarray(other, dtype=float)
    if other.ndim == 1:
        alloc, mu = budget_multiplier(np.atleast_2d(own), other[None, :], tol, max_steps)
        return alloc[0], float(mu[0])
    own = np.broadcast_to(np.asarray(own, dtype=float), other.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        # marginal ln-rate at alloc = 0 and alloc = 1
        d0 = np.where(own > 0, own * other / (1.0 + other), 0.0)
        d1 = np.where(own > 0, own * other / ((1.0 + own) * (1.0 + own + other)), 0.0)
    hi = d0.max(axis=1)
    lo = d1.max(axis=1)
    live = hi > 0
    alloc = np.zeros(other.shape)
    mu = np.zeros(other.shape[0])
    if not live.any():
        return alloc, mu
    rows = np.flatnonzero(live)
    o, y, lo, hi = own[rows], other[rows], lo[rows], hi[rows]
    best = np.zeros(o.shape)
    cur = np.sqrt(lo * hi)
    open_ = np.ones(rows.size, dtype=bool)
    for _ in range(max_steps):
        if not open_.any():
            break
        idx = np.flatnonzero(open_)
        m = cur[idx]
        a, slope = _alloc_slope(o[idx], y[idx], m)
        s = a.sum(axis=1)
        over = s > 1.0
        lo[idx[over]] = m[over]
        hi[idx[~over]] = m[~over]
        done = np.abs(s - 1.0) <= tol
        best[idx] = a
        cur[idx] = m
        flat = hi[idx] <= lo[idx] * (1.0 + 1e-15)
        open_[idx[done | flat]] = False
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = m * np.exp(-(s - 1.0) / slope)
        inside = np.isfinite(step) & (step > lo[idx]) & (step < hi[idx])
        cur[idx] = np.where(inside, step, np.sqrt(lo[idx] * hi[idx]))
        # keep the accepted multiplier for finished rows
        cur[idx[done | flat]] = m[done | flat]
    else:
        raise SolverError("multiplier bisection did not converge")
    # spend the sliver left at the stop (or by cancellation when stuck)
    total = best.sum(axis=1, keepdims=True)
    alloc[rows] = np.where(total > 0, best / np.where(total > 0, total, 1.0), best)
    mu[rows] = cur
    return alloc, mu


def _objective(x, y, scale):
    return scale * _af_log2(x, y).sum(axis=-1)


def _alternate(snr_s, snr_r, scale, omega0, settings: TsrOptimizerSettings, epsilon: float):
    """Alternating KKT updates for a batch of relay SNR rows.

    ``snr_s`` has shape ``(n,)``, ``snr_r`` and ``omega0`` shape ``(m, n)``,
    ``scale`` shape ``(m,)`` converts the log2 sum to bit/s/Hz, and
    ``epsilon`` is the stopping threshold in the same units. Returns
    ``omega``, ``varpi`` (pair indexed), normalized objective, per-row
    histories and iteration counts.
    """
    tol = settings.multiplier_tolerance
    m = snr_r.shape[0]
    omega = np.array(omega0, dtype=float)
    varpi, _ = budget_multiplier(snr_r, snr_s * omega, tol)
    cur = _objective(snr_s * omega, snr_r * varpi, scale)
    # -inf forces one pass, so a dead hop ends with zero allocations
    pre = np.full(m, -np.inf)
    history = [[c] for c in cur]
    iters = np.zeros(m, dtype=int)
    active = np.abs(cur - pre) > epsilon
    while active.any():
        idx = np.flatnonzero(active & (iters < settings.max_iters))
        if idx.size == 0:
            break
        a_s, a_r, sc = snr_s, snr_r[idx], scale[idx]
        w, v = omega[idx], varpi[idx]
        pre[idx] = cur[idx]
        base = cur[idx]
        w_new, _ = budget_multiplier(a_s, a_r * v, tol)
        c_w = _objective(a_s * w_new, a_r * v, sc)
        # an inexact multiplier can lose ~tol of objective; keep the incumbent then
        keep = c_w < base
        w_new[keep] = w[keep]
        c_w[keep] = base[keep]
        v_new, _ = budget_multiplier(a_r, a_s * w_new, tol)
        c_v = _objective(a_s * w_new, a_r * v_new, sc)
        keep = c_v < c_w
        v_new[keep] = v[keep]
        c_v[keep] = c_w[keep]
        omega[idx], varpi[idx], cur[idx] = w_new, v_new, c_v
        iters[idx] += 1
        for r, c in zip(idx, c_v):
            history[r].append(c)
        active = np.abs(cur - pre) > epsilon
    return omega, varpi, cur, history, iters


class _Link(NamedTuple):
    """Pair-indexed gains of a channel under a fixed pairing."""

    snr_s: np.ndarray       # P_S lambda_s / sigma_R^2
    gain_r: np.ndarray      # lambda_r[perm] / sigma_D^2
    lambda_max: float
    pairing: Pairing


def _link(eig: EigenChannel, config: SystemConfig, pairing: Pairing | None) -> _Link:
    if pairing is None:
        pairing = pair_subchannels(eig.lambda_s, eig.lambda_r)
    snr_s = config.source_power * eig.lambda_s / config.noise_var_relay
    gain_r = eig.lambda_r[pairing.perm] / config.noise_var_dest
    return _Link(snr_s, gain_r, optimal_energy_beam(eig).lambda_max, pairing)


def _rate_scale(alpha, config: SystemConfig):
    """bit/s/Hz per unit of the log2 sum, for each alpha."""
    return (1.0 - np.asarray(alpha, dtype=float)) / 2.0 * _bandwidth_factor(config) / config.bandwidth_hz


def _initial_omegas(n, settings: TsrOptimizerSettings):
    starts = [np.full(n, 1.0 / n)]
    rng = np.random.Generator(np.random.PCG64(settings.restart_seed))
    starts += [rng.dirichlet(np.ones(n)) for _ in range(settings.restarts)]
    return starts


def _alternate_batch(link: _Link, alphas, config, settings):
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    n = link.snr_s.size
    relay_power = np.array([relay_power_budget(a, link.lambda_max, config) for a in alphas])
    snr_r = relay_power[:, None] * link.gain_r[None, :]
    scale = _rate_scale(alphas, config)
    best = None
    for w0 in _initial_omegas(n, settings):
        res = _alternate(link.snr_s, snr_r, scale, np.tile(w0, (alphas.size, 1)), settings,
                         settings.epsilon / config.bandwidth_hz)
        if best is None:
            best = list(res)
            continue
        better = res[2] > best[2]
        for slot in (0, 1):
            best[slot][better] = res[slot][better]
        best[2] = np.where(better, res[2], best[2])
        for r in np.flatnonzero(better):
            best[3][r] = res[3][r]
            best[4][r] = res[4][r]
    omega, varpi, cur, history, iters = best
    return omega, varpi, cur * config.bandwidth_hz, history, iters, relay_power


def _to_relay_index(varpi_pair, pairing: Pairing):
    out = np.zeros_like(varpi_pair)
    out[..., pairing.perm] = varpi_pair
    return out


def alternate_power_allocation(alpha: float, eig: EigenChannel, config: SystemConfig,
                               settings: TsrOptimizerSettings = TsrOptimizerSettings(),
                               pairing: Pairing | None = None) -> PowerAllocation:
    """Alternating conditional-optimal source/relay allocation for one ``alpha``.

    Starts from the uniform source split, computes the matching relay split,
    then alternates source and relay updates (each with its own multiplier
    search) until the objective changes by at most ``settings.epsilon``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    link = _link(eig, config, pairing)
    omega, varpi, rate, history, iters, _ = _alternate_batch(link, [alpha], config, settings)
    hist = tuple(h * config.bandwidth_hz for h in history[0])
    return PowerAllocation(omega[0], _to_relay_index(varpi[0], link.pairing), float(rate[0]),
                           hist, int(iters[0]))


# -- high-SNR closed form ------------------------------------------------------------

def _linear_waterfill(coef, floor):
    """Level ``L`` per row with ``sum(coef * max(L - floor, 0)) = 1``.

    ``coef`` has shape ``(m, n)``, ``floor`` shape ``(n,)``; entries with an
    infinite floor never become active. Returns the allocations.
    """
    order = np.argsort(floor, kind="stable")
    d = floor[order]
    c = coef[:, order]
    finite = np.isfinite(d)
    if not finite.any():
        return np.zeros_like(coef)
    d_f = np.where(finite, d, 0.0)
    cs = np.cumsum(np.where(finite, c, 0.0), axis=1)
    cds = np.cumsum(np.where(finite, c * d_f, 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        level = (1.0 + cds) / cs
    valid = finite & (level > d)
    k = valid.sum(axis=1)
    out = np.zeros_like(coef)
    rows = np.flatnonzero(k > 0)
    lvl = level[rows, k[rows] - 1]
    alloc = c[rows] * np.maximum(lvl[:, None] - d_f, 0.0) * finite
    out[np.ix_(rows, order)] = alloc
    return out


def _highsnr_batch(link: _Link, alphas, config: SystemConfig):
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    relay_power = np.array([relay_power_budget(a, link.lambda_max, config) for a in alphas])
    g_s = link.snr_s / config.source_power
    g_r = link.gain_r
    live = (g_s > 0) & (g_r > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        floor = np.where(live, (np.sqrt(g_s) + np.sqrt(g_r)) ** 2 / (g_s * g_r), np.inf)
        share_s = np.where(live, 1.0 / (1.0 + np.sqrt(g_s / g_r)), 0.0)
        share_r = np.where(live, 1.0 / (1.0 + np.sqrt(g_r / g_s)), 0.0)
        coef_s = share_s[None, :] / config.source_power
        coef_r = np.where(relay_power[:, None] > 0, share_r[None, :] / relay_power[:, None], 0.0)
    omega = np.tile(_linear_waterfill(coef_s, floor), (alphas.size, 1))
    varpi = _linear_waterfill(coef_r, floor)
    x = link.snr_s * omega
    y = relay_power[:, None] * g_r * varpi
    rate = _objective(x, y, _rate_scale(alphas, config)) * config.bandwidth_hz
    return omega, varpi, rate, relay_power


def highsnr_power_allocation(alpha: float, eig: EigenChannel, config: SystemConfig,
                             pairing: Pairing | None = None) -> PowerAllocation:
    """High-SNR approximate allocation for one ``alpha``.

    Each pair is water-filled as a single link with total power split
    between source and relay in proportion to the square roots of the
    opposite hop gains; the two budgets get separate water levels. The
    returned rate uses the exact pair rate, not the approximation.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    link = _link(eig, config, pairing)
    omega, varpi, rate, _ = _highsnr_batch(link, [alpha], config)
    return PowerAllocation(omega[0], _to_relay_index(varpi[0], link.pairing), float(rate[0]))


# -- alpha search ----------------------------------------------------------------------

def alpha_grid(alpha_step: float) -> np.ndarray:
    """Interior grid ``{step, 2*step, ...}`` strictly inside (0, 1)."""
    n = int(round(1.0 / alpha_step))
    grid = np.arange(1, n + 1) * alpha_step
    return grid[grid < 1.0 - 1e-12]


def search_alpha(eig: EigenChannel, config: SystemConfig,
                 settings: TsrOptimizerSettings = TsrOptimizerSettings(),
                 method: str = "alternate", pairing: Pairing | None = None) -> TsrSolution:
    """Grid search of the time-switching factor with an inner allocation.

    ``method`` selects the inner allocation: ``"alternate"`` (iterative
    conditional updates) or ``"highsnr"`` (closed-form approximation). The
    endpoints 0 and 1 carry zero rate and are not evaluated.
    """
    link = _link(eig, config, pairing)
    alphas = alpha_grid(settings.alpha_step)
    if alphas.size == 0:
        raise ValueError("alpha_step leaves no interior grid point")
    if method == "alternate":
        omega, varpi, rate, _, _, relay_power = _alternate_batch(link, alphas, config, settings)
    elif method == "highsnr":
        omega, varpi, rate, relay_power = _highsnr_batch(link, alphas, config)
    else:
        raise ValueError(f"unknown inner allocation {method!r}")
    best = int(np.argmax(rate))
    beam = optimal_energy_beam(eig)
    return TsrSolution(
        alpha=float(alphas[best]),
        omega=omega[best],
        varpi=_to_relay_index(varpi[best], link.pairing),
        pairing=link.pairing,
        beam_subcarrier=beam.subcarrier,
        beam_vector=beam.vector,
        relay_power=float(relay_power[best]),
        rate=float(rate[best]),
        method=method,
        rate_curve=np.column_stack([alphas, rate]),
    )


def tsr_rate_at_alpha(alpha: float, eig: EigenChannel, config: SystemConfig,
                      settings: TsrOptimizerSettings = TsrOptimizerSettings(),
                      method: str = "alternate", pairing: Pairing | None = None) -> float:
    """Optimized TSR rate for a fixed ``alpha``; exactly zero at 0 and 1."""
    if alpha <= 0.0 or alpha >= 1.0:
        return 0.0
    if method == "alternate":
        return alternate_power_allocation(alpha, eig, config, settings, pairing).rate
    return highsnr_power_allocation(alpha, eig, config, pairing).rate


def g_of_alpha(alpha, eig: EigenChannel, config: SystemConfig,
               settings: TsrOptimizerSettings = TsrOptimizerSettings(),
               pairing: Pairing | None = None):
    """Sum of per-pair log2 terms at the optimized allocation for ``alpha``.

    Accepts a scalar or an array of ``alpha`` values in (0, 1).
    """
    alphas = np.atleast_1d(np.asarray(alpha, dtype=float))
    if np.any((alphas <= 0) | (alphas >= 1)):
        raise ValueError("alpha must lie in (0, 1)")
    link = _link(eig, config, pairing)
    omega, varpi, _, _, _, relay_power = _alternate_batch(link, alphas, config, settings)
    x = link.snr_s * omega
    y = relay_power[:, None] * link.gain_r * varpi
    g = _af_log2(x, y).sum(axis=1)
    return float(g[0]) if np.ndim(alpha) == 0 else g
