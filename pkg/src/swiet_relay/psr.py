"""Power-splitting relaying (PSR) optimizer.

On each subchannel pair the relay routes a fraction ``rho`` of its received
power to the harvester and forwards the rest, so the second-hop power is tied
to the first-hop allocation. Per pair, with ``A = P_S lambda_s / sigma_R^2``
and ``Q = eta P_S lambda_s lambda_r / sigma_D^2``, the natural-log rate is::

    r = ln(1 + (1-rho) rho w^2 A Q / (1 + (1-rho) w A + rho w Q))

The optimizer picks ``rho`` in closed form for each ``w`` and distributes the
source budget greedily in steps of ``step``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import EigenChannel, Pairing, SystemConfig
from .tsr import pair_subchannels

__all__ = [
    "SubchannelCoefficients",
    "PsrSettings",
    "PsrSolution",
    "GreedyTrace",
    "subchannel_coefficients",
    "optimal_rho",
    "psr_pair_rate",
    "optimal_log_rate",
    "rate_derivative",
    "greedy_omega",
    "polish_omega",
    "allocate_omega",
    "optimize_psr",
    "psr_rate",
]


@dataclass(frozen=True)
class SubchannelCoefficients:
    """First-hop SNR ``a`` and end-to-end harvest coefficient ``q`` per pair.

    Both fields may be scalars or equal-length arrays.
    """

    a: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if a.shape != q.shape:
            raise ValueError("a and q must have the same shape")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(q))):
            raise ValueError("coefficients must be finite")
        if np.any(a < 0) or np.any(q < 0):
            raise ValueError("coefficients must be non-negative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "q", q)

    def __len__(self):
        return int(self.a.size)


@dataclass(frozen=True)
class PsrSettings:
    """Greedy allocation settings.

    ``rule`` chooses the per-step score. ``"envelope"`` (default) scores a
    subchannel by the slope of the concave envelope of its rate curve on the
    step grid; ``"derivative"`` scores it by the instantaneous derivative at
    its current allocation, with zero-derivative ties broken by descending
    ``a*q``. The derivative rule puts the whole budget on one subchannel
    because every derivative vanishes at zero allocation. ``polish`` lets
    :func:`optimize_psr` refine the envelope greedy with
    :func:`polish_omega`.
    """

    step: float = 1e-3
    rule: str = "envelope"
    polish: bool = True

    def __post_init__(self):
        if not 0 < self.step <= 1:
            raise ValueError("step must lie in (0, 1]")
        n = round(1.0 / self.step)
        if abs(n * self.step - 1.0) > 1e-9:
            raise ValueError("step must divide 1")
        if self.rule not in ("envelope", "derivative"):
            raise ValueError(f"unknown greedy rule {self.rule!r}")

    @property
    def num_steps(self) -> int:
        return int(round(1.0 / self.step))


@dataclass(frozen=True)
class GreedyTrace:
    """Per-step record of the greedy: chosen subchannel and all scores."""

    chosen: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class PsrSolution:
    omega: np.ndarray
    rho: np.ndarray
    pairing: Pairing
    rate: float
    trace: GreedyTrace | None = field(default=None, repr=False)


def subchannel_coefficients(eig: EigenChannel, config: SystemConfig,
                            pairing: Pairing) -> SubchannelCoefficients:
    """Per-pair PSR coefficients for a channel under ``pairing``."""
    lam_s = eig.lambda_s
    lam_r = eig.lambda_r[pairing.perm]
    a = config.source_power * lam_s / config.noise_var_relay
    q = config.harvester_efficiency * config.source_power * lam_s * lam_r / config.noise_var_dest
    return SubchannelCoefficients(a, q)


def optimal_rho(coeff: SubchannelCoefficients, omega_l):
    """Rate-maximizing split ratio for a given source allocation.

    Uses ``u / (u + v)`` with ``u = sqrt(1 + A w)``, ``v = sqrt(1 + Q w)``,
    which equals the quotient form without its 0/0 at ``A = Q`` or ``w = 0``.
    Returns exactly 0.5 when ``A`` and ``Q`` agree to 1e-12 relative, and on
    zero-rate pairs (``A Q w = 0``) where every split is equivalent.
    """
    a, q = coeff.a, coeff.q
    w = np.asarray(omega_l, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    u = np.sqrt(1.0 + a * w)
    v = np.sqrt(1.0 + q * w)
    rho = u / (u + v)
    equal = np.abs(a - q) <= 1e-12 * np.maximum(a, q)
    rho = np.where(equal | (a * q * w == 0), 0.5, rho)
    return float(rho) if rho.ndim == 0 else rho


def _log_arg(a, q, w, rho):
    num = (1.0 - rho) * rho * w * w * a * q
    den = 1.0 + (1.0 - rho) * w * a + rho * w * q
    return num / den


def psr_pair_rate(coeff: SubchannelCoefficients, omega_l, rho_l, config: SystemConfig):
    """Information rate (bit/s) of one subchannel pair under PSR."""
    w = np.asarray(omega_l, dtype=float)
    rho = np.asarray(rho_l, dtype=float)
    bits = np.log2(1.0 + _log_arg(coeff.a, coeff.q, w, rho))
    out = config.bandwidth_hz / (2 * config.num_subcarriers) * bits
    return float(out) if out.ndim == 0 else out


def optimal_log_rate(coeff: SubchannelCoefficients, omega_l):
    """Natural-log pair rate with the split ratio at its optimum."""
    w = np.asarray(omega_l, dtype=float)
    rho = optimal_rho(coeff, w)
    out = np.log1p(_log_arg(coeff.a, coeff.q, w, rho))
    return float(out) if out.ndim == 0 else out


def rate_derivative(coeff: SubchannelCoefficients, omega_l):
    """Derivative of :func:`optimal_log_rate` with respect to the allocation.

    At the optimal split the derivative collapses to
    ``A Q w / (s (1 + s))`` with ``s = sqrt((1 + A w)(1 + Q w))``, which is
    free of cancellation for every ``A``, ``Q`` including ``A = Q``.
    """
    a, q = coeff.a, coeff.q
    w = np.asarray(omega_l, dtype=float)
    if np.any(w < 0):
        raise ValueError("omega must be non-negative")
    s = np.sqrt((1.0 + a * w) * (1.0 + q * w))
    out = a * q * w / (s * (1.0 + s))
    return float(out) if out.ndim == 0 else out


def _upper_envelope(values):
    """Concave majorant of ``values`` sampled on a uniform grid."""
    n = values.size
    hull = []
    for k in range(n):
        y = values[k]
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j when it lies on or below the chord i -> k
            if (values[j] - values[i]) * (k - i) <= (y - values[i]) * (j - i):
                hull.pop()
            else:
                break
        hull.append(k)
    return np.interp(np.arange(n), hull, values[hull])


def _envelope_rows(table):
    """Row-wise concave majorant of a table sampled on a uniform grid.

    Rate curves here are convex up to an inflection and concave after, so
    the majorant is usually the chord from the origin to the point of
    steepest chord followed by the curve itself. Rows where that candidate
    is not concave go through the exact monotone-chain hull.
    """
    n, m1 = table.shape
    k = np.arange(1, m1)
    chord = (table[:, 1:] - table[:, :1]) / k
    tip = np.argmax(chord, axis=1) + 1
    env = table.copy()
    cols = np.arange(m1)
    left = cols[None, :] < tip[:, None]
    line = table[:, :1] + chord[np.arange(n), tip - 1][:, None] * cols[None, :]
    env[left] = line[left]
    # tolerate rounding-level kinks; anything larger takes the exact hull
    scale = np.abs(table).max(axis=1)
    bad = np.any(np.diff(env, 2, axis=1) > 1e-13 * scale[:, None], axis=1)
    for r in np.flatnonzero(bad):
        env[r] = _upper_envelope(table[r])
    return env


def _rate_table(coeff: SubchannelCoefficients, settings: PsrSettings):
    """Natural-log rate of every pair on the grid ``{0, step, ..., 1}``."""
    m = settings.num_steps
    grid = np.arange(m + 1) * settings.step
    a = np.atleast_1d(coeff.a)[:, None]
    q = np.atleast_1d(coeff.q)[:, None]
    return optimal_log_rate(SubchannelCoefficients(a, q), np.broadcast_to(grid, (a.shape[0], m + 1)))


def _priority(a, q):
    """Tie-break rank: larger ``a*q`` first, then lower index."""
    n = a.size
    order = np.lexsort((np.arange(n), -(a * q)))
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)
    return order, rank


def _envelope_order(table, rank, step):
    """Every unit step of every pair, sorted the way the greedy takes them.

    Returns the pair index of each step and the envelope slope table. Within
    a pair the envelope slopes never increase, so the sorted sequence visits
    each pair's steps in order and its first ``m`` entries are the greedy.
    """
    n, m1 = table.shape
    env = _envelope_rows(table)
    slopes = np.diff(env, axis=1) / step
    pair = np.repeat(np.arange(n), m1 - 1)
    k = np.tile(np.arange(m1 - 1), n)
    # snap rounding noise so equal slopes tie and fall to the priority rank
    scale = np.max(np.abs(slopes))
    key = np.round(slopes / scale, 10) if scale > 0 else slopes
    order = np.lexsort((k, rank[pair], -key.ravel()))
    return pair[order], slopes


def _record_scores(chosen, slopes):
    m, n = chosen.size, slopes.shape[0]
    counts = np.zeros(n, dtype=int)
    scores = np.empty((m, n))
    for t, l in enumerate(chosen):
        scores[t] = np.where(counts < m, slopes[np.arange(n), np.minimum(counts, m - 1)], -np.inf)
        counts[l] += 1
    return scores


def greedy_omega(coeffs: SubchannelCoefficients, settings: PsrSettings = PsrSettings(),
                 return_trace: bool = False):
    """Greedy source allocation in increments of ``settings.step``.

    Each increment goes to the subchannel with the largest score (see
    :class:`PsrSettings`); ties go to the larger ``a*q``, then the lower
    index. Returns the allocation, and a :class:`GreedyTrace` when asked.
    """
    n = len(coeffs)
    if n == 0:
        raise ValueError("at least one subchannel is required")
    a = np.atleast_1d(coeffs.a)
    q = np.atleast_1d(coeffs.q)
    m = settings.num_steps
    priority, rank = _priority(a, q)
    if settings.rule == "envelope":
        seq, slopes = _envelope_order(_rate_table(coeffs, settings), rank, settings.step)
        chosen = seq[:m]
        counts = np.bincount(chosen, minlength=n)
        scores = _record_scores(chosen, slopes) if return_trace else None
    else:
        counts = np.zeros(n, dtype=int)
        chosen = np.empty(m, dtype=int)
        scores = np.empty((m, n)) if return_trace else None
        sub = SubchannelCoefficients(a[priority], q[priority])
        for t in range(m):
            d = np.atleast_1d(rate_derivative(sub, counts[priority] * settings.step))
            l = priority[int(np.argmax(d))]
            if return_trace:
                scores[t, priority] = d
            chosen[t] = l
            counts[l] += 1
    omega = counts * settings.step
    if return_trace:
        return omega, GreedyTrace(chosen, scores)
    return omega


def polish_omega(coeffs: SubchannelCoefficients, settings: PsrSettings = PsrSettings()):
    """Greedy allocation refined by one exceptional subchannel.

    For every subchannel ``f`` and every grid amount ``c`` given to it, the
    remaining budget is filled with the greedy over the other subchannels;
    the best ``(f, c)`` on the true rate wins. The plain greedy is one of
    the candidates, so the result is never worse than it.
    """
    n = len(coeffs)
    if n == 0:
        raise ValueError("at least one subchannel is required")
    m = settings.num_steps
    a = np.atleast_1d(coeffs.a)
    q = np.atleast_1d(coeffs.q)
    table = _rate_table(coeffs, settings)
    _, rank = _priority(a, q)
    seq, _ = _envelope_order(table, rank, settings.step)
    # actual rate gained by each step of the sorted sequence
    nth = np.empty(seq.size, dtype=int)
    for l in range(n):
        hit = seq == l
        nth[hit] = np.arange(hit.sum())
    gain = table[seq, nth + 1] - table[seq, nth]
    best_val, best = -np.inf, None
    for f in range(n):
        keep = seq != f
        others = np.concatenate([[0.0], np.cumsum(gain[keep][:m])])
        if others.size < m + 1:
            others = np.concatenate([others, np.full(m + 1 - others.size, -np.inf)])
        c = np.arange(m + 1)
        total = table[f, c] + others[m - c]
        j = int(np.argmax(total))
        if best is None or total[j] > best_val:
            best_val, best = total[j], (f, j, keep)
    f, j, keep = best
    counts = np.bincount(seq[keep][: m - j], minlength=n)
    counts[f] = j
    return counts * settings.step


def allocate_omega(coeffs: SubchannelCoefficients, settings: PsrSettings = PsrSettings()):
    """Source allocation used by the optimizer: greedy, polished if enabled."""
    if settings.polish and settings.rule == "envelope":
        return polish_omega(coeffs, settings)
    return greedy_omega(coeffs, settings)


def psr_rate(coeff: SubchannelCoefficients, omega, rho, config: SystemConfig) -> float:
    """Sum rate (bit/s) over all pairs."""
    return float(np.sum(psr_pair_rate(coeff, omega, rho, config)))


def optimize_psr(eig: EigenChannel, config: SystemConfig,
                 settings: PsrSettings = PsrSettings(),
                 pairing: Pairing | None = None, keep_trace: bool = False) -> PsrSolution:
    """Sorted pairing, greedy source allocation, closed-form split ratios."""
    if pairing is None:
        pairing = pair_subchannels(eig.lambda_s, eig.lambda_r)
    coeff = subchannel_coefficients(eig, config, pairing)
    trace = None
    if keep_trace:
        _, trace = greedy_omega(coeff, settings, return_trace=True)
    omega = allocate_omega(coeff, settings)
    rho = np.atleast_1d(optimal_rho(coeff, omega))
    return PsrSolution(omega, rho, pairing, psr_rate(coeff, omega, rho, config), trace)
