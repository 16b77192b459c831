"""Brute-force validators for the closed-form and iterative solvers.

Every oracle here searches a grid or enumerates candidates and only shares
the raw rate expressions with the solvers it checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelRealization,
    EigenChannel,
    Geometry,
    Pairing,
    SystemConfig,
    decompose,
    generate_channel,
)
from .psr import (
    PsrSettings,
    SubchannelCoefficients,
    allocate_omega,
    optimal_rho,
    psr_rate,
    subchannel_coefficients,
)
from .tsr import (
    TsrOptimizerSettings,
    alternate_power_allocation,
    optimal_energy_beam,
    pair_subchannels,
    relay_power_budget,
    tsr_pair_rate,
)

__all__ = [
    "OracleSizeError",
    "OracleReport",
    "MAX_GRID_SUBCHANNELS",
    "MAX_PAIRING_SUBCHANNELS",
    "grid_rho",
    "grid_power_tsr",
    "grid_power_psr",
    "dp_power_psr",
    "enumerate_pairings",
    "sample_covariances",
    "validate",
    "SUITES",
]

MAX_GRID_SUBCHANNELS = 2
MAX_PAIRING_SUBCHANNELS = 4


class OracleSizeError(ValueError):
    """Instance exceeds the size an exhaustive oracle accepts."""


@dataclass(frozen=True)
class OracleReport:
    scheme: str
    instance: str
    oracle_value: float
    solver_value: float
    tolerance: float
    one_sided: bool = False

    @property
    def relative_gap(self) -> float:
        return abs(self.solver_value - self.oracle_value) / max(abs(self.oracle_value), 1e-12)

    @property
    def passed(self) -> bool:
        """Gap within tolerance; when one-sided, any solver excess also passes."""
        if self.one_sided and self.solver_value >= self.oracle_value:
            return True
        return self.relative_gap <= self.tolerance

    FIELDS = ("scheme", "instance", "oracle_value", "solver_value", "relative_gap", "tolerance", "pass")

    def as_row(self) -> list[str]:
        return [self.scheme, self.instance, f"{self.oracle_value:.17g}", f"{self.solver_value:.17g}",
                f"{self.relative_gap:.17g}", f"{self.tolerance:.17g}", str(self.passed).lower()]


def _grid(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.linspace(0.0, 1.0, n + 1)


def _psr_log_arg(a, q, w, rho):
    return (1.0 - rho) * rho * w * w * a * q / (1.0 + (1.0 - rho) * w * a + rho * w * q)


def grid_rho(coeff: SubchannelCoefficients, omega_l: float, step: float = 1e-4) -> float:
    """Split ratio maximizing the pair rate over ``{0, step, ..., 1}``.

    Ties (for instance a flat objective at zero allocation) go to the
    smallest grid point.
    """
    if not 0 < step <= 0.1:
        raise ValueError("step must lie in (0, 0.1]")
    rho = _grid(step)
    vals = _psr_log_arg(float(coeff.a), float(coeff.q), float(omega_l), rho)
    return float(rho[int(np.argmax(vals))])


def grid_power_tsr(alpha: float, eig: EigenChannel, config: SystemConfig, step: float = 1e-3,
                   pairing: Pairing | None = None):
    """Exhaustive simplex search of source and relay splits at fixed ``alpha``.

    Returns ``(omega, varpi, rate)`` with ``varpi`` indexed by second-hop
    subchannel. Only accepts up to two subchannels.
    """
    n = eig.lambda_s.size
    if n > MAX_GRID_SUBCHANNELS:
        raise OracleSizeError(f"joint grid oracle accepts at most {MAX_GRID_SUBCHANNELS} subchannels, got {n}")
    if pairing is None:
        pairing = pair_subchannels(eig.lambda_s, eig.lambda_r)
    perm = pairing.perm
    p_r = relay_power_budget(alpha, optimal_energy_beam(eig).lambda_max, config)
    lam_s, lam_r = eig.lambda_s, eig.lambda_r[perm]
    if n == 1:
        omega = varpi = np.ones(1)
        rate = (1 - alpha) / 2 * float(tsr_pair_rate(1.0, 1.0, lam_s[0], lam_r[0], p_r, config))
        return omega, varpi, rate
    g = _grid(step)
    w1, v1 = g[:, None], g[None, :]
    total = (tsr_pair_rate(w1, v1, lam_s[0], lam_r[0], p_r, config)
             + tsr_pair_rate(1 - w1, 1 - v1, lam_s[1], lam_r[1], p_r, config))
    i, j = np.unravel_index(int(np.argmax(total)), total.shape)
    omega = np.array([g[i], 1 - g[i]])
    varpi_pair = np.array([g[j], 1 - g[j]])
    varpi = np.empty(2)
    varpi[perm] = varpi_pair
    return omega, varpi, (1 - alpha) / 2 * float(total[i, j])


def _psr_grid_table(coeff: SubchannelCoefficients, m: int, rho_step: float | None):
    """Natural-log rate of every pair on the allocation grid ``k/m``."""
    w = np.arange(m + 1) / m
    rows = []
    for a, q in zip(np.atleast_1d(coeff.a), np.atleast_1d(coeff.q)):
        if rho_step is None:
            rho = optimal_rho(SubchannelCoefficients(a, q), w)
            rows.append(np.log1p(_psr_log_arg(a, q, w, rho)))
        else:
            rho = _grid(rho_step)[:, None]
            rows.append(np.log1p(_psr_log_arg(a, q, w[None, :], rho)).max(axis=0))
    return np.array(rows)


def grid_power_psr(coeff: SubchannelCoefficients, config: SystemConfig, step: float = 1e-3):
    """Line search over the source split of two subchannels.

    The split ratio of each pair uses the closed form at the candidate
    allocation. Returns ``(omega, rate)``.
    """
    n = len(coeff)
    if n > MAX_GRID_SUBCHANNELS:
        raise OracleSizeError(f"line-search oracle accepts at most {MAX_GRID_SUBCHANNELS} subchannels, got {n}")
    if n == 1:
        omega = np.ones(1)
    else:
        g = _grid(step)
        w = np.column_stack([g, 1 - g])
        rates = [psr_rate(coeff, row, optimal_rho(coeff, row), config) for row in w]
        omega = w[int(np.argmax(rates))]
    return omega, psr_rate(coeff, omega, optimal_rho(coeff, omega), config)


def dp_power_psr(coeff: SubchannelCoefficients, config: SystemConfig, step: float = 1e-3,
                 rho_step: float | None = None):
    """Exact maximum of the separable PSR sum over the allocation grid.

    Dynamic programming over subchannels with the budget discretized in
    ``step`` units. With ``rho_step`` set, the split ratio is also grid
    searched instead of taken from the closed form. Returns
    ``(omega, rate)``.
    """
    m = int(round(1.0 / step))
    table = _psr_grid_table(coeff, m, rho_step)
    n = table.shape[0]
    best = table[0].copy()
    choice = []
    i, j = np.tril_indices(m + 1)
    for row in table[1:]:
        cand = np.full((m + 1, m + 1), -np.inf)
        cand[i, j] = best[i - j] + row[j]
        choice.append(np.argmax(cand, axis=1))
        best = cand.max(axis=1)
    k = int(np.argmax(best))
    units = np.zeros(n, dtype=int)
    for idx in range(n - 1, 0, -1):
        units[idx] = choice[idx - 1][k]
        k -= units[idx]
    units[0] = k
    omega = units / m
    scale = config.bandwidth_hz / (2 * config.num_subcarriers) / np.log(2.0)
    return omega, float(scale * np.sum(table[np.arange(n), units]))


def enumerate_pairings(eig: EigenChannel, config: SystemConfig, mode: str = "tsr", alpha: float = 0.3,
                       tsr_settings: TsrOptimizerSettings = TsrOptimizerSettings(),
                       psr_settings: PsrSettings = PsrSettings()):
    """Re-optimize power for every pairing and return the best one.

    ``mode`` is ``"tsr"`` (alternating allocation at fixed ``alpha``) or
    ``"psr"`` (greedy allocation). Returns ``(best_pairing, best_rate,
    rates)`` where ``rates`` maps each permutation tuple to its rate.
    """
    n = eig.lambda_s.size
    if n > MAX_PAIRING_SUBCHANNELS:
        raise OracleSizeError(f"pairing enumeration accepts at most {MAX_PAIRING_SUBCHANNELS} subchannels, got {n}")
    rates = {}
    for perm in itertools.permutations(range(n)):
        pairing = Pairing(np.array(perm))
        if mode == "tsr":
            rates[perm] = alternate_power_allocation(alpha, eig, config, tsr_settings, pairing).rate
        elif mode == "psr":
            coeff = subchannel_coefficients(eig, config, pairing)
            omega = allocate_omega(coeff, psr_settings)
            rates[perm] = psr_rate(coeff, omega, optimal_rho(coeff, omega), config)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    best = max(rates, key=lambda p: (rates[p], tuple(-x for x in p)))
    return Pairing(np.array(best)), rates[best], rates


def sample_covariances(real: ChannelRealization, source_power: float, n_samples: int,
                       seed: int = 0) -> float:
    """Best received power over random feasible source covariances.

    Each sample draws a complex Wishart matrix per subcarrier, normalizes it
    to unit trace, and scales it by a Dirichlet split of ``source_power``
    across subcarriers. Returns the largest ``sum_i tr(H_i X_i H_i^H)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    h = real.h_source
    k, _, n_s = h.shape
    rng = np.random.Generator(np.random.PCG64(seed))
    gram = np.einsum("kri,krj->kij", h.conj(), h)
    best = -np.inf
    for start in range(0, n_samples, 2048):
        b = min(2048, n_samples - start)
        g = (rng.standard_normal((b, k, n_s, n_s)) + 1j * rng.standard_normal((b, k, n_s, n_s))) / np.sqrt(2)
        x = g @ np.conj(np.swapaxes(g, -1, -2))
        x /= np.trace(x, axis1=-2, axis2=-1).real[..., None, None]
        split = rng.dirichlet(np.ones(k), size=b) * source_power
        power = np.einsum("kij,bkji->bk", gram, x).real
        best = max(best, float(np.max(np.sum(split * power, axis=1))))
    return best


# -- validation suites -------------------------------------------------------

def _rho_suite(seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for t in range(20):
        a, q = rng.uniform(0.01, 50.0, size=2)
        w = rng.uniform(0.01, 1.0)
        coeff = SubchannelCoefficients(a, q)
        out.append(OracleReport("rho", f"a={a:.6g};q={q:.6g};omega={w:.6g}",
                                grid_rho(coeff, w, 1e-5), optimal_rho(coeff, w), 1e-4))
    return out


def _small_config(k: int, n: int, power_dbm: float = 30.0) -> SystemConfig:
    return SystemConfig.from_db(power_dbm, num_subcarriers=k, n_source=n, n_relay=n, n_dest=n)


def _power_suite(seed: int):
    cfg = _small_config(2, 1)
    out = []
    for t in range(5):
        eig = decompose(generate_channel(cfg, Geometry(), np.random.SeedSequence(seed, spawn_key=(t,))))
        _, _, oracle = grid_power_tsr(0.3, eig, cfg, 1e-3)
        solver = alternate_power_allocation(0.3, eig, cfg).rate
        out.append(OracleReport("tsr_power", f"trial={t};alpha=0.3", oracle, solver, 5e-3))
        coeff = subchannel_coefficients(eig, cfg, pair_subchannels(eig.lambda_s, eig.lambda_r))
        _, oracle = grid_power_psr(coeff, cfg, 1e-3)
        omega = allocate_omega(coeff)
        out.append(OracleReport("psr_power", f"trial={t}", oracle,
                                psr_rate(coeff, omega, optimal_rho(coeff, omega), cfg), 5e-3))
    return out


def _pairing_suite(seed: int):
    out = []
    for t in range(3):
        cfg = _small_config(3 + t % 2, 1)
        eig = decompose(generate_channel(cfg, Geometry(), np.random.SeedSequence(seed, spawn_key=(t,))))
        sorted_pair = pair_subchannels(eig.lambda_s, eig.lambda_r)
        for mode in ("tsr", "psr"):
            _, best, rates = enumerate_pairings(eig, cfg, mode)
            out.append(OracleReport(f"{mode}_pairing", f"trial={t};kn={eig.lambda_s.size}",
                                    best, rates[tuple(sorted_pair.perm)], 1e-6, one_sided=True))
    return out


def _beam_suite(seed: int):
    cfg = SystemConfig()
    out = []
    for t in range(5):
        real = generate_channel(cfg, Geometry(), np.random.SeedSequence(seed, spawn_key=(t,)))
        beam = optimal_energy_beam(decompose(real))
        sampled = sample_covariances(real, cfg.source_power, 10_000, seed=t)
        closed = cfg.source_power * beam.lambda_max
        out.append(OracleReport("beam", f"trial={t}", sampled, closed, 1e-9, one_sided=True))
    return out


SUITES = {"rho": _rho_suite, "power": _power_suite, "pairing": _pairing_suite, "beam": _beam_suite}


def validate(suite: str | None = None, seed: int = 0) -> list[OracleReport]:
    """Run one validation suite, or all of them when ``suite`` is None."""
    names = list(SUITES) if suite is None else [suite]
    reports = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        reports.extend(SUITES[name](seed))
    return reports
