"""Reference schemes with fixed, gain-proportional allocations."""

from __future__ import annotations

import enum

import numpy as np

from .channel import EigenChannel, SystemConfig
from .psr import PsrSolution, optimal_rho, psr_rate, subchannel_coefficients
from .tsr import (
    TsrSolution,
    optimal_energy_beam,
    pair_subchannels,
    relay_power_budget,
    tsr_pair_rate,
)

__all__ = ["BaselineKind", "SIMPLE_TSR_ALPHA", "proportional_split", "simple_tsr", "simple_psr", "run_baseline"]

SIMPLE_TSR_ALPHA = 1.0 / 3.0


class BaselineKind(enum.Enum):
    SIMPLE_TSR = "simple_tsr"
    SIMPLE_PSR = "simple_psr"


def proportional_split(gains) -> np.ndarray:
    """Budget shares proportional to ``gains``; uniform when all are zero."""
    g = np.asarray(gains, dtype=float)
    total = g.sum()
    if total <= 0:
        return np.full(g.size, 1.0 / g.size)
    return g / total


def simple_tsr(eig: EigenChannel, config: SystemConfig) -> TsrSolution:
    """TSR with ``alpha = 1/3`` and gain-proportional source/relay splits.

    Pairing and energy beam are the optimized ones. ``varpi`` is indexed by
    second-hop subchannel.
    """
    pairing = pair_subchannels(eig.lambda_s, eig.lambda_r)
    beam = optimal_energy_beam(eig)
    alpha = SIMPLE_TSR_ALPHA
    p_r = relay_power_budget(alpha, beam.lambda_max, config)
    omega = proportional_split(eig.lambda_s)
    varpi = proportional_split(eig.lambda_r)
    perm = pairing.perm
    pair = tsr_pair_rate(omega, varpi[perm], eig.lambda_s, eig.lambda_r[perm], p_r, config)
    rate = (1.0 - alpha) / 2.0 * float(np.sum(pair))
    return TsrSolution(alpha, omega, varpi, pairing, beam.subcarrier, beam.vector, p_r, rate,
                       method="simple")


def simple_psr(eig: EigenChannel, config: SystemConfig) -> PsrSolution:
    """PSR with gain-proportional ``omega`` and closed-form split ratios."""
    pairing = pair_subchannels(eig.lambda_s, eig.lambda_r)
    coeff = subchannel_coefficients(eig, config, pairing)
    omega = proportional_split(eig.lambda_s)
    rho = np.atleast_1d(optimal_rho(coeff, omega))
    return PsrSolution(omega, rho, pairing, psr_rate(coeff, omega, rho, config))


def run_baseline(kind: BaselineKind, eig: EigenChannel, config: SystemConfig):
    if kind is BaselineKind.SIMPLE_TSR:
        return simple_tsr(eig, config)
    if kind is BaselineKind.SIMPLE_PSR:
        return simple_psr(eig, config)
    raise ValueError(f"unknown baseline {kind!r}")
