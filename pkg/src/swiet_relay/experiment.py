"""Monte Carlo sweeps over power, placement, antenna and subcarrier counts.

A scenario is a flat ``key = value`` text file; ``#`` starts a comment.
Recognized keys:

========================  ==================================================
``sweep``                 ``source_power_dbm``, ``phi``, ``num_antennas`` or
                          ``num_subcarriers``
``values``                comma-separated sweep values, monotone
``schemes``               comma-separated subset of :data:`SCHEMES`
``trials``, ``seed``      Monte Carlo size and master seed
``output``                CSV path (optional)
``source_power_dbm``      fixed source power (dBm)
``noise_dbm``             noise level (dBm), read per ``noise_convention``
``noise_convention``      ``psd`` (dBm/Hz over a subcarrier) or ``total``
``bandwidth_hz``, ``num_subcarriers``, ``num_antennas``,
``n_source``, ``n_relay``, ``n_dest``, ``harvester_efficiency``,
``path_loss_exponent``, ``tsr_inner_half``
``d_sd``, ``barrier_height``, ``phi``   geometry
``alpha_step``, ``epsilon``, ``max_iters``, ``greedy_step``   solver knobs
``timing``                record ``wall_time_ms`` (off keeps output
                          byte-reproducible)
========================  ==================================================

Each (sweep index, trial) cell draws one channel from the seed
``SeedSequence(seed, spawn_key=(sweep_index, trial)).generate_state(1)``, and
every scheme is evaluated on that same channel.
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import simple_psr, simple_tsr
from .channel import Geometry, SystemConfig, decompose, generate_channel
from .psr import PsrSettings, optimize_psr
from .tsr import TsrOptimizerSettings, search_alpha

__all__ = [
    "SCHEMES",
    "SWEEPS",
    "CSV_HEADER",
    "WORKERS_ENV",
    "ScenarioError",
    "Scenario",
    "ResultRow",
    "SummaryRow",
    "parse_scenario",
    "load_scenario",
    "cell_seed",
    "run_scenario",
    "rows_to_csv",
    "write_csv",
    "read_csv",
    "summarize",
]

SCHEMES = ("optimized_tsr_1", "optimized_tsr_2", "optimized_psr", "simple_tsr", "simple_psr")
SWEEPS = ("source_power_dbm", "phi", "num_antennas", "num_subcarriers")
CSV_HEADER = ("scheme", "sweep_name", "sweep_value", "trial", "rate_bps", "alpha_star",
              "mean_rho", "wall_time_ms")
WORKERS_ENV = "SWIET_WORKERS"


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending key."""


@dataclass(frozen=True)
class Scenario:
    sweep: str
    values: tuple
    schemes: tuple = SCHEMES
    trials: int = 100
    seed: int = 0
    output: str | None = None
    source_power_dbm: float = 30.0
    noise_dbm: float = -100.0
    noise_convention: str = "psd"
    bandwidth_hz: float = 5e6
    num_subcarriers: int = 4
    n_source: int = 2
    n_relay: int = 2
    n_dest: int = 2
    harvester_efficiency: float = 1.0
    path_loss_exponent: float = 2.0
    tsr_inner_half: bool = True
    d_sd: float = 100.0
    barrier_height: float = 0.0
    phi: float = 0.3
    alpha_step: float = 0.01
    epsilon: float = 1e-6
    max_iters: int = 200
    greedy_step: float = 1e-3
    timing: bool = False

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ScenarioError(f"sweep: expected one of {', '.join(SWEEPS)}, got {self.sweep!r}")
        if len(self.values) == 0:
            raise ScenarioError("values: at least one sweep value is required")
        diffs = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ScenarioError("values: sweep values must be strictly monotone")
        if not self.schemes:
            raise ScenarioError("schemes: at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ScenarioError(f"schemes: unknown scheme {s!r}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ScenarioError("schemes: duplicate scheme")
        if self.trials < 1:
            raise ScenarioError("trials: must be >= 1")
        if self.sweep == "phi" and not all(0 < v < 1 for v in self.values):
            raise ScenarioError("values: phi must lie in (0, 1)")
        if self.sweep in ("num_antennas", "num_subcarriers"):
            if not all(float(v).is_integer() and v >= 1 for v in self.values):
                raise ScenarioError(f"values: {self.sweep} must be positive integers")
        # fail early on configs that cannot be built at any sweep point
        for v in self.values:
            self.cell_config(v)

    def cell_config(self, value):
        """System config and geometry at one sweep value."""
        power = self.source_power_dbm
        k = self.num_subcarriers
        ants = (self.n_source, self.n_relay, self.n_dest)
        phi = self.phi
        if self.sweep == "source_power_dbm":
            power = float(value)
        elif self.sweep == "num_subcarriers":
            k = int(value)
        elif self.sweep == "num_antennas":
            ants = (int(value),) * 3
        else:
            phi = float(value)
        try:
            cfg = SystemConfig.from_db(
                power, self.noise_dbm, self.noise_convention, bandwidth_hz=self.bandwidth_hz,
                num_subcarriers=k, n_source=ants[0], n_relay=ants[1], n_dest=ants[2],
                harvester_efficiency=self.harvester_efficiency,
                path_loss_exponent=self.path_loss_exponent, tsr_inner_half=self.tsr_inner_half)
            geo = Geometry(self.d_sd, self.barrier_height, phi)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
        return cfg, geo

    @property
    def tsr_settings(self) -> TsrOptimizerSettings:
        return TsrOptimizerSettings(alpha_step=self.alpha_step, epsilon=self.epsilon,
                                    max_iters=self.max_iters)

    @property
    def psr_settings(self) -> PsrSettings:
        return PsrSettings(step=self.greedy_step)


@dataclass(frozen=True)
class ResultRow:
    scheme: str
    sweep_name: str
    sweep_value: float
    trial: int
    rate_bps: float
    alpha_star: float | None = None
    mean_rho: float | None = None
    wall_time_ms: float | None = None

    def as_fields(self) -> list[str]:
        def num(x):
            return "" if x is None else f"{x:.17g}"
        return [self.scheme, self.sweep_name, num(self.sweep_value), str(self.trial),
                num(self.rate_bps), num(self.alpha_star), num(self.mean_rho),
                num(self.wall_time_ms)]


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    sweep_name: str
    sweep_value: float
    mean: float
    sd: float
    count: int


# -- scenario parsing ----------------------------------------------------------

_FIELD_TYPES = {
    "sweep": str, "trials": int, "seed": int, "output": str,
    "source_power_dbm": float, "noise_dbm": float, "noise_convention": str,
    "bandwidth_hz": float, "num_subcarriers": int, "n_source": int, "n_relay": int,
    "n_dest": int, "harvester_efficiency": float, "path_loss_exponent": float,
    "tsr_inner_half": "bool", "d_sd": float, "barrier_height": float, "phi": float,
    "alpha_step": float, "epsilon": float, "max_iters": int, "greedy_step": float,
    "timing": "bool",
}


def _parse_bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ScenarioError(f"{key}: expected a boolean, got {text!r}")


def _convert(key, text):
    kind = _FIELD_TYPES[key]
    if kind == "bool":
        return _parse_bool(key, text)
    try:
        if kind is int:
            val = float(text)
            if not val.is_integer():
                raise ValueError
            return int(val)
        return kind(text)
    except ValueError:
        raise ScenarioError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None


def parse_scenario(text: str) -> Scenario:
    """Parse the ``key = value`` scenario format; unknown keys are errors."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ScenarioError(f"{key}: given more than once")
        raw[key] = value
    kwargs = {}
    for key, value in raw.items():
        if key == "values":
            try:
                kwargs["values"] = tuple(float(v) for v in value.split(",") if v.strip())
            except ValueError:
                raise ScenarioError(f"values: cannot parse {value!r}") from None
        elif key == "schemes":
            kwargs["schemes"] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key == "num_antennas":
            n = _convert("n_source", value)
            for k in ("n_source", "n_relay", "n_dest"):
                if k in raw:
                    raise ScenarioError(f"num_antennas: conflicts with {k}")
                kwargs[k] = n
        elif key in _FIELD_TYPES:
            kwargs[key] = _convert(key, value)
        else:
            raise ScenarioError(f"{key}: unknown key")
    for key in ("sweep", "values"):
        if key not in kwargs:
            raise ScenarioError(f"{key}: required key missing")
    sweep = kwargs["sweep"]
    clash = {"source_power_dbm": ("source_power_dbm",), "phi": ("phi",),
             "num_subcarriers": ("num_subcarriers",),
             "num_antennas": ("num_antennas", "n_source", "n_relay", "n_dest")}.get(sweep, ())
    for key in clash:
        if key in raw:
            raise ScenarioError(f"{key}: fixed value conflicts with sweep over {sweep}")
    return Scenario(**kwargs)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


# -- running -------------------------------------------------------------------

def cell_seed(master: int, sweep_index: int, trial: int) -> int:
    """Channel seed of one (sweep index, trial) cell."""
    ss = np.random.SeedSequence(master, spawn_key=(sweep_index, trial))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_cell(scenario: Scenario, sweep_index: int, trial: int) -> list[ResultRow]:
    value = scenario.values[sweep_index]
    cfg, geo = scenario.cell_config(value)
    eig = decompose(generate_channel(cfg, geo, cell_seed(scenario.seed, sweep_index, trial)), cfg)
    rows = []
    for scheme in scenario.schemes:
        t0 = time.perf_counter()
        alpha = rho = None
        if scheme == "optimized_tsr_1":
            sol = search_alpha(eig, cfg, scenario.tsr_settings, method="alternate")
            alpha = sol.alpha
        elif scheme == "optimized_tsr_2":
            sol = search_alpha(eig, cfg, scenario.tsr_settings, method="highsnr")
            alpha = sol.alpha
        elif scheme == "simple_tsr":
            sol = simple_tsr(eig, cfg)
            alpha = sol.alpha
        elif scheme == "optimized_psr":
            sol = optimize_psr(eig, cfg, scenario.psr_settings)
            rho = float(np.mean(sol.rho))
        else:
            sol = simple_psr(eig, cfg)
            rho = float(np.mean(sol.rho))
        elapsed = (time.perf_counter() - t0) * 1e3 if scenario.timing else None
        rows.append(ResultRow(scheme, scenario.sweep, float(value), trial, float(sol.rate),
                              alpha, rho, elapsed))
    return rows


def _run_cell_args(args):
    return _run_cell(*args)


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ScenarioError(f"{WORKERS_ENV}: expected an integer, got {raw!r}") from None
    return max(1, n)


def run_scenario(scenario: Scenario, workers: int | None = None) -> list[ResultRow]:
    """Evaluate every scheme on every (sweep value, trial) cell.

    Rows come out ordered by sweep index, trial, then scheme order of the
    scenario, whatever the number of worker processes (``SWIET_WORKERS``).
    """
    cells = [(scenario, i, t) for i in range(len(scenario.values)) for t in range(scenario.trials)]
    workers = _workers() if workers is None else max(1, workers)
    if workers == 1:
        chunks = [_run_cell(*c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell_args, cells, chunksize=4))
    return [row for chunk in chunks for row in chunk]


# -- CSV --------------------------------------------------------------------------

def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.as_fields())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(path) -> list[ResultRow]:
    def opt(x):
        return None if x == "" else float(x)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [ResultRow(d["scheme"], d["sweep_name"], float(d["sweep_value"]), int(d["trial"]),
                          float(d["rate_bps"]), opt(d["alpha_star"]), opt(d["mean_rho"]),
                          opt(d["wall_time_ms"])) for d in reader]


def summarize(rows) -> list[SummaryRow]:
    """Mean, sample standard deviation and count per (scheme, sweep value).

    Groups appear in first-seen order. A single-trial group has sd 0.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.scheme, r.sweep_name, r.sweep_value), []).append(r.rate_bps)
    out = []
    for (scheme, name, value), rates in groups.items():
        x = np.asarray(rates)
        sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        out.append(SummaryRow(scheme, name, value, float(np.mean(x)), sd, int(x.size)))
    return out
