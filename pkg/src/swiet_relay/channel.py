"""Two-hop MIMO-OFDM channel model.

Generates per-subcarrier channel matrices for the source->relay and
relay->destination hops, diagonalizes them with an SVD and flattens the
retained eigenmodes into ``K*N`` end-to-end subchannels.

Flattened index convention: subchannel ``l = i*N + n`` holds the ``n``-th
largest squared singular value of subcarrier ``i`` (both zero based), so the
``N`` modes of a subcarrier are contiguous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RNG_ALGORITHM",
    "SystemConfig",
    "Geometry",
    "ChannelRealization",
    "EigenChannel",
    "Pairing",
    "PrecoderSet",
    "DecompositionError",
    "dbm_to_watt",
    "noise_variance",
    "generate_channel",
    "decompose",
    "relay_gain",
    "antenna_weights_from_omega",
    "reconstruct_precoders",
    "composite_channel",
]

#: Bit generator used for every channel draw (stored with each realization).
RNG_ALGORITHM = "PCG64"


class DecompositionError(ArithmeticError):
    """Raised when the SVD of a channel matrix cannot be computed."""


def dbm_to_watt(dbm):
    """Convert a power level from dBm to watts."""
    w = 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
    return float(w) if w.ndim == 0 else w


def noise_variance(noise_dbm: float, bandwidth_hz: float, num_subcarriers: int,
                   convention: str = "psd") -> float:
    """Per-subchannel noise power in watts.

    Parameters
    ----------
    noise_dbm : float
        Noise level in dBm. With ``convention="psd"`` it is read as a density
        in dBm/Hz and integrated over one subcarrier (``bandwidth_hz / K``).
        With ``convention="total"`` it is the noise power of one subchannel.
    bandwidth_hz : float
        Total system bandwidth.
    num_subcarriers : int
        Number of OFDM subcarriers ``K``.
    convention : {"psd", "total"}
    """
    if convention == "psd":
        return dbm_to_watt(noise_dbm) * bandwidth_hz / num_subcarriers
    if convention == "total":
        return dbm_to_watt(noise_dbm)
    raise ValueError(f"unknown noise convention {convention!r}")


@dataclass(frozen=True)
class SystemConfig:
    """Physical constants of the relay link.

    Powers and noise variances are in watts; ``noise_var_relay`` and
    ``noise_var_dest`` are per-subchannel noise powers.
    ``tsr_inner_half`` keeps the half-duplex factor 1/2 inside the per-pair
    TSR rate in addition to the ``(1 - alpha)/2`` time factor; set it to
    ``False`` to drop the inner factor.
    """

    bandwidth_hz: float = 5e6
    num_subcarriers: int = 4
    n_source: int = 2
    n_relay: int = 2
    n_dest: int = 2
    noise_var_relay: float = 1.25e-7
    noise_var_dest: float = 1.25e-7
    source_power: float = 1.0
    harvester_efficiency: float = 1.0
    path_loss_exponent: float = 2.0
    tsr_inner_half: bool = True
    rate_log_base: int = field(default=2, init=False)

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if min(self.n_source, self.n_relay, self.n_dest) < 1:
            raise ValueError("antenna counts must be >= 1")
        for name in ("bandwidth_hz", "noise_var_relay", "noise_var_dest",
                     "source_power", "path_loss_exponent"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.harvester_efficiency <= 1:
            raise ValueError("harvester_efficiency must lie in (0, 1]")

    @property
    def num_streams(self) -> int:
        """Spatial dimension ``N = min(N_S, N_R, N_D)``."""
        return min(self.n_source, self.n_relay, self.n_dest)

    @property
    def num_subchannels(self) -> int:
        """Number of end-to-end subchannels ``K*N``."""
        return self.num_subcarriers * self.num_streams

    @property
    def subcarrier_bandwidth(self) -> float:
        return self.bandwidth_hz / self.num_subcarriers

    @classmethod
    def from_db(cls, source_power_dbm: float = 30.0, noise_dbm: float = -100.0,
                noise_convention: str = "psd", **kwargs) -> "SystemConfig":
        """Build a config from dBm levels (noise identical at relay and destination)."""
        bandwidth = kwargs.get("bandwidth_hz", cls.bandwidth_hz)
        k = kwargs.get("num_subcarriers", cls.num_subcarriers)
        sigma2 = noise_variance(noise_dbm, bandwidth, k, noise_convention)
        return cls(source_power=dbm_to_watt(source_power_dbm), noise_var_relay=sigma2,
                   noise_var_dest=sigma2, **kwargs)


@dataclass(frozen=True)
class Geometry:
    """Relay placed on top of a barrier between source and destination."""

    d_sd: float = 100.0
    barrier_height: float = 0.0
    phi: float = 0.3

    def __post_init__(self):
        if not self.d_sd > 0:
            raise ValueError("d_sd must be positive")
        if self.barrier_height < 0:
            raise ValueError("barrier_height must be non-negative")
        if not 0 < self.phi < 1:
            raise ValueError("phi must lie in (0, 1)")

    @property
    def d_sr(self) -> float:
        return math.hypot(self.barrier_height, self.phi * self.d_sd)

    @property
    def d_rd(self) -> float:
        return math.hypot(self.barrier_height, (1.0 - self.phi) * self.d_sd)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelRealization:
    """Channel matrices of both hops.

    ``h_source`` has shape ``(K, N_R, N_S)`` and ``h_relay`` has shape
    ``(K, N_D, N_R)``.
    """

    h_source: np.ndarray
    h_relay: np.ndarray
    rng_seed: int | None = None
    rng_algorithm: str = RNG_ALGORITHM

    def __post_init__(self):
        hs = _freeze(np.asarray(self.h_source, dtype=complex))
        hr = _freeze(np.asarray(self.h_relay, dtype=complex))
        if hs.ndim != 3 or hr.ndim != 3 or hs.shape[0] != hr.shape[0]:
            raise ValueError("expected (K, rows, cols) channel stacks with equal K")
        if hs.shape[1] != hr.shape[2]:
            raise ValueError("relay antenna count differs between hops")
        if not (np.all(np.isfinite(hs)) and np.all(np.isfinite(hr))):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "h_source", hs)
        object.__setattr__(self, "h_relay", hr)

    @property
    def num_subcarriers(self) -> int:
        return self.h_source.shape[0]


@dataclass(frozen=True)
class EigenChannel:
    """Per-subcarrier SVDs of both hops and the flattened eigenmode gains.

    ``u_*``, ``sv_*``, ``vh_*`` are the full SVD factors (``H = U diag(sv) Vh``)
    with singular values sorted in descending order. ``lambda_s`` and
    ``lambda_r`` hold the squared singular values of the top ``N`` modes,
    flattened with ``l = i*N + n``.
    """

    u_s: np.ndarray
    sv_s: np.ndarray
    vh_s: np.ndarray
    u_r: np.ndarray
    sv_r: np.ndarray
    vh_r: np.ndarray
    num_streams: int

    @property
    def num_subcarriers(self) -> int:
        return self.sv_s.shape[0]

    @property
    def lambda_s(self) -> np.ndarray:
        return _freeze((self.sv_s[:, :self.num_streams] ** 2).reshape(-1))

    @property
    def lambda_r(self) -> np.ndarray:
        return _freeze((self.sv_r[:, :self.num_streams] ** 2).reshape(-1))


@dataclass(frozen=True)
class Pairing:
    """Bijection between first-hop and second-hop subchannels.

    ``perm[l] = l2`` pairs first-hop subchannel ``l`` with second-hop
    subchannel ``l2``.
    """

    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.intp)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("perm must be a permutation of 0..KN-1")
        object.__setattr__(self, "perm", _freeze(perm))

    def __len__(self):
        return self.perm.size

    @classmethod
    def identity(cls, size: int) -> "Pairing":
        return cls(np.arange(size))

    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv

    def __eq__(self, other):
        return isinstance(other, Pairing) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())


def generate_channel(config: SystemConfig, geometry: Geometry, seed: int) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1) entries for both hops and apply distance path loss.

    First-hop entries are scaled by ``sqrt(d_sr**-kappa)`` and second-hop
    entries by ``sqrt(d_rd**-kappa)``. Deterministic given ``seed``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    k = config.num_subcarriers
    shapes = [(k, config.n_relay, config.n_source), (k, config.n_dest, config.n_relay)]
    hops = []
    for shape, dist in zip(shapes, (geometry.d_sr, geometry.d_rd)):
        fading = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
        hops.append(fading * math.sqrt(dist ** -config.path_loss_exponent))
    return ChannelRealization(hops[0], hops[1], rng_seed=seed)


def _svd(h: np.ndarray):
    try:
        u, sv, vh = np.linalg.svd(h, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD failed: {exc}") from exc
    if not np.all(np.isfinite(sv)):
        raise DecompositionError("SVD produced non-finite singular values")
    return u, sv, vh


def decompose(real: ChannelRealization, config: SystemConfig | None = None) -> EigenChannel:
    """SVD of every subcarrier matrix of both hops.

    Only the top ``N = min(N_S, N_R, N_D)`` modes enter the flattened gains.
    """
    n_streams = min(real.h_source.shape[1], real.h_source.shape[2], real.h_relay.shape[1])
    if config is not None and config.num_streams != n_streams:
        raise ValueError("realization antenna counts do not match config")
    u_s, sv_s, vh_s = _svd(real.h_source)
    u_r, sv_r, vh_r = _svd(real.h_relay)
    return EigenChannel(*(_freeze(a) for a in (u_s, sv_s, vh_s, u_r, sv_r, vh_r)),
                        num_streams=n_streams)


def relay_gain(p_s, p_r, lambda_s, noise_var_relay: float):
    """Amplify-and-forward gain ``sqrt(p_r / (p_s*lambda_s + sigma_R^2))``."""
    return np.sqrt(np.asarray(p_r) / (np.asarray(p_s) * np.asarray(lambda_s) + noise_var_relay))


def antenna_weights_from_omega(omega, subcarrier_index: int, num_streams: int) -> np.ndarray:
    """Split of a subcarrier's source power over its ``N`` spatial modes.

    Returns ``omega_l / sum(omega over the subcarrier)``; an all-zero block
    gives all-zero weights.
    """
    omega = np.asarray(omega, dtype=float)
    block = omega[subcarrier_index * num_streams:(subcarrier_index + 1) * num_streams]
    total = block.sum()
    if total <= 0:
        return np.zeros_like(block)
    return block / total


@dataclass(frozen=True)
class PrecoderSet:
    """Processing matrices of the SVD relay structure.

    ``f_source[i]`` is ``N_S x N`` (streams to antennas on subcarrier ``i``),
    ``f_relay`` is the ``K*N_R x K*N_R`` forwarding map whose block
    ``(j, i)`` carries subcarrier ``i`` of the first hop onto subcarrier
    ``j`` of the second hop, and ``f_dest[j]`` is ``N x N_D``.
    """

    f_source: np.ndarray
    f_relay: np.ndarray
    f_dest: np.ndarray
    pairing: Pairing
    gains: np.ndarray


def reconstruct_precoders(eig: EigenChannel, pairing: Pairing, p_s, p_r,
                          noise_var_relay: float) -> PrecoderSet:
    """Build source, relay and destination matrices for given subchannel powers.

    ``p_s[l]`` is the source power on first-hop subchannel ``l``, ``p_r[l2]``
    the relay power on second-hop subchannel ``l2`` (watts).
    """
    n = eig.num_streams
    k = eig.num_subcarriers
    p_s = np.asarray(p_s, dtype=float)
    p_r = np.asarray(p_r, dtype=float)
    if p_s.shape != (k * n,) or p_r.shape != (k * n,) or len(pairing) != k * n:
        raise ValueError("power vectors and pairing must have length K*N")
    n_s = eig.vh_s.shape[-1]
    n_r = eig.u_s.shape[1]

    f_source = np.zeros((k, n_s, n), dtype=complex)
    for i in range(k):
        total = p_s[i * n:(i + 1) * n].sum()
        if total <= 0:
            continue
        w = antenna_weights_from_omega(p_s, i, n)
        v = eig.vh_s[i].conj().T[:, :n]
        f_source[i] = math.sqrt(total) * v * np.sqrt(w)

    beta = relay_gain(p_s, p_r[pairing.perm], eig.lambda_s, noise_var_relay)
    f_relay = np.zeros((k * n_r, k * n_r), dtype=complex)
    for l, l2 in enumerate(pairing.perm):
        i, m = divmod(l, n)
        j, m2 = divmod(int(l2), n)
        v_r = eig.vh_r[j].conj().T[:, m2]
        u_s = eig.u_s[i][:, m]
        f_relay[j * n_r:(j + 1) * n_r, i * n_r:(i + 1) * n_r] += beta[l] * np.outer(v_r, u_s.conj())

    f_dest = np.stack([eig.u_r[j][:, :n].conj().T for j in range(k)])
    gains = np.sqrt(eig.lambda_r[pairing.perm]) * beta * np.sqrt(eig.lambda_s) * np.sqrt(p_s)
    return PrecoderSet(f_source, f_relay, f_dest, pairing, _freeze(gains))


def _block_diag(blocks: np.ndarray) -> np.ndarray:
    k, r, c = blocks.shape
    out = np.zeros((k * r, k * c), dtype=complex)
    for i in range(k):
        out[i * r:(i + 1) * r, i * c:(i + 1) * c] = blocks[i]
    return out


def composite_channel(real: ChannelRealization, pre: PrecoderSet) -> np.ndarray:
    """End-to-end ``KN x KN`` map from source streams to destination streams.

    Rows are reordered so that row ``l`` is the destination stream paired with
    source stream ``l``; with matched precoders the result is diagonal.
    """
    t = (_block_diag(pre.f_dest) @ _block_diag(real.h_relay) @ pre.f_relay
         @ _block_diag(real.h_source) @ _block_diag(pre.f_source))
    return t[pre.pairing.perm, :]
