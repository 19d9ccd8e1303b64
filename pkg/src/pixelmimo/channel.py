"""
Effective MIMO channels of pixel-antenna links and water-filling over them.

The virtual channel ``H_V`` (2K x 2K) couples sampled angle/polarization
pairs at the two terminals. Antenna coders select one normalized pattern per
antenna, and the effective channel is ``H = E_R^H H_V E_T``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidCovarianceError, ParseError
from .network import AntennaModel, pattern_table, bits_to_code, validate_coder
from .network import _dec, _enc

__all__ = ['ChannelConfig', 'VirtualChannel', 'CoderAssignment',
           'EffectiveChannel', 'WaterFillResult', 'sample_virtual_channel',
           'pattern_matrix', 'effective_channel', 'rate', 'water_fill',
           'waterfill_rates', 'covariance_rates', 'db_to_linear',
           'dbm_to_watts', 'power_from_snr', 'RANK_RTOL',
           'read_virtual_channel', 'write_virtual_channel', 'virtual_channel_to_dict']

RANK_RTOL = 1e-10
RATE_FLOOR = 1e-15
PSD_RTOL = 1e-8


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def power_from_snr(snr_db, sigma2, beta):
    """Transmit power for a receive SNR defined as ``P beta / sigma2``."""
    return db_to_linear(snr_db) * sigma2 / beta


@dataclass(frozen=True)
class ChannelConfig:
    beta0_db: float = -30.0
    d: float = 600.0
    d0: float = 1.0
    alpha: float = 3.5

    def __post_init__(self):
        if not (self.d > 0 and self.d0 > 0):
            raise ValueError(f"distances must be positive, got d={self.d}, d0={self.d0}")

    @property
    def beta(self):
        """Per-entry channel power ``beta0 (d/d0)^-alpha`` (linear)."""
        return db_to_linear(self.beta0_db) * (self.d / self.d0) ** (-self.alpha)


@dataclass(frozen=True, eq=False)
class VirtualChannel:
    H_V: np.ndarray
    beta: float
    config: ChannelConfig = field(default_factory=ChannelConfig)
    seed: int | None = None

    @property
    def K(self):
        return self.H_V.shape[0] // 2


def sample_virtual_channel(K, config=None, seed=0):
    """Rich-scattering channel with i.i.d. ``CN(0, beta)`` entries."""
    config = config or ChannelConfig()
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    beta = config.beta
    rng = np.random.default_rng(seed)
    shape = (2 * K, 2 * K)
    H_V = np.sqrt(beta / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    H_V.flags.writeable = False
    return VirtualChannel(H_V=H_V, beta=beta, config=config, seed=seed)


def virtual_channel_to_dict(channel):
    return {'K': channel.K, 'beta': channel.beta, 'H_V': _enc(channel.H_V),
            'seed': channel.seed, 'config': asdict(channel.config)}


def write_virtual_channel(channel, path):
    Path(path).write_text(json.dumps(virtual_channel_to_dict(channel)) + '\n')


def read_virtual_channel(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError('<root>', f'invalid JSON: {exc}') from None
    for key in ('K', 'beta', 'H_V'):
        if key not in d:
            raise ParseError(key, 'missing required field')
    K = d['K']
    if not isinstance(K, int) or K < 1:
        raise ParseError('K', f'expected a positive integer, got {K!r}')
    H_V = _dec(d['H_V'], (2 * K, 2 * K), 'H_V')
    try:
        config = ChannelConfig(**d.get('config', {}))
    except TypeError as exc:
        raise ParseError('config', str(exc)) from None
    return VirtualChannel(H_V=H_V, beta=float(d['beta']), config=config, seed=d.get('seed'))


@dataclass(frozen=True, eq=False)
class CoderAssignment:
    """Coder matrices; column ``j`` of ``B_T`` is the coder of transmit antenna ``j``."""

    B_T: np.ndarray
    B_R: np.ndarray

    def __post_init__(self):
        for name in ('B_T', 'B_R'):
            B = np.asarray(getattr(self, name))
            if B.ndim != 2:
                raise DimensionError(f"{name} must be 2-D, got shape {B.shape}")
            if not np.all((B == 0) | (B == 1)):
                raise DimensionError(f"{name} entries must be 0 or 1")
            object.__setattr__(self, name, B.astype(np.int8))
        if self.B_T.shape[0] != self.B_R.shape[0]:
            raise DimensionError(
                f"B_T has {self.B_T.shape[0]} rows but B_R has {self.B_R.shape[0]}")

    @property
    def S(self):
        return self.B_T.shape[0]

    def b_all(self):
        """Column-major ``vec(B_T)`` followed by ``vec(B_R)``."""
        return np.concatenate([self.B_T.T.ravel(), self.B_R.T.ravel()])

    @classmethod
    def from_b_all(cls, b, S, n_t, n_r):
        b = np.asarray(b, dtype=np.int8)
        if b.shape != (S * (n_t + n_r),):
            raise DimensionError(f"b_all has shape {b.shape}, expected ({S * (n_t + n_r)},)")
        return cls(b[:S * n_t].reshape(n_t, S).T, b[S * n_t:].reshape(n_r, S).T)

    @classmethod
    def zeros(cls, S, n_t, n_r):
        return cls(np.zeros((S, n_t)), np.zeros((S, n_r)))


def _per_antenna(models, n):
    if isinstance(models, AntennaModel):
        return [models] * n
    models = list(models)
    if len(models) != n:
        raise DimensionError(f"got {len(models)} antenna models for {n} antennas")
    return models


def pattern_matrix(models, B):
    """Stack the normalized patterns of each column coder of ``B``.

    ``models`` is one shared :class:`AntennaModel` or one per column.
    """
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[1] < 1:
        raise DimensionError(f"coder matrix must be S x N with N >= 1, got shape {B.shape}")
    models = _per_antenna(models, B.shape[1])
    cols = []
    for j, model in enumerate(models):
        b = validate_coder(B[:, j], model.S)
        try:
            cols.append(pattern_table(model)[bits_to_code(b)])
        except ArithmeticError as exc:
            exc.args = (f"column {j}: {exc}",)
            if hasattr(exc, 'column'):
                exc.column = j
            raise
    return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    """Channel matrix with its truncated SVD ``H = U diag(sv) V^H``."""

    H: np.ndarray
    sv: np.ndarray
    U: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.sv.shape[0]

    @classmethod
    def from_matrix(cls, H):
        H = np.atleast_2d(np.asarray(H, dtype=complex))
        U, s, Vh = np.linalg.svd(H, full_matrices=False)
        keep = s > RANK_RTOL * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, bool)
        D = int(keep.sum())
        return cls(H=H, sv=s[:D], U=U[:, :D], V=Vh[:D].conj().T)


def effective_channel(model_t, model_r, H_V, assignment):
    """``E_R^H H_V E_T`` for the given coders, with truncated SVD."""
    H_V = np.asarray(H_V)
    E_T = pattern_matrix(model_t, assignment.B_T)
    E_R = pattern_matrix(model_r, assignment.B_R)
    if H_V.shape != (E_R.shape[0], E_T.shape[0]):
        axis = 'rows (receive 2K)' if H_V.shape[0] != E_R.shape[0] else 'columns (transmit 2K)'
        raise DimensionError(
            f"H_V has shape {H_V.shape}, mismatched {axis}: "
            f"receive 2K={E_R.shape[0]}, transmit 2K={E_T.shape[0]}")
    return EffectiveChannel.from_matrix(E_R.conj().T @ H_V @ E_T)


def _as_matrix(H):
    return H.H if isinstance(H, EffectiveChannel) else np.atleast_2d(np.asarray(H, dtype=complex))


def rate(H, Q, sigma2):
    """``log2 det(I + H Q H^H / sigma2)`` in bits/s/Hz.

    Evaluated from the eigenvalues of the Hermitian PSD matrix
    ``H Q H^H`` (negative round-off clipped), so the result is real and
    non-negative.
    """
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    H = _as_matrix(H)
    Q = np.atleast_2d(np.asarray(Q, dtype=complex))
    if Q.shape != (H.shape[1], H.shape[1]):
        raise DimensionError(f"Q has shape {Q.shape}, expected {(H.shape[1],) * 2}")
    if not np.allclose(Q, Q.conj().T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise InvalidCovarianceError("Q is not Hermitian")
    Q = (Q + Q.conj().T) / 2
    tr = np.trace(Q).real
    if np.linalg.eigvalsh(Q).min() < -PSD_RTOL * max(tr, 0.0):
        raise InvalidCovarianceError("Q is not positive semidefinite")
    G = H @ Q @ H.conj().T
    ev = np.clip(np.linalg.eigvalsh((G + G.conj().T) / 2), 0.0, None)
    r = float(np.sum(np.log2(1.0 + ev / sigma2)))
    return 0.0 if r < RATE_FLOOR else r


def covariance_rates(H, Q, sigma2):
    """Vectorized :func:`rate` over a stack ``H`` of shape (M, N_R, N_T)."""
    G = H @ Q @ np.conj(np.swapaxes(H, -1, -2))
    ev = np.clip(np.linalg.eigvalsh(G), 0.0, None)
    r = np.sum(np.log2(1.0 + ev / sigma2), axis=-1)
    r[r < RATE_FLOOR] = 0.0
    return r


@dataclass(frozen=True, eq=False)
class WaterFillResult:
    Q: np.ndarray
    powers: np.ndarray
    level: float
    rate: float


def _waterfill(gains, P, sigma2):
    """Active-set water-filling over the last axis of ``gains`` (= sv^2).

    ``gains`` must be sorted in descending order; zero gains are never
    active. Returns ``(powers, level)`` with matching leading shape.
    """
    gains = np.asarray(gains, dtype=float)
    D = gains.shape[-1]
    with np.errstate(divide='ignore'):
        floor = np.where(gains > 0, sigma2 / np.where(gains > 0, gains, 1.0), np.inf)
    powers = np.zeros(gains.shape)
    level = np.zeros(gains.shape[:-1])
    if D == 0:
        return powers, level
    csum = np.cumsum(np.where(np.isfinite(floor), floor, 0.0), axis=-1)
    m = np.arange(1, D + 1)
    nu = (P + csum) / m
    valid = nu > floor
    # largest valid m; active sets are prefixes of the sorted gains
    best = np.where(valid, m, 0).max(axis=-1)
    has = best > 0
    idx = np.clip(best - 1, 0, None)
    level = np.where(has, np.take_along_axis(nu, idx[..., None], axis=-1)[..., 0], 0.0)
    powers = np.where(m <= best[..., None], level[..., None] - floor, 0.0)
    powers = np.where(np.isfinite(powers), np.clip(powers, 0.0, None), 0.0)
    return powers, level


def waterfill_rates(gains, P, sigma2):
    """Water-filled rate for stacks of descending eigen-gains ``sv^2``."""
    powers, _ = _waterfill(gains, P, sigma2)
    r = np.sum(np.log2(1.0 + powers * np.asarray(gains) / sigma2), axis=-1)
    return np.where(r < RATE_FLOOR, 0.0, r)


def water_fill(H, P, sigma2):
    """Capacity-achieving covariance ``Q = V diag(p) V^H`` for channel ``H``.

    Parameters
    ----------
    H : EffectiveChannel or array_like
        Channel (raw matrices are decomposed first).
    P : float
        Sum transmit power.
    sigma2 : float
        Noise power.
    """
    if P <= 0 or sigma2 <= 0:
        raise ValueError(f"need P > 0 and sigma2 > 0, got P={P}, sigma2={sigma2}")
    ch = H if isinstance(H, EffectiveChannel) else EffectiveChannel.from_matrix(H)
    n_t = ch.H.shape[1]
    if ch.rank == 0:
        return WaterFillResult(Q=np.zeros((n_t, n_t), complex), powers=np.zeros(0),
                               level=0.0, rate=0.0)
    powers, level = _waterfill(ch.sv ** 2, P, sigma2)
    Q = (ch.V * powers) @ ch.V.conj().T
    Q = (Q + Q.conj().T) / 2
    return WaterFillResult(Q=Q, powers=powers, level=float(level),
                           rate=rate(ch.H, Q, sigma2))
