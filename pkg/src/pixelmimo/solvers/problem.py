"""Problem instance shared by all coder optimizers.

Decision vectors ``b_all`` follow the column-major layout of
:meth:`CoderAssignment.b_all`: antenna ``a`` (transmit antennas first, then
receive antennas) owns bits ``a*S .. a*S+S-1``. Integer indices used by the
enumerating solvers read ``b_all[0]`` as the most significant bit, so
ascending indices are lexicographic order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..channel import (RANK_RTOL, CoderAssignment, EffectiveChannel,
                       WaterFillResult, _per_antenna, covariance_rates, rate,
                       water_fill, waterfill_rates)
from ..errors import DimensionError, SolverTimeout
from ..network import AntennaModel, bits_to_code, pattern_table

TIE_TOL = 1e-12


@dataclass
class RateSolution:
    """Outcome of one optimizer run.

    ``waterfill`` is the water-filled covariance for ``assignment`` when the
    solver ends with a covariance update; ``Q`` always holds the covariance
    that ``rate`` was evaluated with. ``history`` holds iterate log records.
    """

    assignment: CoderAssignment
    Q: np.ndarray
    rate: float
    method: str
    wall_time: float = 0.0
    eval_count: int = 0
    node_count: int = 0
    converged: bool = True
    waterfill: WaterFillResult | None = None
    history: list = field(default_factory=list)
    H: np.ndarray | None = None

    def b_all(self):
        return self.assignment.b_all()

    def to_dict(self):
        def cplx(a):
            a = np.asarray(a)
            return np.stack([a.real, a.imag], axis=-1).tolist()
        d = {
            'method': self.method,
            'rate': self.rate,
            'B_T': self.assignment.B_T.tolist(),
            'B_R': self.assignment.B_R.tolist(),
            'Q': cplx(self.Q),
            'wall_time': self.wall_time,
            'eval_count': self.eval_count,
            'node_count': self.node_count,
            'converged': self.converged,
        }
        if self.waterfill is not None:
            d['powers'] = self.waterfill.powers.tolist()
            d['water_level'] = self.waterfill.level
        return d


class Problem:
    """A joint coder/covariance design instance.

    Parameters
    ----------
    model_t, model_r : AntennaModel or sequence of AntennaModel
        One model shared by all antennas of a side, or one per antenna.
    H_V : ndarray, shape (2K, 2K)
    power, sigma2 : float
        Sum transmit power and noise power.
    n_t, n_r : int, optional
        Antenna counts; required when a single shared model is given.
    """

    def __init__(self, model_t, model_r, H_V, power, sigma2, n_t=None, n_r=None):
        if n_t is None:
            n_t = 1 if isinstance(model_t, AntennaModel) else len(model_t)
        if n_r is None:
            n_r = 1 if isinstance(model_r, AntennaModel) else len(model_r)
        if n_t < 1 or n_r < 1:
            raise DimensionError(f"need at least one antenna per side, got {n_t}x{n_r}")
        self.models_t = _per_antenna(model_t, n_t)
        self.models_r = _per_antenna(model_r, n_r)
        self.models = self.models_t + self.models_r
        S = {m.S for m in self.models}
        if len(S) != 1:
            raise DimensionError(f"all antennas must have the same S, got {sorted(S)}")
        two_k = {m.e_A.shape[0] for m in self.models}
        self.H_V = np.asarray(H_V, dtype=complex)
        if len(two_k) != 1 or self.H_V.shape != (two_k.pop(),) * 2:
            raise DimensionError(
                f"H_V shape {self.H_V.shape} does not match antenna patterns "
                f"of length {sorted(m.e_A.shape[0] for m in self.models)}")
        if power <= 0 or sigma2 <= 0:
            raise ValueError(f"need power > 0 and sigma2 > 0, got {power}, {sigma2}")
        self.S = S.pop()
        self.n_t, self.n_r = n_t, n_r
        self.n_vars = self.S * (n_t + n_r)
        self.power = float(power)
        self.sigma2 = float(sigma2)
        self.evals = 0
        self.deadline = None
        self._hp = {}

    # -- bookkeeping --------------------------------------------------------

    def _count(self, m=1):
        self.evals += m
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise SolverTimeout("solver exceeded its time budget")

    def split(self, b_all):
        b = np.asarray(b_all)
        if b.shape != (self.n_vars,):
            raise DimensionError(f"b_all has shape {b.shape}, expected ({self.n_vars},)")
        S = self.S
        return [bits_to_code(b[a * S:(a + 1) * S]) for a in range(self.n_t + self.n_r)]

    def assignment(self, b_all):
        return CoderAssignment.from_b_all(b_all, self.S, self.n_t, self.n_r)

    def index_to_bits(self, idx):
        n = self.n_vars
        return np.array([(idx >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.int8)

    @staticmethod
    def bits_to_index(bits):
        return bits_to_code(bits)

    # -- channels -----------------------------------------------------------

    def channel(self, b_all):
        codes = self.split(b_all)
        E = np.stack([pattern_table(m)[c] for m, c in zip(self.models, codes)], axis=1)
        E_T, E_R = E[:, :self.n_t], E[:, self.n_t:]
        return E_R.conj().T @ self.H_V @ E_T

    def _tx_images(self, j):
        """``H_V e`` for every pattern of transmit antenna ``j`` (rows)."""
        model = self.models_t[j]
        hp = self._hp.get(id(model))
        if hp is None:
            hp = pattern_table(model) @ self.H_V.T
            self._hp[id(model)] = hp
        return hp

    def channels_from_codes(self, codes):
        """Stack of channels for a (M, n_t + n_r) array of antenna codes."""
        codes = np.asarray(codes)
        n_t = self.n_t
        A = np.stack([pattern_table(m).conj()[codes[:, n_t + r]]
                      for r, m in enumerate(self.models_r)], axis=1)
        B = np.stack([self._tx_images(t)[codes[:, t]] for t in range(n_t)], axis=1)
        return A @ np.swapaxes(B, 1, 2)

    def codes_from_indices(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        S, n = self.S, self.n_vars
        mask = (1 << S) - 1
        return np.stack([(idx >> (n - S * (a + 1))) & mask
                         for a in range(self.n_t + self.n_r)], axis=1)

    def codes_from_bits(self, bits):
        bits = np.asarray(bits, dtype=np.int64)
        S = self.S
        weights = 1 << np.arange(S - 1, -1, -1)
        return np.stack([bits[:, a * S:(a + 1) * S] @ weights
                         for a in range(self.n_t + self.n_r)], axis=1)

    # -- objectives ---------------------------------------------------------

    def capacity(self, b_all):
        """Water-filled rate of one assignment (one evaluation)."""
        self._count()
        return water_fill(self.channel(b_all), self.power, self.sigma2).rate

    def fixed_rate(self, b_all, Q):
        """Rate of one assignment under a fixed covariance (one evaluation)."""
        self._count()
        return rate(self.channel(b_all), Q, self.sigma2)

    def capacity_batch(self, codes):
        self._count(len(codes))
        H = self.channels_from_codes(codes)
        sv = np.linalg.svd(H, compute_uv=False)
        gains = sv ** 2
        gains[sv <= RANK_RTOL * sv[:, :1]] = 0.0
        return waterfill_rates(gains, self.power, self.sigma2)

    def fixed_rate_batch(self, codes, Q):
        self._count(len(codes))
        return covariance_rates(self.channels_from_codes(codes), Q, self.sigma2)

    def solution(self, b_all, method, **kw):
        """Water-filled :class:`RateSolution` for ``b_all`` (not counted)."""
        H = self.channel(b_all)
        wf = water_fill(EffectiveChannel.from_matrix(H), self.power, self.sigma2)
        return RateSolution(assignment=self.assignment(b_all), Q=wf.Q, rate=wf.rate,
                            method=method, waterfill=wf, **kw)
