"""
Multi-port network model of a single pixel antenna.

A pixel antenna with ``S`` RF switches is an ``(S+1)``-port network: one
antenna (feed) port and ``S`` pixel ports. Each switch terminates its pixel
port with either a short (``Z_on = 0``, bit 0) or a large finite load
(``Z_off``, bit 1). The far-field pattern is the current-weighted sum of the
fundamental port patterns, sampled over ``K`` angles and two polarizations
(entries ``0..K-1`` hold polarization 0, ``K..2K-1`` polarization 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DegeneratePatternError, DimensionError, ParseError,
                     SingularNetworkError, SynthesisError)

__all__ = ['AntennaModel', 'RadiationPattern', 'Z_OFF_DEFAULT',
           'validate_coder', 'code_to_bits', 'bits_to_code',
           'load_impedance', 'pixel_currents', 'radiation_pattern',
           'pattern_table', 'synthesize_antenna_model',
           'read_antenna_model', 'write_antenna_model',
           'antenna_model_to_dict', 'antenna_model_from_dict']

Z_OFF_DEFAULT = 1e6
Z_ON = 0.0
SINGULAR_COND = 1e12
DEGENERATE_RTOL = 1e-14
# Z_off must dominate the pixel impedances by this factor.
Z_OFF_DOMINANCE = 1e5
NEST_POOL = 8


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class AntennaModel:
    """Port impedances and fundamental patterns of one pixel antenna.

    Parameters
    ----------
    z_AA : complex
        Antenna-port self impedance.
    z_AP, z_PA : ndarray, shape (S,)
        Trans-impedances between the antenna port and the pixel ports.
        Only ``z_PA`` enters the pattern computation.
    Z_PP : ndarray, shape (S, S)
        Pixel-port impedance matrix; must be symmetric.
    e_A : ndarray, shape (2K,)
        Fundamental pattern of the antenna port.
    E_P : ndarray, shape (2K, S)
        Fundamental patterns of the pixel ports, one per column.
    Z_off : complex
        Load of an open ("off") switch.
    n_checks : int
        Number of random coders (besides all-zeros and all-ones) whose
        network is checked for invertibility at construction.
    """

    z_AA: complex
    z_AP: np.ndarray
    z_PA: np.ndarray
    Z_PP: np.ndarray
    e_A: np.ndarray
    E_P: np.ndarray
    Z_off: complex = Z_OFF_DEFAULT
    n_checks: int = 8
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, 'z_AA', complex(self.z_AA))
        set_(self, 'Z_off', complex(self.Z_off))
        for name in ('z_AP', 'z_PA', 'Z_PP', 'e_A', 'E_P'):
            set_(self, name, _frozen(getattr(self, name)))
        S = self.z_PA.shape[0] if self.z_PA.ndim == 1 else -1
        if self.z_PA.ndim != 1:
            raise DimensionError(f"z_PA must be a vector, got shape {self.z_PA.shape}")
        if self.z_AP.shape != (S,):
            raise DimensionError(f"z_AP has shape {self.z_AP.shape}, expected ({S},)")
        if self.Z_PP.shape != (S, S):
            raise DimensionError(f"Z_PP has shape {self.Z_PP.shape}, expected ({S}, {S})")
        if self.e_A.ndim != 1 or self.e_A.shape[0] % 2 or self.e_A.shape[0] == 0:
            raise DimensionError(f"e_A must have even length 2K >= 2, got shape {self.e_A.shape}")
        if self.E_P.shape != (self.e_A.shape[0], S):
            raise DimensionError(
                f"E_P has shape {self.E_P.shape}, expected ({self.e_A.shape[0]}, {S})")
        self._check_invariants()

    @property
    def S(self):
        return self.z_PA.shape[0]

    @property
    def K(self):
        return self.e_A.shape[0] // 2

    def _check_invariants(self):
        if not np.all(np.isfinite(self.Z_PP)) or not np.isfinite(self.Z_off):
            raise DimensionError("impedances must be finite")
        if not np.allclose(self.Z_PP, self.Z_PP.T, rtol=1e-12, atol=1e-12):
            raise DimensionError("Z_PP must be symmetric (reciprocal network)")
        zmax = np.abs(self.Z_PP).max() if self.S else 0.0
        if abs(self.Z_off) < Z_OFF_DOMINANCE * zmax:
            raise DimensionError(
                f"|Z_off| = {abs(self.Z_off):g} must be >= {Z_OFF_DOMINANCE:g} * "
                f"max|Z_PP| = {Z_OFF_DOMINANCE * zmax:g}")
        if not np.any(self.e_A):
            raise DimensionError("e_A must not be the zero vector")
        if self.S == 0:
            return
        rng = np.random.default_rng(0)
        coders = [np.zeros(self.S, dtype=np.int8), np.ones(self.S, dtype=np.int8)]
        coders += list(rng.integers(0, 2, size=(self.n_checks, self.S), dtype=np.int8))
        for b in coders:
            _network_matrix(self, b)

    def with_z_off(self, Z_off):
        """Copy of this model with a different open-switch load."""
        return AntennaModel(self.z_AA, self.z_AP, self.z_PA, self.Z_PP,
                            self.e_A, self.E_P, Z_off=Z_off, n_checks=self.n_checks)

    def equals(self, other):
        """Exact field-by-field equality."""
        return (isinstance(other, AntennaModel)
                and self.z_AA == other.z_AA and self.Z_off == other.Z_off
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ('z_AP', 'z_PA', 'Z_PP', 'e_A', 'E_P')))


@dataclass(frozen=True)
class RadiationPattern:
    e: np.ndarray
    e_bar: np.ndarray


def validate_coder(coder, S):
    """Return ``coder`` as an int8 vector, checking length and binarity."""
    b = np.asarray(coder)
    if b.ndim != 1 or b.shape[0] != S:
        raise DimensionError(f"coder has shape {b.shape}, expected ({S},)")
    if not np.all((b == 0) | (b == 1)):
        raise DimensionError(f"coder entries must be 0 or 1, got {b.tolist()}")
    return b.astype(np.int8)


def code_to_bits(code, S):
    """Integer code to coder; bit ``s`` is the ``(S-1-s)``-th binary digit."""
    return np.array([(code >> (S - 1 - s)) & 1 for s in range(S)], dtype=np.int8)


def bits_to_code(bits):
    code = 0
    for b in bits:
        code = (code << 1) | int(b)
    return code


def load_impedance(model, coder):
    """Diagonal load matrix ``diag((1-b) Z_on + b Z_off)``."""
    b = validate_coder(coder, model.S)
    return np.diag((1 - b) * Z_ON + b * model.Z_off).astype(complex)


def _network_matrix(model, b):
    """Row-equilibrated ``Z_PP + Z_L(b)`` and its row scales.

    Rows of open ports are dominated by ``Z_off``; scaling each row by its
    largest magnitude makes the condition number reflect genuine
    near-singularity rather than the on/off load contrast.
    """
    A = model.Z_PP + np.diag((1 - b) * Z_ON + b * model.Z_off)
    scale = np.abs(A).max(axis=1)
    if np.any(scale == 0):
        raise SingularNetworkError(
            f"Z_PP + Z_L(b) has a zero row for coder {b.tolist()}", coder=b.tolist())
    As = A / scale[:, None]
    if np.linalg.cond(As) > SINGULAR_COND:
        raise SingularNetworkError(
            f"Z_PP + Z_L(b) is singular (cond > {SINGULAR_COND:g}) for coder {b.tolist()}",
            coder=b.tolist())
    return As, scale


def pixel_currents(model, coder, i_A=1.0):
    """Pixel-port currents ``-(Z_L(b) + Z_PP)^{-1} z_PA i_A``."""
    b = validate_coder(coder, model.S)
    if model.S == 0:
        return np.zeros(0, dtype=complex)
    As, scale = _network_matrix(model, b)
    return -np.linalg.solve(As, model.z_PA / scale) * i_A


def radiation_pattern(model, coder):
    """Unnormalized and unit-norm pattern for ``coder`` with ``i_A = 1``."""
    i_P = pixel_currents(model, coder)
    e = model.e_A + model.E_P @ i_P
    norm = np.linalg.norm(e)
    if norm < DEGENERATE_RTOL * np.linalg.norm(model.e_A):
        raise DegeneratePatternError(
            f"radiation pattern vanishes for coder {np.asarray(coder).tolist()}")
    return RadiationPattern(e=e, e_bar=e / norm)


def pattern_table(model):
    """Normalized patterns for all ``2^S`` coders, row ``c`` for code ``c``.

    Cached on the model; treat the result as read-only.
    """
    table = model._cache.get('table')
    if table is None:
        S = model.S
        table = np.empty((2 ** S, 2 * model.K), dtype=complex)
        for c in range(2 ** S):
            table[c] = radiation_pattern(model, code_to_bits(c, S)).e_bar
        table.flags.writeable = False
        model._cache['table'] = table
    return table


def _cn(rng, shape, var=1.0):
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_antenna_model(S, K, seed, Z_off=Z_OFF_DEFAULT, max_tries=100):
    """Draw a random reciprocal, passive-like pixel antenna.

    ``Z_PP = M + M^T + delta I`` with ``M`` complex Gaussian and ``delta``
    shifting the real part to be positive definite (min eigenvalue 1).
    Trans-impedances are standard complex Gaussian, ``e_A`` is a unit-norm
    complex Gaussian vector and the pixel pattern entries have variance
    ``1/(2K)`` so every fundamental pattern has unit expected power.

    Draws are made for a pool of ``max(S, NEST_POOL)`` ports and the first
    ``S`` are kept, so for ``S <= NEST_POOL`` and a fixed seed the ``S``-port
    antenna is exactly the ``(S+1)``-port antenna with its last port removed.
    """
    if S < 0 or K < 1:
        raise DimensionError(f"need S >= 0 and K >= 1, got S={S}, K={K}")
    rng = np.random.default_rng(seed)
    n = max(S, NEST_POOL)
    last = None
    for _ in range(max_tries):
        M = _cn(rng, (n, n), 0.5)
        Z_pool = M + M.T
        Z_pool = Z_pool + (1.0 - np.linalg.eigvalsh(Z_pool.real).min()) * np.eye(n)
        z_PA = _cn(rng, n)[:S]
        z_AP = _cn(rng, n)[:S]
        z_AA = 1.0 + _cn(rng, ())
        e_A = _cn(rng, 2 * K)
        e_A = e_A / np.linalg.norm(e_A)
        E_P = _cn(rng, (2 * K, n), 1.0 / (2 * K))[:, :S]
        try:
            return AntennaModel(complex(z_AA), z_AP, z_PA, Z_pool[:S, :S], e_A, E_P,
                                Z_off=Z_off)
        except (DimensionError, SingularNetworkError) as exc:
            last = exc
    raise SynthesisError(
        f"no valid antenna model after {max_tries} draws (seed={seed}): {last}")


# -- JSON I/O ---------------------------------------------------------------

def _enc(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [_enc(x) for x in a]


def _dec(value, shape, name):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(name, "expected nested arrays of [re, im] numbers") from None
    if arr.shape != tuple(shape) + (2,):
        got = arr.shape[:-1] if arr.ndim and arr.shape[-1] == 2 else arr.shape
        raise ParseError(name, f"expected shape {tuple(shape)} of [re, im] pairs, got {got}")
    return arr[..., 0] + 1j * arr[..., 1]


def antenna_model_to_dict(model):
    return {
        'S': model.S, 'K': model.K,
        'z_AA': _enc(model.z_AA),
        'z_AP': _enc(model.z_AP), 'z_PA': _enc(model.z_PA),
        'Z_PP': _enc(model.Z_PP),
        'e_A': _enc(model.e_A), 'E_P': _enc(model.E_P),
        'Z_off': _enc(model.Z_off), 'Z_on': [0.0, 0.0],
    }


def antenna_model_from_dict(d):
    if not isinstance(d, dict):
        raise ParseError('<root>', 'expected a JSON object')
    for key in ('S', 'K', 'z_AA', 'z_AP', 'z_PA', 'Z_PP', 'e_A', 'E_P'):
        if key not in d:
            raise ParseError(key, 'missing required field')
    S, K = d['S'], d['K']
    if not isinstance(S, int) or S < 0:
        raise ParseError('S', f'expected a non-negative integer, got {S!r}')
    if not isinstance(K, int) or K < 1:
        raise ParseError('K', f'expected a positive integer, got {K!r}')
    if 'Z_on' in d and _dec(d['Z_on'], (), 'Z_on') != 0:
        raise ParseError('Z_on', 'the on-state load is fixed at 0')
    Z_off = _dec(d['Z_off'], (), 'Z_off') if 'Z_off' in d else Z_OFF_DEFAULT
    fields = dict(
        z_AA=_dec(d['z_AA'], (), 'z_AA'),
        z_AP=_dec(d['z_AP'], (S,), 'z_AP'),
        z_PA=_dec(d['z_PA'], (S,), 'z_PA'),
        Z_PP=_dec(d['Z_PP'], (S, S), 'Z_PP'),
        e_A=_dec(d['e_A'], (2 * K,), 'e_A'),
        E_P=_dec(d['E_P'], (2 * K, S), 'E_P'),
    )
    try:
        return AntennaModel(Z_off=complex(Z_off), **fields)
    except DimensionError as exc:
        raise ParseError('<model>', str(exc)) from None


def write_antenna_model(model, path):
    Path(path).write_text(json.dumps(antenna_model_to_dict(model)) + '\n')


def read_antenna_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError('<root>', f'invalid JSON: {exc}') from None
    return antenna_model_from_dict(d)
