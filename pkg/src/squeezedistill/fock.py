"""Dense linear algebra on truncated Fock spaces.

Single-mode states are plain numpy arrays: a 1-D array of amplitudes over
|0>, ..., |N-1> or an N x N density matrix.  Two-mode objects are wrapped in
:class:`TwoModeState`, whose flat index is ``a * dim_b + b`` (A-major, the
same ordering as ``np.kron``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import lgamma

import numpy as np

from .exceptions import (
    InvalidDimensionError,
    InvalidParameterError,
    InvalidStateError,
    KindMismatchError,
    ZeroStateError,
)

TOL_NORM = 1e-10
TOL_HERM = 1e-10
TOL_PSD = 1e-9
TOL_ZERO = 1e-14
GUARD = 5
TAIL_TOL = 1e-9
DEFAULT_DIM = 40


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"truncation dimension must be an integer >= 2, got {dim}", dim=dim)
    return int(dim)


def _readonly(m: np.ndarray) -> np.ndarray:
    m.setflags(write=False)
    return m


@lru_cache(maxsize=64)
def annihilation(dim: int) -> np.ndarray:
    """Lowering operator with <n-1|a|n> = sqrt(n)."""
    dim = _check_dim(dim)
    return _readonly(np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex))


@lru_cache(maxsize=64)
def creation(dim: int) -> np.ndarray:
    return _readonly(annihilation(dim).T.copy())


@lru_cache(maxsize=64)
def number_operator(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return _readonly(np.diag(np.arange(dim, dtype=float)).astype(complex))


def identity(dim: int) -> np.ndarray:
    return np.eye(_check_dim(dim), dtype=complex)


def fock_state(n: int, dim: int) -> np.ndarray:
    """Number state |n> as a vector."""
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"|{n}> does not fit in dim={dim}", n=n, dim=dim)
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return v


@lru_cache(maxsize=64)
def _log_factorials(dim: int) -> np.ndarray:
    return np.array([lgamma(k + 1.0) for k in range(dim)])


def loss_kraus_operators(T0: float, dim: int, weight_tol: float = 0.0) -> list[np.ndarray]:
    """Kraus family K_j = ((1-T0)^(j/2)/sqrt(j!)) T0^(n/2) a^j of the pure-loss channel.

    Matrix elements are <m|K_j|m+j> = sqrt(C(m+j, j)) (1-T0)^(j/2) T0^(m/2).
    Operators whose largest squared element falls below ``weight_tol`` end
    the list.
    """
    dim = _check_dim(dim)
    if not 0.0 < T0 <= 1.0:
        raise InvalidParameterError("transmittance must lie in (0, 1]", T0=T0)
    if T0 == 1.0:
        return [np.eye(dim, dtype=complex)]
    lf = _log_factorials(dim)
    ops = []
    for j in range(dim):
        m = np.arange(dim - j)
        vals = np.exp(0.5 * (lf[m + j] - lf[m] - lf[j]) + 0.5 * j * np.log1p(-T0) + 0.5 * m * np.log(T0))
        if j > 0 and weight_tol and np.max(vals) ** 2 < weight_tol:
            break
        k = np.zeros((dim, dim), dtype=complex)
        k[m, m + j] = vals
        ops.append(k)
    return ops


# ---------------------------------------------------------------- states


def is_vector(x) -> bool:
    return np.ndim(x) == 1


def to_density(x) -> np.ndarray:
    """Lift a vector to |x><x|; matrices pass through."""
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return np.outer(x, x.conj())
    return x


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def norm_factor(x) -> float:
    """Squared norm of a vector or trace of a matrix."""
    x = np.asarray(x)
    if x.ndim == 1:
        return float(np.vdot(x, x).real)
    return float(np.trace(x).real)


def normalize(x, tol_zero: float = TOL_ZERO):
    """Return ``(unit_state, factor)`` where factor is the squared norm (vectors)
    or the trace (matrices) before normalization."""
    if isinstance(x, TwoModeState):
        data, f = normalize(x.data, tol_zero)
        return TwoModeState(data, x.dim_a, x.dim_b), f
    x = np.asarray(x, dtype=complex)
    f = norm_factor(x)
    if not np.isfinite(f) or f < tol_zero:
        raise ZeroStateError("state has vanishing norm", probability=max(f, 0.0) if np.isfinite(f) else 0.0)
    if x.ndim == 1:
        return x / np.sqrt(f), f
    return x / f, f


def validate_density(rho, tol_norm=TOL_NORM, tol_herm=TOL_HERM, tol_psd=TOL_PSD) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError("density matrix must be square", shape=rho.shape)
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if herm > tol_herm:
        raise InvalidStateError("matrix is not Hermitian", deviation=herm)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol_norm:
        raise InvalidStateError("density matrix trace is not 1", trace=tr)
    lo = np.linalg.eigvalsh(hermitize(rho))[0]
    if lo < -tol_psd:
        raise InvalidStateError("density matrix has a negative eigenvalue", min_eigenvalue=lo)
    return rho


def purity(rho) -> float:
    """Tr(rho^2) of a valid density matrix; a normalized vector gives 1."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = to_density(rho)
    rho = validate_density(rho)
    return float(np.sum(np.abs(rho) ** 2))


def expectation(op: np.ndarray, state) -> complex:
    state = np.asarray(state)
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    return complex(np.trace(op @ state))


def _psd_factor(rho: np.ndarray, cutoff: float = 1e-13) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(rho))
    keep = w > cutoff * max(w[-1], 1.0)
    return v[:, keep] * np.sqrt(w[keep])


def fidelity(x, y) -> float:
    """Uhlmann fidelity (squared convention, F = 1 for identical states).

    Mixed states are factored as rho = A A^dag from their dominant
    eigenvectors; F is then the squared nuclear norm of A^dag B.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.ndim == 1 and y.ndim == 1:
        return float(abs(np.vdot(x, y)) ** 2)
    if x.ndim == 1:
        return float(np.vdot(x, y @ x).real)
    if y.ndim == 1:
        return float(np.vdot(y, x @ y).real)
    a, b = _psd_factor(x), _psd_factor(y)
    s = np.linalg.svd(a.conj().T @ b, compute_uv=False)
    return float(np.sum(s) ** 2)


def trace_distance(x, y) -> float:
    d = to_density(x) - to_density(y)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(hermitize(d)))))


def embed(x, dim: int) -> np.ndarray:
    """Zero-pad a single-mode state (or crop it) to ``dim`` levels."""
    x = np.asarray(x, dtype=complex)
    n = min(dim, x.shape[0])
    if x.ndim == 1:
        out = np.zeros(dim, dtype=complex)
        out[:n] = x[:n]
    else:
        out = np.zeros((dim, dim), dtype=complex)
        out[:n, :n] = x[:n, :n]
    return out


# ---------------------------------------------------------------- two modes


@dataclass(frozen=True)
class TwoModeState:
    """Joint state of modes A and B.

    ``data`` is either a vector of length dim_a*dim_b or a square matrix of
    that size, index ``a * dim_b + b``.
    """

    data: np.ndarray
    dim_a: int
    dim_b: int

    def __post_init__(self):
        n = self.dim_a * self.dim_b
        d = np.asarray(self.data, dtype=complex)
        if d.shape not in ((n,), (n, n)):
            raise InvalidDimensionError(
                "data does not match dim_a*dim_b", shape=d.shape, dim_a=self.dim_a, dim_b=self.dim_b
            )
        object.__setattr__(self, "data", d)

    @property
    def is_vector(self) -> bool:
        return self.data.ndim == 1

    def amplitudes(self) -> np.ndarray:
        """Vector data reshaped to ``[a, b]``."""
        if not self.is_vector:
            raise KindMismatchError("amplitudes() needs a vector-kind state")
        return self.data.reshape(self.dim_a, self.dim_b)

    def to_density(self) -> "TwoModeState":
        if self.is_vector:
            return TwoModeState(np.outer(self.data, self.data.conj()), self.dim_a, self.dim_b)
        return self

    def padded(self, dim_a: int, dim_b: int) -> "TwoModeState":
        """Zero-pad (or crop) each mode."""
        na, nb = min(dim_a, self.dim_a), min(dim_b, self.dim_b)
        if self.is_vector:
            out = np.zeros((dim_a, dim_b), dtype=complex)
            out[:na, :nb] = self.amplitudes()[:na, :nb]
            return TwoModeState(out.ravel(), dim_a, dim_b)
        t = self.data.reshape(self.dim_a, self.dim_b, self.dim_a, self.dim_b)
        out = np.zeros((dim_a, dim_b, dim_a, dim_b), dtype=complex)
        out[:na, :nb, :na, :nb] = t[:na, :nb, :na, :nb]
        n = dim_a * dim_b
        return TwoModeState(out.reshape(n, n), dim_a, dim_b)


def tensor(x, y) -> TwoModeState:
    """Kronecker product of two single-mode objects of the same kind."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.ndim != y.ndim or x.ndim not in (1, 2):
        raise KindMismatchError("tensor needs two vectors or two matrices", kinds=(x.ndim, y.ndim))
    return TwoModeState(np.kron(x, y), x.shape[0], y.shape[0])


def local_operator(op_a=None, op_b=None, dim_a=None, dim_b=None) -> np.ndarray:
    """op_a (x) op_b with identities filled in for missing factors."""
    a = np.eye(dim_a, dtype=complex) if op_a is None else np.asarray(op_a)
    b = np.eye(dim_b, dtype=complex) if op_b is None else np.asarray(op_b)
    return np.kron(a, b)


def partial_trace(s: TwoModeState, keep: str = "A") -> np.ndarray:
    """Reduced density matrix of mode ``keep`` ('A' or 'B')."""
    if not isinstance(s, TwoModeState):
        raise KindMismatchError("partial_trace expects a TwoModeState")
    if s.is_vector:
        raise KindMismatchError("vector-kind state: lift with to_density() first")
    t = s.data.reshape(s.dim_a, s.dim_b, s.dim_a, s.dim_b)
    keep = str(keep).upper()
    if keep in ("A", "0"):
        return np.einsum("ibjb->ij", t)
    if keep in ("B", "1"):
        return np.einsum("aiaj->ij", t)
    raise KindMismatchError(f"unknown mode id {keep!r}", keep=keep)


def reduced_state(psi: TwoModeState, keep: str = "A") -> np.ndarray:
    """Reduced density matrix computed directly from a vector (no dim^4 lift)."""
    if not psi.is_vector:
        return partial_trace(psi, keep)
    m = psi.amplitudes()
    if str(keep).upper() in ("A", "0"):
        return m @ m.conj().T
    return m.T @ m.conj()


def project_mode_b(psi: TwoModeState, bra_coeffs) -> np.ndarray:
    """Contract mode B of a two-mode vector with a bra given by its coefficients.

    Returns the unnormalized A-mode vector  sum_b bra_coeffs[b] psi[a, b].
    """
    if not psi.is_vector:
        raise KindMismatchError("project_mode_b expects a vector-kind state")
    c = np.zeros(psi.dim_b, dtype=complex)
    bra_coeffs = np.asarray(bra_coeffs, dtype=complex)
    n = min(psi.dim_b, bra_coeffs.shape[0])
    c[:n] = bra_coeffs[:n]
    return psi.amplitudes() @ c


# ---------------------------------------------------------------- diagnostics


@dataclass(frozen=True)
class TruncationReport:
    tail_mass: float
    guard: int
    tail_tol: float
    dim: int
    clean: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "clean", bool(self.tail_mass < self.tail_tol))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "guard": self.guard,
            "tail_mass": self.tail_mass,
            "tail_tol": self.tail_tol,
            "clean": self.clean,
        }


def _populations(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 1:
        return np.abs(x) ** 2
    return np.real(np.diag(x))


def truncation_report(state, guard: int = GUARD, tail_tol: float = TAIL_TOL) -> TruncationReport:
    """Relative population in the top ``guard`` Fock levels.

    For two-mode states the larger of the two marginal tails is reported.
    """
    if isinstance(state, TwoModeState):
        if state.is_vector:
            p = np.abs(state.amplitudes()) ** 2
        else:
            p = np.real(np.diag(state.data)).reshape(state.dim_a, state.dim_b)
        total = p.sum()
        pa, pb = p.sum(axis=1), p.sum(axis=0)
        tail = max(pa[-guard:].sum(), pb[-guard:].sum()) / total if total > 0 else 0.0
        return TruncationReport(float(tail), guard, tail_tol, max(state.dim_a, state.dim_b))
    p = _populations(state)
    total = p.sum()
    tail = p[-guard:].sum() / total if total > 0 else 0.0
    return TruncationReport(float(tail), guard, tail_tol, p.shape[0])


# ---------------------------------------------------------------- outcomes and dumps


@dataclass(frozen=True)
class ProtocolOutcome:
    """Normalized conditional state plus the heralding probability."""

    state: object
    probability: float
    metadata: dict = field(default_factory=dict)


def dump_state(state) -> dict:
    """JSON-ready dict {dim, kind, re, im}; matrices are row-major nested lists."""
    if isinstance(state, TwoModeState):
        kind = "two-mode-vector" if state.is_vector else "two-mode-matrix"
        dim = [state.dim_a, state.dim_b]
        data = state.data
    else:
        data = np.asarray(state, dtype=complex)
        kind = "vector" if data.ndim == 1 else "matrix"
        dim = data.shape[0]
    return {"dim": dim, "kind": kind, "re": data.real.tolist(), "im": data.imag.tolist()}


def load_state(obj: dict):
    data = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    kind = obj["kind"]
    if kind in ("vector", "matrix"):
        expect = 1 if kind == "vector" else 2
        if data.ndim != expect or data.shape[0] != obj["dim"]:
            raise InvalidStateError("state dump does not match its declared kind/dim", kind=kind)
        return data
    if kind in ("two-mode-vector", "two-mode-matrix"):
        da, db = obj["dim"]
        return TwoModeState(data, int(da), int(db))
    raise InvalidStateError(f"unknown state kind {kind!r}", kind=kind)
