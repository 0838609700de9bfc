"""Heralded Gaussification: two copies meet on a balanced beam splitter and
output B is projected onto the vacuum.

With the beam-splitter convention of :mod:`squeezedistill.gaussian`,
heralding B on vacuum maps a pure state with Bargmann function f(z) to
f(z/sqrt2) f(-z/sqrt2).  In Fock coefficients

    d_k = sum_n w_kn c_n c_{k-n},   w_kn = (-1)^(k-n) sqrt(C(k, n)) 2^(-k/2),

and the density-matrix version uses the same weights on both indices.
Coefficients of the output up to level k only involve input levels <= k, so
iterating on a truncated state is exact on every kept level.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import lgamma

import numpy as np

from .exceptions import DegenerateStateError, InvalidParameterError, ZeroStateError
from .fock import (
    GUARD,
    TAIL_TOL,
    TOL_ZERO,
    fidelity,
    hermitize,
    norm_factor,
    trace_distance,
    truncation_report,
)
from .gaussian import fit_gaussian, fit_squeezed_vacuum, ladder_moments, quadrature_variances

CONV_TOL = 1e-10
MAX_ITERS = 30
MARGIN_TOL = 1e-6
GROWTH_STEPS = 5


@lru_cache(maxsize=32)
def _weights(kmax: int) -> np.ndarray:
    w = np.zeros((kmax + 1, kmax + 1))
    for k in range(kmax + 1):
        n = np.arange(k + 1)
        logc = np.array([lgamma(k + 1.0) - lgamma(i + 1.0) - lgamma(k - i + 1.0) for i in n])
        w[k, : k + 1] = np.exp(0.5 * (logc - k * np.log(2.0))) * (-1.0) ** (k - n)
    w.setflags(write=False)
    return w


def _step_vector(c: np.ndarray):
    dim = c.shape[0]
    w = _weights(2 * dim - 2)
    d = np.zeros(2 * dim - 1, dtype=complex)
    for k in range(2 * dim - 1):
        n = np.arange(max(0, k - dim + 1), min(k, dim - 1) + 1)
        d[k] = np.sum(w[k, n] * c[n] * c[k - n])
    return d[:dim], float(np.sum(np.abs(d) ** 2).real)


def _step_matrix(rho: np.ndarray):
    dim = rho.shape[0]
    w = _weights(2 * dim - 2)
    out = np.zeros((dim, dim), dtype=complex)
    # anti-diagonal bookkeeping for the column index
    cols_l, cols_n = np.nonzero(np.tril(np.ones((dim, dim), dtype=bool)))
    cols_m = cols_l - cols_n
    diag_tail = 0.0
    for k in range(2 * dim - 1):
        n = np.arange(max(0, k - dim + 1), min(k, dim - 1) + 1)
        # g[n', m'] = sum_n w_kn rho[n, n'] rho[k-n, m']
        g = (w[k, n][:, None] * rho[n, :]).T @ rho[k - n, :]
        if k < dim:
            vals = w[cols_l, cols_n] * g[cols_n, cols_m]
            out[k, :] = np.bincount(cols_l, vals.real, dim) + 1j * np.bincount(cols_l, vals.imag, dim)
        else:
            diag_tail += float(np.real(np.sum(w[k, n] * g[n, k - n])))
    p = float(np.trace(out).real) + diag_tail
    return hermitize(out), p


def gaussify_step(state):
    """One heralded step.  Returns (normalized state, heralding probability).

    Vectors take the pure fast path; matrices the density-matrix path.  The
    probability includes the population pushed above the cutoff.
    """
    state = np.asarray(state, dtype=complex)
    nrm = norm_factor(state)
    unit = state / (np.sqrt(nrm) if state.ndim == 1 else nrm)
    if state.ndim == 1:
        out, p = _step_vector(unit)
    else:
        out, p = _step_matrix(unit)
    kept = norm_factor(out)
    if p < TOL_ZERO or kept < TOL_ZERO:
        raise ZeroStateError("vacuum heralding impossible", probability=p)
    out = out / (np.sqrt(kept) if out.ndim == 1 else kept)
    return out, p


# ---------------------------------------------------------------- invariants


def kernel_coefficients(state):
    """(sigma20, b, l) from low Fock elements: rho20/rho00, rho11/rho00, rho10/rho00."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        c = state
        r00 = abs(c[0]) ** 2
        r20, r11, r10 = c[2] * np.conj(c[0]), abs(c[1]) ** 2, c[1] * np.conj(c[0])
    else:
        r00, r20, r11, r10 = state[0, 0].real, state[2, 0], state[1, 1].real, state[1, 0]
    if r00 <= TOL_ZERO:
        raise DegenerateStateError("vacuum population vanishes; sigma20 undefined")
    return complex(r20 / r00), float(r11 / r00), complex(r10 / r00)


def fixed_point_margin(state) -> float:
    """sqrt2 |sigma20| + rho11/rho00 of a state with vanishing rho10.

    Both terms are invariants of the map when rho10 = 0 and the iteration
    converges iff the margin is below 1; for a pure input the limit has
    tanh r_G = sqrt2 |sigma20|.
    """
    sigma, b, _ = kernel_coefficients(state)
    return float(np.sqrt(2) * abs(sigma) + b)


@dataclass(frozen=True)
class IterationRecord:
    step: int
    vx: float
    vy: float
    residual: float
    probability: float
    tail_mass: float
    distance: float
    mean_n: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GaussifyRun:
    iterates: list
    probabilities: list
    converged: bool
    diverged: bool
    final_variances: tuple
    final_residual: float
    records: list = field(default_factory=list)
    truncation_limited: bool = False
    fitted_r: float | None = None
    fitted_phi: float | None = None
    margin: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.iterates[-1]

    @property
    def steps(self) -> int:
        return len(self.iterates) - 1

    def cumulative_probability(self) -> float:
        """Success probability of producing one output from 2^k copies:
        prod_j p_j^(2^(k-j))."""
        k = len(self.probabilities)
        logp = sum(2.0 ** (k - 1 - j) * np.log(p) for j, p in enumerate(self.probabilities))
        return float(np.exp(logp))

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "diverged": self.diverged,
            "truncation_limited": self.truncation_limited,
            "steps": self.steps,
            "copies": 2**self.steps,
            "cumulative_probability": self.cumulative_probability(),
            "final_vx": self.final_variances[0],
            "final_vy": self.final_variances[1],
            "final_residual": self.final_residual,
            "fitted_r": self.fitted_r,
            "fitted_phi": self.fitted_phi,
            "margin": self.margin,
            "iterations": [r.to_dict() for r in self.records],
        }


def _record(step, state, p, dist, guard=GUARD):
    vx, vy = quadrature_variances(state, warn=False)
    fit = fit_gaussian(state)
    _, _, mean_n = ladder_moments(state)
    tail = truncation_report(state, guard).tail_mass
    return IterationRecord(step, vx, vy, fit.residual, p, tail, dist, mean_n)


def gaussify_iterate(state, max_iters: int = MAX_ITERS, conv_tol: float = CONV_TOL,
                     tail_tol: float = TAIL_TOL, guard: int = GUARD) -> GaussifyRun:
    """Iterate :func:`gaussify_step` until successive states agree.

    Distance is trace distance for matrices and 1 - fidelity for vectors.
    Divergence is declared when the invariant margin reaches 1 (states with
    rho10 = 0), or when <n> grows for 5 consecutive steps while the guard
    band holds more than tail_tol.  A run whose tail exceeds tail_tol without
    diverging is flagged truncation_limited.
    """
    cur = np.asarray(state, dtype=complex)
    cur = cur / (np.sqrt(norm_factor(cur)) if cur.ndim == 1 else norm_factor(cur))
    iterates, probs = [cur], []
    records = [_record(0, cur, 1.0, float("nan"), guard)]
    converged = diverged = limited = False
    margin = None
    sigma, b, lin = kernel_coefficients(cur)
    if abs(lin) < 1e-12:
        margin = float(np.sqrt(2) * abs(sigma) + b)
        if margin >= 1 - MARGIN_TOL:
            diverged = True
    growth = 0
    for step in range(1, max_iters + 1):
        if diverged:
            break
        nxt, p = gaussify_step(cur)
        if nxt.ndim == 1:
            dist = max(1.0 - fidelity(nxt, cur), 0.0)
        else:
            dist = trace_distance(nxt, cur)
        rec = _record(step, nxt, p, dist, guard)
        growth = growth + 1 if rec.mean_n > records[-1].mean_n else 0
        iterates.append(nxt)
        probs.append(p)
        records.append(rec)
        cur = nxt
        if rec.tail_mass > tail_tol:
            limited = True
            if margin is None and growth >= GROWTH_STEPS:
                diverged = True
                break
        if dist < conv_tol:
            converged = True
            break
    last = records[-1]
    fitted_r = fitted_phi = None
    pure = cur.ndim == 1 or np.sum(np.abs(cur) ** 2) > 1 - 1e-6
    if not diverged and pure:
        fit = fit_squeezed_vacuum(cur)
        fitted_r, fitted_phi = fit.r, fit.phi
    return GaussifyRun(iterates, probs, converged, diverged, (last.vx, last.vy), last.residual,
                       records, limited, fitted_r, fitted_phi, margin)


# ---------------------------------------------------------------- closed forms


def gaussified_tanh(r: float, delta_sq: float) -> float:
    """tanh r_G = (3 tanh r - delta^2) tanh r / (tanh r - delta^2)."""
    t = np.tanh(r)
    if abs(t - delta_sq) < 1e-15:
        raise DegenerateStateError("tanh r = delta^2 removes the vacuum amplitude", r=r, delta_sq=delta_sq)
    return float((3 * t - delta_sq) * t / (t - delta_sq))


def gaussified_squeeze_analytic(r: float, delta_sq: float) -> float | None:
    """r_G of the Gaussified subtracted state, or None when the iteration diverges."""
    tg = gaussified_tanh(r, delta_sq)
    if abs(tg) >= 1:
        return None
    return float(np.arctanh(tg))


def delta_sq_for_target(r: float, r_g: float) -> float:
    """delta^2 = (tanh r_G - 3 tanh r) tanh r / (tanh r_G - tanh r)."""
    if r <= 0:
        raise InvalidParameterError("input squeezing must be positive", r=r)
    t, tg = np.tanh(r), np.tanh(r_g)
    if abs(tg - t) < 1e-15:
        raise InvalidParameterError("r_G = r makes delta^2 singular", r=r, r_g=r_g)
    return float((tg - 3 * t) * t / (tg - t))
