"""Loss, mixed squeezed states and purification by Fock filtering.

A zero-mean mixed squeezed state with variances (V_X, V_Y) is the pure
squeezed vacuum |psi(r0)> sent through a pure-loss channel L_T0.  Two-photon
subtraction commutes with that channel up to a rescaled displacement, which
caps the squeezing it can recover; the filter F = n - 1 removes the
single-photon population instead and lets Gaussification return a pure
state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    InvalidParameterError,
    NoSqueezingExtractableError,
    TruncationError,
    ZeroStateError,
)
from .fock import (
    TAIL_TOL,
    ProtocolOutcome,
    hermitize,
    loss_kraus_operators,
    normalize,
    norm_factor,
    number_operator,
    to_density,
    truncation_report,
)
from .gaussian import squeezed_vacuum
from .gaussification import CONV_TOL, MAX_ITERS, GaussifyRun, gaussify_iterate
from .subtraction import m_operator

KRAUS_TOL = 1e-14
COHERENCE_TOL = 1e-12


def loss_channel(rho, T0: float, weight_tol: float = KRAUS_TOL, check: bool = True) -> np.ndarray:
    """Pure-loss channel sum_j K_j rho K_j^dag; vectors are lifted first.

    Kraus terms are added until the accumulated trace is within weight_tol
    of the input trace.
    """
    rho = to_density(rho)
    if check:
        rep = truncation_report(rho)
        if not rep.clean:
            raise TruncationError("loss channel input is not truncation-clean",
                                  suggested_dim=None, tail_mass=rep.tail_mass)
    dim = rho.shape[0]
    total = norm_factor(rho)
    out = np.zeros_like(rho)
    for k in loss_kraus_operators(T0, dim):
        out += k @ rho @ k.conj().T
        if abs(total - np.trace(out).real) < weight_tol:
            break
    return hermitize(out)


def lossy_squeezed_state(r0: float, T0: float, dim: int) -> np.ndarray:
    """L_T0(|psi(r0)><psi(r0)|)."""
    psi = squeezed_vacuum(r0, dim)
    return loss_channel(psi / np.linalg.norm(psi), T0)


def variances_from_params(r0: float, T0: float) -> tuple[float, float]:
    """V_X = e^{2 r0} T0 + 1 - T0, V_Y = e^{-2 r0} T0 + 1 - T0."""
    return float(np.exp(2 * r0) * T0 + 1 - T0), float(np.exp(-2 * r0) * T0 + 1 - T0)


def params_from_variances(vx: float, vy: float) -> tuple[float, float]:
    """(r0, T0) with T0 = (V_X-1)(1-V_Y)/(V_X+V_Y-2) and e^{2 r0} = (V_X-1)/(1-V_Y)."""
    if not (vy < 1 < vx):
        raise InvalidParameterError("variances must satisfy V_Y < 1 < V_X", vx=vx, vy=vy)
    if vx * vy < 1 - 1e-12:
        raise InvalidParameterError("variances violate the uncertainty relation", vx=vx, vy=vy)
    s = vx + vy - 2
    if abs(vx * vy - 1) < 1e-14:
        T0 = 1.0
    else:
        T0 = min((vx - 1) * (1 - vy) / s, 1.0)
    return float(0.5 * np.log((vx - 1) / (1 - vy))), float(T0)


@dataclass(frozen=True)
class MixedSqueezedParams:
    vx: float
    vy: float
    r0: float
    T0: float

    @classmethod
    def from_variances(cls, vx: float, vy: float) -> "MixedSqueezedParams":
        r0, T0 = params_from_variances(vx, vy)
        return cls(vx, vy, r0, T0)

    @classmethod
    def from_loss(cls, r0: float, T0: float) -> "MixedSqueezedParams":
        if not 0.0 < T0 <= 1.0:
            raise InvalidParameterError("T0 must lie in (0, 1]", T0=T0)
        vx, vy = variances_from_params(r0, T0)
        return cls(vx, vy, r0, T0)

    def state(self, dim: int) -> np.ndarray:
        return lossy_squeezed_state(self.r0, self.T0, dim)


def check_commutation_identity(psi, T: float, delta_sq: complex) -> float:
    """max |M L_T(psi) M^dag - L_T(M_T psi M_T^dag)| with M_T = T a^2 - delta^2."""
    psi = np.asarray(psi, dtype=complex)
    dim = psi.shape[0]
    rho = to_density(psi)
    m = m_operator(delta_sq, dim)
    a2 = m + delta_sq * np.eye(dim)
    mt = T * a2 - delta_sq * np.eye(dim)
    lhs = m @ loss_channel(rho, T, check=False) @ m.conj().T
    rhs = loss_channel(mt @ rho @ mt.conj().T, T, check=False)
    return float(np.max(np.abs(lhs - rhs)))


def v_min_bound(vx: float, vy: float) -> float:
    """Lower bound (V_X V_Y - 1)/(V_X + V_Y - 2) on recoverable squeezed variance (= 1 - T0)."""
    s = vx + vy - 2
    if abs(vx * vy - 1) < 1e-14:
        return 0.0
    if s <= 0:
        raise InvalidParameterError("bound needs V_X + V_Y > 2", vx=vx, vy=vy)
    return float((vx * vy - 1) / s)


def effective_parameters(T: float, T0: float) -> tuple[float, float]:
    """Tapping with T after loss T0 equals tapping with T~ on the pure state, then loss T0~."""
    for name, v in (("T", T), ("T0", T0)):
        if not 0.0 < v <= 1.0:
            raise InvalidParameterError(f"{name} must lie in (0, 1]", **{name: v})
    t_eff = 1 - T0 * (1 - T)
    t0_eff = T0 * T / (T + (1 - T) * (1 - T0))
    return float(t_eff), float(t0_eff)


def fock_filter(state) -> ProtocolOutcome:
    """Apply F = n - 1 and renormalize.

    The weight ||F psi||^2 (or Tr F rho F) is reported as ``probability``; F
    is not a contraction, so it is a relative weight rather than a bound
    probability.
    """
    state = np.asarray(state, dtype=complex)
    dim = state.shape[0]
    f = np.arange(dim) - 1.0
    raw = f * state if state.ndim == 1 else (f[:, None] * state) * f[None, :]
    try:
        out, w = normalize(raw)
    except ZeroStateError:
        raise ZeroStateError("the filter annihilates the state", probability=0.0) from None
    if out.ndim == 2:
        out = hermitize(out)
    return ProtocolOutcome(out, w, {"operation": "n - 1"})


def sigma20(state) -> complex:
    """rho20 / rho00 of a vector or density matrix."""
    rho = to_density(state)
    if abs(rho[0, 0]) < 1e-300:
        raise NoSqueezingExtractableError("vacuum population vanishes")
    return complex(rho[2, 0] / rho[0, 0])


def purify_pipeline(rho_in, max_iters: int = MAX_ITERS, conv_tol: float = CONV_TOL) -> GaussifyRun:
    """Fock filter followed by iterative Gaussification.

    The converged state is the squeezed vacuum with tanh r = sqrt2 |sigma20|
    of the filtered state and squeezing axis set by arg sigma20.
    """
    rho_in = np.asarray(rho_in, dtype=complex)
    coh = rho_in[2] * np.conj(rho_in[0]) if rho_in.ndim == 1 else rho_in[2, 0]
    if abs(coh) <= COHERENCE_TOL:
        raise NoSqueezingExtractableError("input has no two-photon coherence rho20", rho20=abs(coh))
    filt = fock_filter(rho_in)
    sig = sigma20(filt.state)
    run = gaussify_iterate(filt.state, max_iters=max_iters, conv_tol=conv_tol)
    pred = np.sqrt(2) * abs(sig)
    run.metadata.update({
        "filter_weight": filt.probability,
        "sigma20": sig,
        "predicted_tanh_r": pred,
        "predicted_r": float(np.arctanh(pred)) if pred < 1 else None,
    })
    return run


def subtract_and_gaussify(rho_in, delta_sq: float, max_iters: int = MAX_ITERS,
                          conv_tol: float = CONV_TOL) -> GaussifyRun:
    """The M = a^2 - delta^2 route: subtract, then Gaussify."""
    rho = to_density(rho_in)
    m = m_operator(delta_sq, rho.shape[0])
    out, w = normalize(m @ rho @ m.conj().T)
    run = gaussify_iterate(hermitize(out), max_iters=max_iters, conv_tol=conv_tol)
    run.metadata["subtraction_weight"] = w
    return run
