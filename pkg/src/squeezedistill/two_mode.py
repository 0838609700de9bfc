"""Two-mode squeezed vacuum distillation and GKP-style breeding.

TMSV |Psi(r)> = sqrt(1-l^2) sum_n l^n |n, n>, l = tanh r, equals the balanced
beam splitter acting on S(r)|0> (x) S(-r)|0>.  Subtracting one photon from
each mode and undoing the beam splitter leaves two single-mode states whose
reduced density matrix is known in closed form.  Breeding interferes two
squeezed single photons and heralds on a quadrature value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import InvalidParameterError, TruncationError, ZeroStateError
from .fock import (
    GUARD,
    TAIL_TOL,
    ProtocolOutcome,
    TwoModeState,
    _check_dim,
    fidelity,
    normalize,
    project_mode_b,
    reduced_state,
    tensor,
    truncation_report,
)
from .gaussian import (
    apply_beam_splitter,
    hermite_functions,
    homodyne_condition,
    squeezed_pair,
    squeezed_single_photon,
    squeezed_vacuum,
    theta_from_transmittance,
)
from .subtraction import omega_ancilla_state, subtracted_variances_analytic

BALANCED = np.pi / 4


def tmsv_state(r: float, dim: int, check: bool = True) -> TwoModeState:
    """Schmidt-diagonal TMSV truncated to dim levels per mode (not renormalized)."""
    dim = _check_dim(dim)
    lam = np.tanh(r)
    n = np.arange(dim)
    coeff = np.sqrt(1 - lam**2) * lam**n
    if check:
        tail = float(np.sum(coeff[-GUARD:] ** 2) / np.sum(coeff**2))
        if tail >= TAIL_TOL:
            need = dim
            while np.tanh(abs(r)) ** (2 * (need - GUARD)) >= TAIL_TOL:
                need += 1
            raise TruncationError(f"TMSV r={r} is not truncation-clean at dim={dim}",
                                  suggested_dim=need, r=r, dim=dim)
    m = np.zeros((dim, dim), dtype=complex)
    m[n, n] = coeff
    return TwoModeState(m.ravel(), dim, dim)


def tmsv_from_squeezers(r: float, dim: int) -> TwoModeState:
    """Balanced beam splitter on S(r)|0> (x) S(-r)|0>, cropped to dim levels per mode.

    The squeezers are expanded to 2*dim levels so that every kept amplitude is exact.
    """
    prod = tensor(squeezed_vacuum(r, 2 * dim), squeezed_vacuum(-r, 2 * dim))
    return apply_beam_splitter(prod, BALANCED).padded(dim, dim)


def joint_subtract(state: TwoModeState) -> ProtocolOutcome:
    """Apply a (x) b, return the normalized state and the squared norm."""
    if not state.is_vector:
        raise InvalidParameterError("joint_subtract expects a two-mode vector")
    amps = state.amplitudes()
    out = np.zeros_like(amps)
    sa = np.sqrt(np.arange(1, state.dim_a))
    sb = np.sqrt(np.arange(1, state.dim_b))
    out[:-1, :-1] = sa[:, None] * amps[1:, 1:] * sb[None, :]
    try:
        st, p = normalize(TwoModeState(out.ravel(), state.dim_a, state.dim_b))
    except ZeroStateError:
        raise ZeroStateError("a (x) b annihilates the state", probability=0.0) from None
    return ProtocolOutcome(st, p, {"heralding": "one photon from each mode"})


def joint_subtraction_closed_form(r: float, dim: int) -> TwoModeState:
    """(sinh r/sqrt2) U [S(r) (x) S(-r)] [sinh r (|2,0> - |0,2>) + sqrt2 cosh r |0,0>] (unnormalized).

    Built from 2*dim-level squeezed states and cropped to dim levels per mode.
    """
    s, c = np.sinh(r), np.cosh(r)
    m = 2 * dim
    a0, a2 = squeezed_pair(r, m)
    b0, b2 = squeezed_pair(-r, m)
    inner = s * (np.kron(a2, b0) - np.kron(a0, b2)) + np.sqrt(2) * c * np.kron(a0, b0)
    out = apply_beam_splitter(TwoModeState(inner, m, m), BALANCED).padded(dim, dim)
    return TwoModeState(out.data * s / np.sqrt(2), dim, dim)


def decouple_and_reduce(state: TwoModeState) -> np.ndarray:
    """Undo the balanced beam splitter and trace out mode B.

    The inverse splitter is applied exactly, so the returned matrix has
    dim_a + dim_b - 1 levels.
    """
    if not state.is_vector:
        raise InvalidParameterError("decouple_and_reduce expects a two-mode vector")
    out = apply_beam_splitter(state, BALANCED, inverse=True)
    rho = reduced_state(out, "A")
    return rho / np.trace(rho).real


def reduced_state_closed_form(r: float, dim: int) -> np.ndarray:
    """(1/(2cosh 2r)) S(r)[|phi><phi| + sinh^2 r |0><0|]S^dag(r), |phi> = sqrt2 cosh r|0> + sinh r|2>."""
    s0, s2 = squeezed_pair(r, dim)
    phi = np.sqrt(2) * np.cosh(r) * s0 + np.sinh(r) * s2
    rho = np.outer(phi, phi.conj()) + np.sinh(r) ** 2 * np.outer(s0, s0.conj())
    return rho / (2 * np.cosh(2 * r))


def reduced_purity_analytic(r: float) -> float:
    return float(1 - np.sinh(r) ** 4 / (2 * np.cosh(2 * r) ** 2))


def reduced_variances_analytic(r: float) -> tuple[float, float]:
    """V_X = e^{2r}[1 + 2 e^r sinh r/cosh 2r], V_Y = e^{-2r}[1 - 2 e^{-r} sinh r/cosh 2r]."""
    k = np.sinh(r) / np.cosh(2 * r)
    return float(np.exp(2 * r) * (1 + 2 * np.exp(r) * k)), float(np.exp(-2 * r) * (1 - 2 * np.exp(-r) * k))


@dataclass(frozen=True)
class ModeComparison:
    r: float
    vy_input: float
    vy_single_mode: float
    vy_two_mode: float

    @property
    def single_mode_better(self) -> bool:
        return self.vy_single_mode <= self.vy_two_mode

    def to_dict(self) -> dict:
        return {"r": self.r, "vy_input": self.vy_input, "vy_single_mode": self.vy_single_mode,
                "vy_two_mode": self.vy_two_mode, "single_mode_better": self.single_mode_better}


def compare_single_vs_two_mode(r: float) -> ModeComparison:
    """V_Y after a^2 on |psi(r)> versus after joint subtraction on the TMSV."""
    if r <= 0:
        raise InvalidParameterError("comparison needs r > 0", r=r)
    return ModeComparison(r, float(np.exp(-2 * r)), subtracted_variances_analytic(r, 0.0)[1],
                          reduced_variances_analytic(r)[1])


# ---------------------------------------------------------------- breeding


def breed_gkp(r: float, x: float, dim: int, quadrature: str = "x", window: float | None = None,
              zero_tol: float = 1e-14) -> ProtocolOutcome:
    """Interfere S(r)|1> (x) S(r)|1> on a balanced splitter and herald mode B at x.

    ``x`` is in units of x = X/sqrt2.  The output is cropped to ``dim`` levels;
    the probability counts the full conditional norm.  The ideal measurement returns a vector
    with the heralding density as probability; a finite ``window`` returns the
    mixed state accepted inside [x - w/2, x + w/2] with its probability.
    """
    s1 = squeezed_single_photon(r, dim)
    joint = apply_beam_splitter(tensor(s1, s1), BALANCED)
    raw = homodyne_condition(joint, x, quadrature, window)
    try:
        _, p = normalize(raw, tol_zero=zero_tol)
        st, _ = normalize(raw[:dim] if raw.ndim == 1 else raw[:dim, :dim], tol_zero=zero_tol)
    except ZeroStateError:
        raise ZeroStateError("conditional amplitude vanishes", probability=0.0, r=r, x=x) from None
    meta = {"x": x, "quadrature": quadrature, "window": window,
            "truncation": truncation_report(st).to_dict()}
    return ProtocolOutcome(st, p, meta)


def breeding_closed_form(r: float, x: float, dim: int) -> np.ndarray:
    """S(r)[(1 - 2 e^{-2r} x^2)|0> + sqrt2 |2>] (unnormalized)."""
    s0, s2 = squeezed_pair(r, dim)
    return (1 - 2 * np.exp(-2 * r) * x**2) * s0 + np.sqrt(2) * s2


def unsqueezed_coefficients(state, r: float, phi: float = 0.0) -> tuple[complex, complex]:
    """Overlaps <0|S^dag|psi> and <2|S^dag|psi> for S = S(r e^{i phi})."""
    state = np.asarray(state, dtype=complex)
    s0, s2 = squeezed_pair(r, state.shape[0], phi)
    return complex(np.vdot(s0, state)), complex(np.vdot(s2, state))


def manifold_residual(state, r: float, phi: float = 0.0) -> float:
    """Weight of S^dag(r) psi outside span{|0>, |2>}."""
    state = np.asarray(state, dtype=complex)
    state = state / np.linalg.norm(state)
    c0, c2 = unsqueezed_coefficients(state, r, phi)
    return float(max(1 - abs(c0) ** 2 - abs(c2) ** 2, 0.0))


@dataclass(frozen=True)
class ManifoldFit:
    r: float
    phi: float
    residual: float
    c0: complex
    c2: complex


def fit_manifold(state, phi: float = 0.0, r_bounds=(-2.5, 2.5)) -> ManifoldFit:
    """Scan r' for the closest member of {S(r' e^{i phi})(c0|0> + c2|2>)}."""
    state = np.asarray(state, dtype=complex)
    grid = np.linspace(r_bounds[0], r_bounds[1], 101)
    vals = [manifold_residual(state, g, phi) for g in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(lambda g: manifold_residual(state, g, phi), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    c0, c2 = unsqueezed_coefficients(state / np.linalg.norm(state), res.x, phi)
    return ManifoldFit(float(res.x), phi, float(res.fun), c0, c2)


def generalized_subtraction(r_signal: float, r_ancilla: float, T: float, dim: int) -> ProtocolOutcome:
    """Two-photon subtraction with a squeezed ancilla in the tapping splitter's spare port.

    Signal S(r_signal)|0> and ancilla S(r_ancilla)|0> meet at a splitter of
    transmittance T; the reflected mode is split on a balanced splitter with
    vacuum and one photon is detected in each output, which projects it onto
    |2> (the vacuum-ancilla limit of the heralding state).
    """
    if not 0.0 < T < 1.0:
        raise InvalidParameterError("transmittance must lie in (0, 1)", T=T)
    joint = apply_beam_splitter(tensor(squeezed_vacuum(r_signal, dim), squeezed_vacuum(r_ancilla, dim)),
                                theta_from_transmittance(T))
    raw = project_mode_b(joint, omega_ancilla_state(0.0, joint.dim_b))[:dim]
    try:
        st, p = normalize(raw)
    except ZeroStateError:
        raise ZeroStateError("coincidence heralding impossible", probability=0.0) from None
    meta = {"heralding": "coincidence D1, D2", "truncation": truncation_report(st).to_dict()}
    return ProtocolOutcome(st, p, meta)


@dataclass(frozen=True)
class WavefunctionFit:
    c: float
    b0: float
    b2: float
    relative_residual: float


def wavefunction(state, x) -> np.ndarray:
    """psi(x) = sum_n c_n psi_n(x) on a grid (x = X/sqrt2)."""
    state = np.asarray(state, dtype=complex)
    return hermite_functions(np.asarray(x, dtype=float), state.shape[0]) @ state


def fit_wavefunction(state, x, c_guess: float | None = None) -> WavefunctionFit:
    """Least-squares fit of e^{-c x^2/2}(b0 + b2 x^2) to a real wavefunction on a grid."""
    x = np.asarray(x, dtype=float)
    psi = wavefunction(state, x)
    ph = np.exp(-1j * np.angle(psi[np.argmax(np.abs(psi))]))
    y = np.real(psi * ph)
    scale = np.linalg.norm(y)

    def solve(c):
        g = np.exp(-c * x**2 / 2)
        basis = np.stack([g, g * x**2], axis=1)
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return coef, np.linalg.norm(basis @ coef - y) / scale

    c0 = 1.0 if c_guess is None else c_guess
    res = minimize_scalar(lambda c: solve(c)[1], bounds=(c0 / 4, c0 * 4), method="bounded",
                          options={"xatol": 1e-12})
    coef, rel = solve(res.x)
    return WavefunctionFit(float(res.x), float(coef[0]), float(coef[1]), float(rel))
