"""Displacement-assisted two-photon subtraction M = a^2 - delta^2.

The idealized operator is applied to the squeezed vacuum; the realistic
version taps a fraction 1-T of the signal at a beam splitter, interferes it
with a coherent ancilla |alpha> on a balanced splitter and heralds on one
photon in each output port.  delta^2 is a signed real on the main path
(negative means imaginary delta); complex values are accepted by the
operator builders.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import (
    DegenerateStateError,
    InvalidParameterError,
    UnreachableTargetError,
    ZeroStateError,
)
from .fock import (
    TOL_ZERO,
    ProtocolOutcome,
    TwoModeState,
    annihilation,
    hermitize,
    loss_kraus_operators,
    normalize,
    number_operator,
    project_mode_b,
    truncation_report,
)
from .gaussian import apply_beam_splitter, squeezed_pair, squeezed_vacuum, theta_from_transmittance

SQRT6 = np.sqrt(6.0)
OPTIMAL_VY_FACTOR = 3.0 / (3.0 + SQRT6)
OPTIMAL_GAIN = (3.0 + SQRT6) / 3.0


@dataclass(frozen=True)
class SubtractionParams:
    """Settings of the tapped scheme.

    alpha=None means the coupled setting alpha = sqrt((1-T)/T) delta, with
    delta the principal square root of delta_sq (so alpha is imaginary for
    negative delta_sq).  eta is the detector efficiency.
    """

    delta_sq: complex
    T: float
    alpha: complex | None = None
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.T <= 1.0:
            raise InvalidParameterError("transmittance T must lie in (0, 1]", T=self.T)
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidParameterError("detector efficiency must lie in [0, 1]", eta=self.eta)

    @property
    def coupled(self) -> bool:
        return self.alpha is None

    def ancilla_alpha(self) -> complex:
        if self.alpha is not None:
            return complex(self.alpha)
        delta = np.sqrt(complex(self.delta_sq))
        return complex(np.sqrt((1 - self.T) / self.T) * delta)


def m_operator(delta_sq: complex, dim: int) -> np.ndarray:
    """M = a^2 - delta^2 (parity preserving)."""
    a = annihilation(dim)
    return a @ a - delta_sq * np.eye(dim)


def subtracted_state(r: float, delta_sq: complex, dim: int) -> np.ndarray:
    """Unnormalized M|psi(r)>."""
    return m_operator(delta_sq, dim) @ squeezed_vacuum(r, dim)


def subtracted_variances_analytic(r: float, delta_sq: float) -> tuple[float, float]:
    """Closed-form (V_X, V_Y) of the normalized M|psi(r)>."""
    s, c = np.sinh(r), np.cosh(r)
    u = c * s - delta_sq
    den = 2 * s**4 + u**2
    if abs(den) <= TOL_ZERO:
        raise DegenerateStateError("M annihilates the squeezed vacuum", r=r, delta_sq=delta_sq)
    vx = np.exp(2 * r) * (1 + 4 * s**2 * (2 * s**2 + u) / den)
    vy = np.exp(-2 * r) * (1 + 4 * s**2 * (2 * s**2 - u) / den)
    return float(vx), float(vy)


def optimal_delta_sq(r: float) -> float:
    """delta^2 minimizing V_Y: cosh r sinh r - (2 + sqrt6) sinh^2 r."""
    if r <= 0:
        raise InvalidParameterError("optimal delta^2 needs r > 0", r=r)
    return float(np.cosh(r) * np.sinh(r) - (2 + SQRT6) * np.sinh(r) ** 2)


def squeeze_gain(r: float, delta_sq: float) -> float:
    """Ratio V_Y(in)/V_Y(out), i.e. the increase of the squeeze factor."""
    return float(np.exp(-2 * r) / subtracted_variances_analytic(r, delta_sq)[1])


def gain_db(gain: float) -> float:
    return float(10 * np.log10(gain))


def factorized_state(r: float, dim: int) -> np.ndarray:
    """S(r)[(2+sqrt6)|0> + sqrt2 |2>] / (2 sqrt(3+sqrt6)), the optimal output."""
    s0, s2 = squeezed_pair(r, dim)
    return ((2 + SQRT6) * s0 + np.sqrt(2.0) * s2) / (2 * np.sqrt(3 + SQRT6))


def omega_ancilla_state(alpha: complex, dim: int) -> np.ndarray:
    """|omega(alpha)> = e^{-|alpha|^2/2} (alpha^2 |0> - sqrt2 |2>) / 2 (unnormalized)."""
    v = np.zeros(dim, dtype=complex)
    e = np.exp(-abs(alpha) ** 2 / 2) / 2
    v[0] = e * alpha**2
    v[2] = -e * np.sqrt(2.0)
    return v


def reduced_squeeze(r: float, T: float) -> float:
    """r~ with tanh r~ = T tanh r (noiseless attenuation t^n)."""
    return float(np.arctanh(T * np.tanh(r)))


def realistic_operator(params: SubtractionParams, dim: int) -> np.ndarray:
    """M_A = (e^{-|alpha|^2/2}/2) ((1-T)/T a^2 - alpha^2) t^n for ideal detectors.

    In the coupled setting this equals
    (1-T)/(2T) exp[-(1-T)|delta^2|/(2T)] (a^2 - delta^2) t^n.
    """
    T = params.T
    alpha = params.ancilla_alpha()
    a = annihilation(dim)
    atten = np.diag(np.sqrt(T) ** np.arange(dim))
    pref = np.exp(-abs(alpha) ** 2 / 2) / 2
    return pref * ((1 - T) / T * (a @ a) - alpha**2 * np.eye(dim)) @ atten


def realistic_subtraction(psi_in, params: SubtractionParams) -> ProtocolOutcome:
    """Heralded output of the tapped scheme; probability = ||M_A psi||^2.

    Imperfect detectors (eta < 1) are routed through the two-mode simulation.
    """
    if params.eta != 1.0:
        return simulate_tapped_subtraction(psi_in, params)
    psi_in = np.asarray(psi_in, dtype=complex)
    op = realistic_operator(params, psi_in.shape[0])
    if psi_in.ndim == 1:
        raw = op @ psi_in
    else:
        raw = op @ psi_in @ op.conj().T
    try:
        state, p = normalize(raw)
    except ZeroStateError as exc:
        raise ZeroStateError("heralding event is impossible", probability=exc.probability,
                             T=params.T, delta_sq=params.delta_sq) from None
    meta = {"heralding": "one photon at each of D1, D2", "truncation": truncation_report(state).to_dict()}
    return ProtocolOutcome(state if state.ndim == 1 else hermitize(state), p, meta)


def success_probability_analytic(r: float, T: float, delta_sq: float) -> float:
    """Closed-form success probability of the coupled scheme for real delta^2."""
    if not 0.0 < T <= 1.0:
        raise InvalidParameterError("transmittance T must lie in (0, 1]", T=T)
    rt = reduced_squeeze(r, T)
    s, c = np.sinh(rt), np.cosh(rt)
    bracket = (c**2 + 2 * s**2) * s**2 - 2 * delta_sq * c * s + delta_sq**2
    pref = ((1 - T) / (2 * T)) ** 2 * np.exp(-(1 - T) * abs(delta_sq) / T)
    return float(pref * bracket / np.sqrt(np.cosh(r) ** 2 - T**2 * np.sinh(r) ** 2))


def detector_efficiency_map(params: SubtractionParams) -> SubtractionParams:
    """Move detector loss in front of the balanced splitter.

    Both inputs of that splitter see a loss channel of transmittance eta:
    the ancilla becomes |sqrt(eta) alpha> and the tapped mode is damped.  The
    returned parameters carry the explicit effective ancilla amplitude; the
    tapped-mode loss is applied by :func:`simulate_tapped_subtraction`.
    """
    return replace(params, alpha=np.sqrt(params.eta) * params.ancilla_alpha())


def simulate_tapped_subtraction(psi_in, params: SubtractionParams) -> ProtocolOutcome:
    """Two-mode simulation of the tapped scheme including detector efficiency.

    The signal passes the tapping splitter (transmittance T) with vacuum in
    mode B; B goes through a loss channel of transmittance eta and is then
    projected on the heralding state built from the effective ancilla.
    Returns a vector for eta = 1 and a density matrix otherwise.
    """
    psi_in = np.asarray(psi_in, dtype=complex)
    if psi_in.ndim != 1:
        raise InvalidParameterError("the two-mode simulation takes a pure input vector")
    dim = psi_in.shape[0]
    eff = detector_efficiency_map(params)
    joint = apply_beam_splitter(TwoModeState(psi_in, dim, 1), theta_from_transmittance(params.T))
    # the heralding bra carries the |omega> coefficients unconjugated
    bra = omega_ancilla_state(eff.alpha, dim)
    if params.eta == 1.0:
        raw = project_mode_b(joint, bra)
    else:
        amps = joint.amplitudes()
        raw = np.zeros((dim, dim), dtype=complex)
        ops = loss_kraus_operators(params.eta, dim) if params.eta > 0 else _total_loss(dim)
        for k in ops:
            v = (amps @ k.T) @ bra
            raw += np.outer(v, v.conj())
    try:
        state, p = normalize(raw)
    except ZeroStateError as exc:
        raise ZeroStateError("heralding event is impossible", probability=exc.probability,
                             T=params.T, eta=params.eta) from None
    meta = {"heralding": "one photon at each of D1, D2", "eta": params.eta,
            "effective_alpha": eff.alpha, "truncation": truncation_report(state).to_dict()}
    return ProtocolOutcome(state, p, meta)


def _total_loss(dim: int) -> list[np.ndarray]:
    ops = []
    for j in range(dim):
        k = np.zeros((dim, dim), dtype=complex)
        k[0, j] = 1.0
        ops.append(k)
    return ops


# ---------------------------------------------------------------- optimization


def solve_delta_sq_for_target(r: float, T: float, vy_target: float) -> list[float]:
    """Real delta^2 roots of V_Y(r~, delta^2) = vy_target with tanh r~ = T tanh r.

    Writing u = cosh r~ sinh r~ - delta^2 and q = vy_target e^{2 r~} - 1 the
    condition is quadratic in u: q u^2 + 4 s^2 u + (2q - 8) s^4 = 0.
    """
    rt = reduced_squeeze(r, T)
    s, c = np.sinh(rt), np.cosh(rt)
    if s == 0:
        raise InvalidParameterError("no squeezing left after attenuation", r=r, T=T)
    q = vy_target * np.exp(2 * rt) - 1
    if abs(q) < 1e-14:
        us = [2 * s**2]
    else:
        disc = 4 + 8 * q - 2 * q**2
        if disc < 0:
            if disc > -1e-12:
                disc = 0.0
            else:
                raise UnreachableTargetError(
                    "target variance is below the minimum reachable at this transmittance",
                    r=r, T=T, vy_target=vy_target,
                )
        root = np.sqrt(disc)
        us = sorted({s**2 * (-2 - root) / q, s**2 * (-2 + root) / q})
    return sorted(float(c * s - u) for u in us)


@dataclass(frozen=True)
class OptimizationResult:
    T: float
    delta_sq: float
    alpha_sq: float
    alpha: complex
    probability: float

    def to_dict(self) -> dict:
        return {"T": self.T, "delta_sq": self.delta_sq, "alpha_sq": self.alpha_sq,
                "alpha_re": self.alpha.real, "alpha_im": self.alpha.imag, "P_succ": self.probability}


def best_root_probability(r: float, T: float, vy_target: float) -> tuple[float, float]:
    """(P, delta^2) for the best real root at transmittance T; (0, nan) if unreachable."""
    try:
        roots = solve_delta_sq_for_target(r, T, vy_target)
    except UnreachableTargetError:
        return 0.0, float("nan")
    ps = [success_probability_analytic(r, T, d) for d in roots]
    i = int(np.argmax(ps))
    return ps[i], roots[i]


def optimize_success(r: float, vy_target: float, scan_points: int = 64, xatol: float = 1e-8,
                     refine: int = 3) -> OptimizationResult:
    """Maximize the success probability over T for a target squeezed variance.

    A coarse scan over T seeds bounded Brent searches on the best brackets.
    """
    if r <= 0:
        raise InvalidParameterError("input squeezing must be positive", r=r)
    vy_in = np.exp(-2 * r)
    if not vy_target < vy_in:
        raise InvalidParameterError("target variance must lie below the input variance",
                                    vy_target=vy_target, vy_in=vy_in)
    grid = (np.arange(scan_points) + 0.5) / scan_points
    scan = np.array([best_root_probability(r, T, vy_target)[0] for T in grid])
    if not np.any(scan > 0):
        raise UnreachableTargetError("target variance unreachable for every transmittance",
                                     r=r, vy_target=vy_target)
    best_T, best_p = None, -1.0
    for i in np.argsort(scan)[::-1][:refine]:
        if scan[i] <= 0:
            continue
        lo = grid[i - 1] if i > 0 else 1e-9
        hi = grid[i + 1] if i + 1 < scan_points else 1 - 1e-12
        res = minimize_scalar(lambda T: -best_root_probability(r, T, vy_target)[0],
                              bounds=(lo, hi), method="bounded", options={"xatol": xatol})
        for T, p in ((float(res.x), -float(res.fun)), (float(grid[i]), float(scan[i]))):
            if p > best_p:
                best_T, best_p = T, p
    p, d = best_root_probability(r, best_T, vy_target)
    params = SubtractionParams(d, best_T)
    alpha = params.ancilla_alpha()
    return OptimizationResult(best_T, d, float((1 - best_T) / best_T * d), alpha, p)
