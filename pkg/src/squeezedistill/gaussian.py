"""Gaussian building blocks: squeezing, displacement, beam splitters,
quadrature statistics and homodyne projection.

Quadratures follow X = a + a^dag, Y = -i(a - a^dag), so [X, Y] = 2i and the
vacuum has unit variance in both.  The homodyne variable is x = X/sqrt(2).
S(r) = exp[(r/2)(a^dag^2 - a^2)] anti-squeezes X for r > 0 (V_X = e^{2r}).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import lgamma

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize_scalar
from scipy.stats import poisson

from .exceptions import InvalidParameterError, TruncationError, TruncationWarning
from .fock import (
    GUARD,
    TAIL_TOL,
    TwoModeState,
    _check_dim,
    _readonly,
    annihilation,
    creation,
    embed,
    fidelity,
    hermitize,
    norm_factor,
    truncation_report,
)

DIM_CAP = 200


# ---------------------------------------------------------------- analytic states


def squeezed_vacuum(r: float, dim: int, phi: float = 0.0) -> np.ndarray:
    """Fock amplitudes of S(r e^{i phi})|0> up to level dim-1 (not renormalized).

    <2n|psi> = (e^{i phi} tanh r)^n sqrt((2n)!) / (2^n n! sqrt(cosh r)).
    """
    dim = _check_dim(dim)
    psi = np.zeros(dim, dtype=complex)
    t = np.tanh(abs(r))
    n = np.arange((dim + 1) // 2)
    logc = np.array([0.5 * lgamma(2 * k + 1.0) - k * np.log(2.0) - lgamma(k + 1.0) for k in n])
    if t > 0:
        mag = np.exp(n * np.log(t) + logc) / np.sqrt(np.cosh(r))
    else:
        mag = (n == 0).astype(float)
    sign = -1.0 if r < 0 else 1.0
    psi[0::2] = mag * sign**n * np.exp(1j * n * phi)
    return psi


def squeezed_pair(r: float, dim: int, phi: float = 0.0):
    """Return (S|0>, S|2>) for S = S(r e^{i phi}).

    S|2> = (1/sqrt2)(S a^dag S^dag)^2 S|0> with S a^dag S^dag = cosh r a^dag - e^{i phi} sinh r a.
    """
    # two extra levels keep every returned amplitude exact
    m = dim + 3
    a, ad = annihilation(m), creation(m)
    s0 = squeezed_vacuum(r, m, phi)
    op = np.cosh(r) * ad - np.exp(1j * phi) * np.sinh(r) * a
    s2 = op @ (op @ s0) / np.sqrt(2.0)
    return s0[:dim], s2[:dim]


def squeezed_single_photon(r: float, dim: int) -> np.ndarray:
    """S(r)|1>, obtained from a S(r)|0> = sinh(r) S(r)|1>."""
    if r == 0:
        v = np.zeros(dim, dtype=complex)
        v[1] = 1.0
        return v
    return (annihilation(dim + 1) @ squeezed_vacuum(r, dim + 1))[:dim] / np.sinh(r)


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    """Poissonian amplitudes e^{-|alpha|^2/2} alpha^n / sqrt(n!)."""
    dim = _check_dim(dim)
    n = np.arange(dim)
    lf = np.array([lgamma(k + 1.0) for k in n])
    if alpha == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    mag = np.exp(-abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - 0.5 * lf)
    return mag * np.exp(1j * n * np.angle(alpha))


def squeezed_tail_mass(r: float, cutoff: int) -> float:
    """Population of |psi(r)> at levels >= cutoff."""
    inside = np.abs(squeezed_vacuum(r, max(cutoff, 2)))[: max(cutoff, 0)] ** 2
    return float(max(1.0 - inside.sum(), 0.0))


@lru_cache(maxsize=512)
def r_max(dim: int, guard: int = GUARD, tail_tol: float = TAIL_TOL) -> float:
    """Largest |r| whose squeezed vacuum keeps less than tail_tol at levels >= dim-guard."""
    dim = _check_dim(dim)
    cutoff = dim - guard
    if cutoff < 1:
        return 0.0
    lo, hi = 0.0, 8.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if squeezed_tail_mass(mid, cutoff) < tail_tol:
            lo = mid
        else:
            hi = mid
    return lo


def suggested_dim(r: float, guard: int = GUARD, tail_tol: float = TAIL_TOL, cap: int | None = None) -> int:
    """Smallest cutoff at which |psi(r)> is truncation-clean."""
    dim = max(guard + 2, 2)
    limit = cap if cap is not None else 100000
    while dim <= limit:
        if abs(r) <= r_max(dim, guard, tail_tol):
            return dim
        dim += 1 if dim < 64 else 8
    raise TruncationError(f"r={r} needs more than {limit} Fock levels", suggested_dim=None, r=r, cap=limit)


# ---------------------------------------------------------------- operators


@lru_cache(maxsize=128)
def _squeeze_cached(r: float, phi: float, dim: int) -> np.ndarray:
    a, ad = annihilation(dim), creation(dim)
    xi = r * np.exp(1j * phi)
    gen = 0.5 * (xi * ad @ ad - np.conj(xi) * a @ a)
    return _readonly(expm(gen))


def squeeze_operator(r: float, dim: int, phi: float = 0.0, check: bool = True) -> np.ndarray:
    """S(r e^{i phi}) = exp[(xi a^dag^2 - xi* a^2)/2] from the truncated generator."""
    dim = _check_dim(dim)
    if check and abs(r) > r_max(dim):
        raise TruncationError(
            f"squeezing r={r} is not truncation-clean at dim={dim}",
            suggested_dim=suggested_dim(r),
            r=r,
            dim=dim,
        )
    return _squeeze_cached(float(r), float(phi), dim)


@lru_cache(maxsize=128)
def _displace_cached(alpha: complex, dim: int) -> np.ndarray:
    a, ad = annihilation(dim), creation(dim)
    return _readonly(expm(alpha * ad - np.conj(alpha) * a))


def displacement_operator(alpha: complex, dim: int, check: bool = True) -> np.ndarray:
    """D(alpha) = exp(alpha a^dag - alpha* a)."""
    dim = _check_dim(dim)
    mu = abs(alpha) ** 2
    if check and mu > 0 and poisson.sf(dim - GUARD - 1, mu) >= TAIL_TOL:
        need = int(poisson.isf(TAIL_TOL, mu)) + GUARD + 2
        raise TruncationError(
            f"coherent amplitude {alpha} is not truncation-clean at dim={dim}",
            suggested_dim=need,
            alpha=alpha,
            dim=dim,
        )
    return _displace_cached(complex(alpha), dim)


def theta_from_transmittance(T: float) -> float:
    if not 0.0 <= T <= 1.0:
        raise InvalidParameterError("transmittance must lie in [0, 1]", T=T)
    return float(np.arccos(np.sqrt(T)))


@lru_cache(maxsize=1024)
def _bs_block(theta: float, n: int) -> np.ndarray:
    # basis |a, n-a>, a = 0..n; generator theta (a b^dag - a^dag b)
    k = np.arange(1, n + 1)
    off = theta * np.sqrt(k * (n - k + 1.0))
    g = np.diag(off, 1) - np.diag(off, -1)
    return _readonly(expm(g))


def beam_splitter(theta: float, dim_a: int, dim_b: int) -> np.ndarray:
    """Beam-splitter unitary on the truncated (dim_a x dim_b) space.

    Convention: U a^dag U^dag = cos(theta) a^dag + sin(theta) b^dag and
    U b^dag U^dag = cos(theta) b^dag - sin(theta) a^dag, i.e.
    U = exp[theta (a b^dag - a^dag b)], transmittance T = cos^2(theta).
    Each total-photon-number block is exponentiated separately; blocks with
    n < min(dim_a, dim_b) are exact, higher blocks are the exponential of the
    truncated generator (still unitary).
    """
    dim_a, dim_b = _check_dim(dim_a), _check_dim(dim_b)
    size = dim_a * dim_b
    u = np.zeros((size, size), dtype=complex)
    for n in range(dim_a + dim_b - 1):
        a_idx = np.arange(max(0, n - dim_b + 1), min(n, dim_a - 1) + 1)
        if len(a_idx) == n + 1:
            blk = _bs_block(float(theta), n)
        else:
            k = a_idx[1:]
            off = theta * np.sqrt(k * (n - k + 1.0))
            blk = expm(np.diag(off, 1) - np.diag(off, -1))
        flat = a_idx * dim_b + (n - a_idx)
        u[np.ix_(flat, flat)] = blk
    return u


def apply_beam_splitter(state: TwoModeState, theta: float, inverse: bool = False) -> TwoModeState:
    """Exact beam-splitter action on a two-mode state.

    The output lives in (dim_a+dim_b-1)^2 so that no photon-number block is
    cut; use ``TwoModeState.padded`` to crop afterwards if desired.
    """
    th = -theta if inverse else theta
    da, db = state.dim_a, state.dim_b
    p = da + db - 1
    blocks = []
    for n in range(da + db - 1):
        a_idx = np.arange(max(0, n - db + 1), min(n, da - 1) + 1)
        u = _bs_block(float(th), n)[:, a_idx]
        blocks.append((a_idx * db + (n - a_idx), np.arange(n + 1) * p + (n - np.arange(n + 1)), u))
    if state.is_vector:
        out = np.zeros(p * p, dtype=complex)
        for src, dst, u in blocks:
            out[dst] = u @ state.data[src]
        return TwoModeState(out, p, p)
    out = np.zeros((p * p, p * p), dtype=complex)
    rho = state.data
    for src_i, dst_i, u_i in blocks:
        left = u_i @ rho[src_i, :]
        for src_j, dst_j, u_j in blocks:
            out[np.ix_(dst_i, dst_j)] = left[:, src_j] @ u_j.conj().T
    return TwoModeState(out, p, p)


# ---------------------------------------------------------------- quadratures


@dataclass(frozen=True)
class QuadratureStats:
    mean_x: float
    mean_y: float
    vx: float
    vy: float
    cov_xy: float
    mean_n: float

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.vx, self.cov_xy], [self.cov_xy, self.vy]])


def ladder_moments(state):
    """(<a>, <a^2>, <n>) of a normalized-or-not vector or density matrix."""
    state = np.asarray(state, dtype=complex)
    nrm = norm_factor(state)
    dim = state.shape[0]
    s1 = np.sqrt(np.arange(1, dim))
    s2 = np.sqrt(np.arange(2, dim) * np.arange(1, dim - 1))
    if state.ndim == 1:
        c = state
        m1 = np.sum(np.conj(c[:-1]) * c[1:] * s1)
        m2 = np.sum(np.conj(c[:-2]) * c[2:] * s2)
        mn = np.sum(np.arange(dim) * np.abs(c) ** 2)
    else:
        m1 = np.sum(np.diagonal(state, -1) * s1)
        m2 = np.sum(np.diagonal(state, -2) * s2)
        mn = np.sum(np.arange(dim) * np.real(np.diagonal(state)))
    return complex(m1 / nrm), complex(m2 / nrm), float(mn / nrm)


def quadrature_stats(state, warn: bool = True) -> QuadratureStats:
    m1, m2, mn = ladder_moments(state)
    if warn and not truncation_report(state).clean:
        warnings.warn("quadrature statistics of a truncation-unclean state", TruncationWarning, stacklevel=2)
    mx, my = 2 * m1.real, 2 * m1.imag
    vx = 1 + 2 * mn + 2 * m2.real - mx**2
    vy = 1 + 2 * mn - 2 * m2.real - my**2
    cxy = 2 * m2.imag - mx * my
    return QuadratureStats(mx, my, vx, vy, cxy, mn)


def quadrature_variances(state, warn: bool = True) -> tuple[float, float]:
    """(V_X, V_Y) from the ladder moments; vacuum gives (1, 1)."""
    st = quadrature_stats(state, warn=warn)
    return st.vx, st.vy


# ---------------------------------------------------------------- homodyne


def hermite_functions(x, dim: int) -> np.ndarray:
    """psi_n(x) = pi^{-1/4} (2^n n!)^{-1/2} H_n(x) e^{-x^2/2} for n < dim.

    Scalar x gives shape (dim,); arrays give shape x.shape + (dim,).
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (dim,))
    out[..., 0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if dim > 1:
        out[..., 1] = np.sqrt(2.0) * x * out[..., 0]
    for n in range(1, dim - 1):
        out[..., n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[..., n] - np.sqrt(n / (n + 1.0)) * out[..., n - 1]
    return out


def homodyne_projector(x: float, dim: int, quadrature: str = "x") -> np.ndarray:
    """Amplitudes <n|q> of the quadrature eigenstate |q>.

    quadrature 'x' uses x = X/sqrt2; 'p' uses p = Y/sqrt2 with |p> = i^n-rotated |x=p>.
    """
    dim = _check_dim(dim)
    h = hermite_functions(float(x), dim).astype(complex)
    if quadrature == "x":
        return h
    if quadrature == "p":
        return h * (1j) ** np.arange(dim)
    raise InvalidParameterError(f"unknown quadrature {quadrature!r}", quadrature=quadrature)


def homodyne_condition(psi: TwoModeState, x: float, quadrature: str = "x", window: float | None = None,
                       points: int = 41):
    """Project mode B onto <q| (ideal) or integrate over [x - w/2, x + w/2].

    Returns the unnormalized A-mode vector (ideal) or density matrix (window).
    The squared norm / trace is the heralding density (ideal) or probability.
    """
    amps = psi.amplitudes()
    if window is None or window == 0:
        return amps @ np.conj(homodyne_projector(x, psi.dim_b, quadrature))
    if window < 0:
        raise InvalidParameterError("window width must be non-negative", window=window)
    # midpoint rule over the acceptance window
    edges = np.linspace(x - window / 2, x + window / 2, points + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    dx = window / points
    rho = np.zeros((psi.dim_a, psi.dim_a), dtype=complex)
    for q in mids:
        v = amps @ np.conj(homodyne_projector(q, psi.dim_b, quadrature))
        rho += dx * np.outer(v, v.conj())
    return rho


# ---------------------------------------------------------------- Gaussian fits


@dataclass(frozen=True)
class GaussianFit:
    vx: float
    vy: float
    residual: float
    cov_xy: float = 0.0
    mean_x: float = 0.0
    mean_y: float = 0.0
    nbar: float = 0.0
    r: float = 0.0
    phi: float = 0.0


def gaussian_parameters(cov: np.ndarray):
    """Split a quadrature covariance into (nbar, r, phi) of S(r e^{i phi}) rho_th S^dag."""
    cov = np.asarray(cov, dtype=float)
    det = max(np.linalg.det(cov), 1.0)
    nu = np.sqrt(det)
    w = np.linalg.eigvalsh(cov)
    lam_max = w[-1]
    r = 0.5 * np.log(max(lam_max / nu, 1.0))
    angle = 0.5 * np.arctan2(2 * cov[0, 1], cov[0, 0] - cov[1, 1])
    return (nu - 1) / 2, r, 2 * angle


def gaussian_state(dim: int, cov, mean=(0.0, 0.0), work_dim: int | None = None) -> np.ndarray:
    """Density matrix of the Gaussian state with given quadrature covariance and means,
    computed in a larger working space and cropped to ``dim`` (renormalized)."""
    nbar, r, phi = gaussian_parameters(cov)
    alpha = complex(mean[0], mean[1]) / 2
    m = work_dim or min(max(2 * dim, dim + 40), 400)
    if nbar < 1e-10:
        vec = squeezed_vacuum(r, m, phi)
        if alpha != 0:
            vec = displacement_operator(alpha, m, check=False) @ vec
        rho = np.outer(vec, vec.conj())
    else:
        q = nbar / (nbar + 1)
        p = (1 - q) * q ** np.arange(m)
        s = squeeze_operator(r, m, phi, check=False)
        rho = (s * p) @ s.conj().T
        if alpha != 0:
            d = displacement_operator(alpha, m, check=False)
            rho = d @ rho @ d.conj().T
    rho = hermitize(embed(rho, dim))
    return rho / np.trace(rho).real


def fit_gaussian(state) -> GaussianFit:
    """Covariance-matched Gaussian and its fidelity deficit (the residual)."""
    state = np.asarray(state, dtype=complex)
    st = quadrature_stats(state, warn=False)
    nbar, r, phi = gaussian_parameters(st.covariance)
    g = gaussian_state(state.shape[0], st.covariance, (st.mean_x, st.mean_y))
    unit = state / (np.sqrt(norm_factor(state)) if state.ndim == 1 else norm_factor(state))
    res = max(1.0 - fidelity(unit, g), 0.0)
    return GaussianFit(st.vx, st.vy, res, st.cov_xy, st.mean_x, st.mean_y, nbar, r, phi)


@dataclass(frozen=True)
class SqueezeFit:
    r: float
    phi: float
    fidelity: float


def fit_squeezed_vacuum(state, r_hint: float | None = None) -> SqueezeFit:
    """Best-fidelity member of the truncated family S(r e^{i phi})|0> (normalized in the cutoff).

    Unlike a covariance fit, this stays accurate when the state's own tail
    reaches the cutoff.
    """
    state = np.asarray(state, dtype=complex)
    dim = state.shape[0]
    if state.ndim == 1:
        c = state / np.sqrt(norm_factor(state))
        rho20, rho00 = c[2] * np.conj(c[0]), abs(c[0]) ** 2
    else:
        c = state / norm_factor(state)
        rho20, rho00 = c[2, 0], c[0, 0].real
    sigma = rho20 / rho00 if rho00 > 0 else 0.0
    phi = float(np.angle(sigma)) if abs(sigma) > 1e-15 else 0.0
    if r_hint is None:
        t = min(np.sqrt(2) * abs(sigma), 1 - 1e-9)
        r_hint = float(np.arctanh(t))

    def loss(r):
        v = squeezed_vacuum(r, dim, phi)
        v /= np.linalg.norm(v)
        return -fidelity(v, c)

    lo, hi = max(0.0, r_hint - 0.5), r_hint + 0.5
    res = minimize_scalar(loss, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return SqueezeFit(float(res.x), phi, float(-res.fun))
