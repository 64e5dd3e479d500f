"""Normal-form correction, modified energy, and the energy-derivative split.

The H^s norm of the interaction variable is not conserved, but its time
derivative is an oscillatory quadrilinear sum over the nonresonant hyperplane.
Integrating that oscillation by parts trades it for the correction

    R(y) = -1/2 Re sum_{Gamma_N} (psi_s / phi) y_{n1} conj(y_{n2}) y_{n3} conj(y_n),

and the modified energy  E(y) = ||y||_{H^s}^2 + R(y)  then has a derivative
along the flow consisting of four sextic terms (two with an inner nonresonant
convolution, two with the resonant cubic weight).  Everything here is exact
finite-dimensional algebra; the decomposition is cross-checked against a
finite-difference derivative of E along the integrated flow.

All quadrilinear sums run over quads (n1, n2, n3, n) with n1 + n3 = n2 + n,
|entries| <= N, n1 != n, n3 != n; the kernel psi_s / phi is cached per
(s, alpha, N) as a stack of (n1, n3)-slices indexed by n.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .dynamics import SimParams, flow
from .errors import InvalidParameterError, ResonantQuadError, UnsupportedRegimeError
from .spectral import SpectralField, _cubic_batch, bracket, fourier_lebesgue_norm, sobolev_norm

__all__ = [
    "EnergyReport",
    "DerivativeTerms",
    "correction_R",
    "correction_R_batch",
    "energy_E",
    "derivative_terms",
    "fd_energy_derivative",
    "energy_ratio_strong",
    "energy_ratio_weak",
    "in_estimate_regime",
]


class DerivativeTerms(NamedTuple):
    """The four sextic contributions to d/dt E along the flow."""

    n1: float
    r1: float
    n2: float
    r2: float

    @property
    def total(self) -> float:
        return self.n1 + self.r1 + self.n2 + self.r2


@dataclass(frozen=True)
class EnergyReport:
    """Modified energy of a field: total = h_s_sq + correction."""

    h_s_sq: float
    correction: float
    total: float
    terms: DerivativeTerms | None = None


@lru_cache(maxsize=8)
def _index_sum(N: int) -> np.ndarray:
    L = 2 * N + 1
    idx = np.arange(L)
    out = idx[:, None] + idx[None, :]
    out.flags.writeable = False
    return out


@lru_cache(maxsize=6)
def _kernel_slices(s: float, alpha: float, N: int) -> np.ndarray:
    """Kernel stack K[n, i1, i3] = psi_s / phi on valid quads, 0 elsewhere.

    Storage index i maps to mode i - N; the paired index i2 = i1 + i3 - i_n
    may fall outside storage, in which case the entry is invalid and zeroed.
    """
    if alpha <= 0.5:
        raise UnsupportedRegimeError("kernel requires alpha > 1/2")
    L = 2 * N + 1
    modes = np.arange(L) - N
    br = bracket(modes) ** (2.0 * s)
    pw = np.abs(modes.astype(float)) ** (2.0 * alpha)
    ext_modes = np.arange(-3 * N, 3 * N + 1)
    ext_br = bracket(ext_modes) ** (2.0 * s)
    ext_pw = np.abs(ext_modes.astype(float)) ** (2.0 * alpha)
    sum_idx = _index_sum(N)
    K = np.zeros((L, L, L))
    for i_n in range(L):
        i2 = sum_idx - i_n  # in [-2N, 4N]; mode n2 = i2 - N
        valid = (i2 >= 0) & (i2 < L)
        valid[i_n, :] = False
        valid[:, i_n] = False
        e2 = i2 + 2 * N
        ps = br[:, None] - ext_br[e2] + br[None, :] - br[i_n]
        ph = pw[:, None] - ext_pw[e2] + pw[None, :] - pw[i_n]
        if np.any(valid & (ph == 0.0)):
            raise ResonantQuadError(
                "vanishing phase on the nonresonant set; alpha too close to 1/2"
            )
        K[i_n] = np.where(valid, ps / np.where(valid, ph, 1.0), 0.0)
    K.flags.writeable = False
    return K


def _phase_slice(i_n: int, N: int, alpha: float) -> np.ndarray:
    """phi over the (i1, i3)-slice of n (garbage on invalid entries, which the
    caller masks through the zeroed kernel)."""
    L = 2 * N + 1
    modes = np.arange(L) - N
    pw = np.abs(modes.astype(float)) ** (2.0 * alpha)
    ext_pw = np.abs(np.arange(-3 * N, 3 * N + 1).astype(float)) ** (2.0 * alpha)
    e2 = _index_sum(N) - i_n + 2 * N
    return pw[:, None] - ext_pw[e2] + pw[None, :] - pw[i_n]


# ----------------------------------------------------------------------
# correction and modified energy


def _correction_from_coeffs(c: np.ndarray, s: float, alpha: float, N: int) -> float:
    if not np.any(c):
        return 0.0
    K = _kernel_slices(s, alpha, N)
    L = 2 * N + 1
    sum_idx = _index_sum(N)
    cbar = np.conj(c)
    acc = 0.0 + 0.0j
    for i_n in range(L):
        if c[i_n] == 0:
            continue
        i2c = np.clip(sum_idx - i_n, 0, L - 1)
        G = K[i_n] * cbar[i2c]
        acc += (c @ (G @ c)) * cbar[i_n]
    return float(-0.5 * acc.real)


def correction_R(f: SpectralField, s: float, alpha: float, N: int) -> float:
    """Normal-form correction R at truncation N (a real quartic functional).

    Evaluated as a cubic-cost loop over (n1, n3, n) slices with n2 determined;
    quads with n1 = n or n3 = n are excluded.  Quartically homogeneous:
    R(lambda f) = |lambda|^4 R(f).
    """
    if alpha <= 0.5:
        raise UnsupportedRegimeError("correction requires alpha > 1/2")
    if f.cutoff < N:
        raise InvalidParameterError(f"field cutoff {f.cutoff} below truncation {N}")
    return _correction_from_coeffs(f.project(N).coeffs, s, alpha, N)


def correction_R_batch(coeffs: np.ndarray, s: float, alpha: float, N: int) -> np.ndarray:
    """correction_R applied to each column of a (2M+1, count) coefficient
    matrix with storage cutoff M >= N."""
    M = (coeffs.shape[0] - 1) // 2
    if M < N:
        raise InvalidParameterError(f"storage cutoff {M} below truncation {N}")
    sl = slice(M - N, M + N + 1)
    out = np.empty(coeffs.shape[1])
    for k in range(coeffs.shape[1]):
        out[k] = _correction_from_coeffs(coeffs[sl, k], s, alpha, N)
    return out


def correction_R_bruteforce(f: SpectralField, s: float, alpha: float, N: int) -> float:
    """Literal quadruple-loop reference for correction_R (small N only)."""
    from .resonance import FrequencyQuad, multiplier

    if alpha <= 0.5:
        raise UnsupportedRegimeError("correction requires alpha > 1/2")
    g = f.project(N)
    acc = 0.0 + 0.0j
    for n1 in range(-N, N + 1):
        for n2 in range(-N, N + 1):
            for n3 in range(-N, N + 1):
                n = n1 - n2 + n3
                if abs(n) > N or n1 == n or n3 == n:
                    continue
                q = FrequencyQuad(n1, n2, n3, n)
                acc += (
                    multiplier(q, s, alpha)
                    * g.coeff(n1)
                    * np.conj(g.coeff(n2))
                    * g.coeff(n3)
                    * np.conj(g.coeff(n))
                )
    return float(-0.5 * acc.real)


def energy_E(f: SpectralField, s: float, alpha: float, N: int,
             with_terms: SimParams | None = None) -> EnergyReport:
    """Modified energy of P_N f: ||P_N f||_{H^s}^2 + R(P_N f).

    Pass a SimParams in with_terms (matching s, alpha, N) to also attach the
    four derivative terms evaluated at t = 0.
    """
    g = f.project(N)
    h = sobolev_norm(g, s) ** 2
    r = correction_R(g, s, alpha, N)
    terms = None
    if with_terms is not None:
        if (with_terms.s, with_terms.alpha, with_terms.N) != (s, alpha, N):
            raise InvalidParameterError("with_terms parameters disagree with (s, alpha, N)")
        terms = derivative_terms(g, 0.0, with_terms)
    return EnergyReport(h_s_sq=h, correction=r, total=h + r, terms=terms)


# ----------------------------------------------------------------------
# derivative decomposition


def derivative_terms(w: SpectralField, t: float, p: SimParams) -> DerivativeTerms:
    """The four real terms whose sum is d/dt E(P_N v(t)) along the flow.

    w is the interaction-frame state at time t (at t = 0 the frames agree).
    The two convolution terms carry an inner nonresonant cubic sum over the
    hyperplane of n1 (resp. n2); it is evaluated for all n1 at once through
    the lab-frame FFT cubic term, which handles the oscillatory factors
    exactly and reduces the cost from quintic to cubic in N.

    The returned values are for the defocusing normal form; along a focusing
    trajectory they equal d/dt of ||.||_{H^s}^2 + sign * R.
    """
    if p.alpha <= 0.5:
        raise UnsupportedRegimeError("derivative terms require alpha > 1/2")
    N = p.N
    g = w.project(N)
    c = g.coeffs
    L = 2 * N + 1
    lam = np.abs(g.modes.astype(float)) ** (2.0 * p.alpha)
    osc = np.exp(1j * t * lam)
    v = osc * c
    conv = _cubic_batch(v, N, N) + (np.abs(v) ** 2) * v  # inner hyperplane sum, lab frame
    A = np.conj(osc) * conv
    cbar = np.conj(c)
    u1 = (np.abs(c) ** 2) * c
    sources = np.stack([cbar, np.conj(A), (np.abs(c) ** 2) * cbar])
    K = _kernel_slices(p.s, p.alpha, N)
    sum_idx = _index_sum(N)
    s_n1 = s_r1 = s_n2 = s_r2 = 0.0 + 0.0j
    for i_n in range(L):
        i2c = np.clip(sum_idx - i_n, 0, L - 1)
        Kn = K[i_n]
        if t != 0.0:
            Kn = Kn * np.exp(1j * t * _phase_slice(i_n, N, p.alpha))
        g2 = sources[:, i2c]
        Gw = Kn * g2[0]
        Pw = Gw @ c
        s_n1 += (A @ Pw) * cbar[i_n]
        s_r1 += (u1 @ Pw) * cbar[i_n]
        s_n2 += (c @ ((Kn * g2[1]) @ c)) * cbar[i_n]
        s_r2 += (c @ ((Kn * g2[2]) @ c)) * cbar[i_n]
    return DerivativeTerms(
        n1=float(-s_n1.imag),
        r1=float(+s_r1.imag),
        n2=float(+s_n2.imag),
        r2=float(-s_r2.imag),
    )


def fd_energy_derivative(f: SpectralField, p: SimParams, h: float = 1e-5,
                         richardson: bool = False) -> float:
    """Centered finite difference of E(P_N v) along the flow through the lab
    state f (one RK4 step of size h each way); the lab flow is autonomous, so
    this is d/dt E at whatever time f was reached.

    With richardson=True the h and h/2 differences are extrapolated, removing
    the quadratic truncation term; worthwhile when fast oscillations make the
    third time derivative of E large (high cutoff or strong dispersion).
    """

    def centered(step: float) -> float:
        ps = replace(p, dt=step)
        ep = energy_E(flow(f, ps, +step), p.s, p.alpha, p.N).total
        em = energy_E(flow(f, ps, -step), p.s, p.alpha, p.N).total
        return (ep - em) / (2.0 * step)

    if not richardson:
        return centered(h)
    return (4.0 * centered(h / 2.0) - centered(h)) / 3.0


# ----------------------------------------------------------------------
# estimate-style ratio diagnostics


def in_estimate_regime(alpha: float, s: float) -> bool:
    """Parameter regions where the sextic derivative bound is proved:
    (i) s > 1, alpha > 1/2; (ii) alpha >= 5/4, max(2/3, 25/12 - alpha) < s <= 1;
    (iii) 1 < alpha < 5/4, (3 - alpha)/2 < s <= 1."""
    if alpha > 0.5 and s > 1:
        return True
    if alpha >= 1.25 and max(2.0 / 3.0, 25.0 / 12.0 - alpha) < s <= 1:
        return True
    if 1 < alpha < 1.25 and (3.0 - alpha) / 2.0 < s <= 1:
        return True
    return False


def energy_ratio_strong(f: SpectralField, p: SimParams) -> float:
    """|d/dt E| over the sixth power of the H^(s - 1/2 - eps) norm, at t = 0.

    Returns 0 for the zero field.  Outside the proved parameter regions the
    ratio is still computed, with a warning.
    """
    if f.is_zero():
        return 0.0
    if not in_estimate_regime(p.alpha, p.s):
        warnings.warn(
            f"(alpha, s) = ({p.alpha}, {p.s}) is outside the proved estimate regime",
            stacklevel=2,
        )
    num = abs(derivative_terms(f, 0.0, p).total)
    den = sobolev_norm(f, p.sigma) ** 6
    return num / den


def energy_ratio_weak(f: SpectralField, p: SimParams, eps_tilde: float) -> float:
    """|d/dt E| at t = 0 over the weighted-sup squared times the fourth power
    of the H^(s - 1/2 - eps) norm; requires 0 < eps_tilde < eps."""
    if not (0.0 < eps_tilde < p.eps):
        raise InvalidParameterError("eps_tilde must lie in (0, eps)")
    if f.is_zero():
        return 0.0
    num = abs(derivative_terms(f, 0.0, p).total)
    den = (
        fourier_lebesgue_norm(f, p.s - eps_tilde, np.inf) ** 2
        * sobolev_norm(f, p.sigma) ** 4
    )
    return num / den
