"""Time evolution of the truncated gauged flow on the torus.

The lab-frame ODE for the coefficients of v is

    d/dt v_n = i |n|^(2a) v_n - i * sign * C_n(v),

with C the dealiased gauged cubic term at truncation N (zero above N) and
sign = +1 defocusing, -1 focusing.  Pulling back by the free propagator
S(t) = exp(i t |n|^(2a)) gives the interaction variable w = S(-t) v, whose
derivative is purely nonlinear; the integrator is a fixed-step RK4 on w with
the linear phases applied exactly (a Lawson-style exponential scheme), so the
dispersive stiffness imposes no step restriction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import BlowupError, InvalidParameterError
from .resonance import FrequencyQuad, phase, visit_hyperplane
from .spectral import SpectralField, _cubic_batch, physical_lp

__all__ = [
    "SimParams",
    "Trajectory",
    "linear_propagator",
    "gauge_forward",
    "gauge_inverse",
    "rhs_gauged",
    "rhs_interaction",
    "evolve",
    "flow",
    "conservation_report",
    "suggested_dt",
]

_BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class SimParams:
    """Physics and discretization of one run.

    alpha: dispersion exponent (> 0); s: measure regularity; eps: the small
    margin in sigma = s - 1/2 - eps, in (0, 1/4]; N: truncation cutoff;
    sign: +1 defocusing, -1 focusing (0 switches the nonlinearity off, a
    testing hook); dt: step; horizon: final time.
    """

    alpha: float
    s: float
    N: int
    eps: float = 0.1
    sign: int = 1
    dt: float = 1e-3
    horizon: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise InvalidParameterError("alpha must be positive")
        if not (0 < self.eps <= 0.25):
            raise InvalidParameterError("eps must lie in (0, 1/4]")
        if self.N < 0:
            raise InvalidParameterError("N must be >= 0")
        if self.sign not in (-1, 0, 1):
            raise InvalidParameterError("sign must be +1, -1, or 0 (test hook)")
        if self.dt <= 0:
            raise InvalidParameterError("dt must be positive")
        if self.horizon <= 0:
            raise InvalidParameterError("horizon must be positive")
        if self.dt > self.horizon:
            raise InvalidParameterError("dt must not exceed the horizon")

    @property
    def sigma(self) -> float:
        return self.s - 0.5 - self.eps


@dataclass(frozen=True)
class Trajectory:
    """Recorded states of one run; times strictly increasing, shared cutoff."""

    times: np.ndarray
    states: tuple[SpectralField, ...]
    frame: str = "lab"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if len(self.states) != t.shape[0]:
            raise InvalidParameterError("times and states must have equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise InvalidParameterError("times must be strictly increasing")
        cutoffs = {f.cutoff for f in self.states}
        if len(cutoffs) > 1:
            raise InvalidParameterError("states must share one cutoff")
        if self.frame not in ("lab", "interaction"):
            raise InvalidParameterError("frame must be 'lab' or 'interaction'")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def final(self) -> SpectralField:
        return self.states[-1]


# ----------------------------------------------------------------------
# elementary transforms


def _phases(modes: np.ndarray, t: float, alpha: float) -> np.ndarray:
    lam = np.abs(modes.astype(float)) ** (2.0 * alpha)
    return np.exp(1j * t * lam)


def linear_propagator(f: SpectralField, t: float, alpha: float) -> SpectralField:
    """Free flow S(t): multiply mode n by exp(i t |n|^(2a)); exactly unitary."""
    return f.with_coeffs(f.coeffs * _phases(f.modes, t, alpha))


def gauge_forward(f: SpectralField, t: float) -> SpectralField:
    """Multiply by the unimodular mean-field factor exp(2 i t ||f||_L2^2)."""
    mass = float(np.sum(np.abs(f.coeffs) ** 2))
    return f.with_coeffs(f.coeffs * np.exp(2j * t * mass))


def gauge_inverse(f: SpectralField, t: float) -> SpectralField:
    return gauge_forward(f, -t)


# ----------------------------------------------------------------------
# right-hand sides


def rhs_gauged(f: SpectralField, p: SimParams) -> SpectralField:
    """Lab-frame derivative i |n|^(2a) v_n - i * sign * C_n(v) at truncation p.N.

    The field may carry modes above p.N; those evolve exactly linearly.
    """
    if f.cutoff < p.N:
        raise InvalidParameterError(
            f"field cutoff {f.cutoff} is below the truncation {p.N}"
        )
    lam = np.abs(f.modes.astype(float)) ** (2.0 * p.alpha)
    out = 1j * lam * f.coeffs
    if p.sign != 0:
        out = out - 1j * p.sign * _cubic_batch(f.coeffs, f.cutoff, p.N)
    return f.with_coeffs(out)


def rhs_interaction(w: SpectralField, t: float, p: SimParams) -> SpectralField:
    """Interaction-frame derivative by literal summation over the nonresonant
    hyperplane:

        d/dt w_n = sign * [ -i sum_{Gamma_N(n)} e^{i t phi} w_{n1} conj(w_{n2}) w_{n3}
                            + i |w_n|^2 w_n ]           for |n| <= N.

    Quadratic in cost per mode; intended for cross-checks at small N.
    """
    if w.cutoff < p.N:
        raise InvalidParameterError(
            f"field cutoff {w.cutoff} is below the truncation {p.N}"
        )
    out = np.zeros_like(w.coeffs)
    if p.sign == 0:
        return w.with_coeffs(out)
    c = w.coeffs
    off = w.cutoff
    for n in range(-p.N, p.N + 1):
        acc = 0.0 + 0.0j

        def add(n1, n2, n3, n=n):
            nonlocal acc
            ph = phase(FrequencyQuad(n1, n2, n3, n), p.alpha)
            acc += np.exp(1j * t * ph) * c[n1 + off] * np.conj(c[n2 + off]) * c[n3 + off]

        visit_hyperplane(n, p.N, add)
        wn = c[n + off]
        out[n + off] = p.sign * (-1j * acc + 1j * (abs(wn) ** 2) * wn)
    return w.with_coeffs(out)


# ----------------------------------------------------------------------
# integrator


def _rhs_w_batch(wc: np.ndarray, t: float, cutoff: int, p: SimParams,
                 gauged: bool = True) -> np.ndarray:
    """Interaction-frame derivative on raw (2*cutoff+1, ...) coefficients.

    Evaluates the cubic term in the lab frame (one padded FFT) and conjugates
    by the free phases, which is exact for any t.
    """
    if p.sign == 0:
        return np.zeros_like(wc)
    modes = np.arange(-cutoff, cutoff + 1)
    ph = _phases(modes, t, p.alpha)
    if wc.ndim > 1:
        ph = ph.reshape((-1,) + (1,) * (wc.ndim - 1))
    vc = ph * wc
    cub = _cubic_batch(vc, cutoff, p.N, gauged=gauged)
    return np.conj(ph) * (-1j * p.sign) * cub


def _check_finite(wc: np.ndarray, t: float) -> None:
    m = np.abs(wc)
    if not np.all(np.isfinite(m)) or np.max(m) > _BLOWUP_LIMIT:
        raise BlowupError(t)


def _n_steps(span: float, dt: float) -> int:
    return max(1, int(round(abs(span) / dt)))


def _integrate_batch(coeffs: np.ndarray, cutoff: int, p: SimParams, t0: float,
                     t1: float, gauged: bool = True,
                     recorder=None) -> np.ndarray:
    """Fixed-step RK4 on the interaction variable from t0 to t1 (either
    direction).  `recorder(k, t, wc)` is called after every accepted step.
    Returns lab-frame coefficients at t1.
    """
    span = t1 - t0
    if span == 0.0:
        return coeffs.copy()
    n_steps = _n_steps(span, p.dt)
    h = span / n_steps
    modes = np.arange(-cutoff, cutoff + 1)
    ph_shape = (-1,) + (1,) * (coeffs.ndim - 1)
    wc = (np.conj(_phases(modes, t0, p.alpha)).reshape(ph_shape) * coeffs
          if t0 != 0.0 else coeffs.copy())
    t = t0
    for k in range(n_steps):
        k1 = _rhs_w_batch(wc, t, cutoff, p, gauged)
        k2 = _rhs_w_batch(wc + 0.5 * h * k1, t + 0.5 * h, cutoff, p, gauged)
        k3 = _rhs_w_batch(wc + 0.5 * h * k2, t + 0.5 * h, cutoff, p, gauged)
        k4 = _rhs_w_batch(wc + h * k3, t + h, cutoff, p, gauged)
        wc = wc + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (k + 1) * h
        _check_finite(wc, t)
        if recorder is not None:
            recorder(k + 1, t, wc)
    return _phases(modes, t, p.alpha).reshape(ph_shape) * wc


def flow(f0: SpectralField, p: SimParams, t: float, gauged: bool = True) -> SpectralField:
    """Solution map at time t (either sign) applied to f0; lab frame."""
    if f0.cutoff < p.N:
        raise InvalidParameterError(
            f"field cutoff {f0.cutoff} is below the truncation {p.N}"
        )
    return f0.with_coeffs(_integrate_batch(f0.coeffs, f0.cutoff, p, 0.0, t, gauged))


def flow_batch(coeffs: np.ndarray, p: SimParams, t: float) -> np.ndarray:
    """Solution map applied column-wise to a (2N+1, M) coefficient matrix."""
    cutoff = (coeffs.shape[0] - 1) // 2
    return _integrate_batch(coeffs, cutoff, p, 0.0, t)


def evolve(f0: SpectralField, p: SimParams, record_every: int = 1,
           gauged: bool = True) -> Trajectory:
    """Integrate from 0 to the horizon, recording every `record_every` steps.

    The number of steps is round(horizon / dt), so the final recorded time
    equals the horizon to within one step.  Raises BlowupError (with the
    failure time) if the state leaves the finite range.
    """
    if record_every < 1:
        raise InvalidParameterError("record_every must be >= 1")
    if f0.cutoff < p.N:
        raise InvalidParameterError(
            f"field cutoff {f0.cutoff} is below the truncation {p.N}"
        )
    modes = f0.modes
    n_steps = _n_steps(p.horizon, p.dt)
    times = [0.0]
    states = [f0]

    def recorder(k, t, wc):
        if k % record_every == 0 or k == n_steps:
            vc = _phases(modes, t, p.alpha) * wc
            times.append(t)
            states.append(f0.with_coeffs(vc))

    _integrate_batch(f0.coeffs, f0.cutoff, p, 0.0, p.horizon,
                     gauged=gauged, recorder=recorder)
    return Trajectory(np.array(times), tuple(states), frame="lab")


# ----------------------------------------------------------------------
# diagnostics


def truncated_mass(f: SpectralField) -> float:
    """l^2 mass over all stored modes."""
    return float(np.sum(np.abs(f.coeffs) ** 2))


def truncated_energy(f: SpectralField, p: SimParams) -> float:
    """Conserved energy of the truncated gauged flow:

        (1/2) sum |n|^(2a) |v_n|^2  -  sign/4 * avg |P_N v|^4.

    With the propagator convention S(t) = exp(i t |n|^(2a)) used throughout,
    this pairing (minus sign on the quartic term for the defocusing flow) is
    the invariant one; the quadratic part alone is conserved when sign = 0.
    """
    lam = np.abs(f.modes.astype(float)) ** (2.0 * p.alpha)
    kinetic = 0.5 * float(np.sum(lam * np.abs(f.coeffs) ** 2))
    if p.sign == 0:
        return kinetic
    quartic = physical_lp(f.project(p.N), 4) ** 4
    return kinetic - p.sign * 0.25 * quartic


def conservation_report(tr: Trajectory, p: SimParams) -> dict[str, float]:
    """Max relative drift of mass and energy over the recorded states."""
    if len(tr.states) == 0:
        raise InvalidParameterError("trajectory is empty")
    m0 = truncated_mass(tr.states[0])
    e0 = truncated_energy(tr.states[0], p)
    mass_drift = 0.0
    energy_drift = 0.0
    for f in tr.states[1:]:
        mass_drift = max(mass_drift, abs(truncated_mass(f) - m0) / max(1.0, abs(m0)))
        energy_drift = max(
            energy_drift, abs(truncated_energy(f, p) - e0) / max(1.0, abs(e0))
        )
    return {"mass_drift": mass_drift, "energy_drift": energy_drift}


def suggested_dt(f0: SpectralField) -> float:
    """Step heuristic keeping the nonlinear phase rotation per step small:
    min(1e-2, 0.1 / (1 + ||f0||_L2^2))."""
    return float(min(1e-2, 0.1 / (1.0 + truncated_mass(f0))))
