"""Gaussian ensembles on Fourier coefficients and measure-transport checks.

The reference measure is the law of the random field whose mode-n coefficient
is (a + i b) / <n>^s with a, b independent standard normals, restricted to
|n| <= N.  Weighted variants multiply in the density

    F(v) = 1{||v||_L2 <= r} * exp(-1/2 R(P_N v))

with R the normal-form correction.  Everything downstream is ratio-based or
self-normalized, so normalization constants never appear.

Sampling is counter-based: sample k of an ensemble is generated by a Philox
stream keyed on (seed, k), so any sample can be produced independently of the
others and of iteration order, bit-identically across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as _stats

from .dynamics import SimParams, flow_batch
from .energy import correction_R_batch, derivative_terms, fd_energy_derivative
from .errors import (
    DegenerateEstimatorError,
    InvalidParameterError,
    UnsupportedDimensionError,
)
from .spectral import SpectralField, bracket, fourier_lebesgue_norm, sobolev_norm

__all__ = [
    "Ensemble",
    "DensityValue",
    "RegionSpec",
    "sample_mu",
    "default_radius",
    "density_F",
    "ensemble_density_values",
    "lp_moment",
    "parse_statistic",
    "r_convergence",
    "flow_jacobian_det",
    "pushforward_check",
    "PushforwardCheck",
    "gauge_invariance_check",
    "GaugeCheck",
    "ratio_scan",
    "ScanRow",
    "density_l2_norm",
    "moment_growth_exponent",
    "gaussian_tail_fit",
]


def _sample_coeffs(p: SimParams, seed: int, index: int) -> np.ndarray:
    key = np.array([seed, index], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    L = 2 * p.N + 1
    draws = rng.standard_normal(2 * L)
    g = draws[0::2] + 1j * draws[1::2]
    return g / bracket(np.arange(-p.N, p.N + 1)) ** p.s


def sample_mu(p: SimParams, seed: int, index: int) -> SpectralField:
    """Draw sample `index` of the Gaussian ensemble: mode-n coefficient
    (a + ib) / <n>^s, so E|coeff(n)|^2 = 2 <n>^(-2s), modes |n| <= p.N."""
    return SpectralField(p.N, _sample_coeffs(p, seed, index))


@dataclass
class Ensemble:
    """Seeded, lazily materialized collection of Gaussian samples.

    Sample k is a pure function of (seed, k); the coefficient matrix caches
    all samples as columns of a (2N+1, size) array.
    """

    params: SimParams
    seed: int
    size: int
    _matrix: np.ndarray | None = field(default=None, repr=False, compare=False)

    def sample(self, index: int) -> SpectralField:
        if not (0 <= index < self.size):
            raise InvalidParameterError(f"index {index} outside ensemble of {self.size}")
        return sample_mu(self.params, self.seed, index)

    def coeff_matrix(self) -> np.ndarray:
        if self._matrix is None:
            L = 2 * self.params.N + 1
            m = np.empty((L, self.size), dtype=np.complex128)
            for k in range(self.size):
                m[:, k] = _sample_coeffs(self.params, self.seed, k)
            m.flags.writeable = False
            self._matrix = m
        return self._matrix

    def fields(self) -> Iterable[SpectralField]:
        m = self.coeff_matrix()
        for k in range(self.size):
            yield SpectralField(self.params.N, m[:, k])


# ----------------------------------------------------------------------
# weighted density


@dataclass(frozen=True)
class DensityValue:
    """Indicator and positive weight of the truncated density at one field."""

    indicator: int
    weight: float


def default_radius(p: SimParams) -> float:
    """Mass-ball radius 3 * E[||u||_L2^2]^(1/2), which keeps the indicator
    active on nearly all samples."""
    expected = 2.0 * float(np.sum(bracket(np.arange(-p.N, p.N + 1)) ** (-2.0 * p.s)))
    return 3.0 * math.sqrt(expected)


def density_F(f: SpectralField, p: SimParams, r: float,
              trunc: int | None = None) -> DensityValue:
    """Density F(f) = 1{||f||_L2 <= r} * exp(-1/2 R(P_T f)), T = trunc or p.N."""
    from .energy import correction_R

    T = p.N if trunc is None else trunc
    mass = float(np.sum(np.abs(f.coeffs) ** 2))
    ind = 1 if math.sqrt(mass) <= r else 0
    weight = math.exp(-0.5 * correction_R(f, p.s, p.alpha, T))
    return DensityValue(indicator=ind, weight=weight)


def ensemble_density_values(e: Ensemble, r: float,
                            trunc: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(indicator, weight) arrays of the density over all samples."""
    p = e.params
    T = p.N if trunc is None else trunc
    V = e.coeff_matrix()
    mass = np.sum(np.abs(V) ** 2, axis=0)
    ind = (np.sqrt(mass) <= r).astype(float)
    Rv = correction_R_batch(V, p.s, p.alpha, T)
    return ind, np.exp(-0.5 * Rv)


# ----------------------------------------------------------------------
# moment estimators


def parse_statistic(spec) -> tuple[str, float]:
    """Accept 'name:arg' strings or (name, arg) pairs for the moment statistics
    fl_norm(sigma), sobolev_norm(sigma), abs_coeff(n), l2_block(M)."""
    if isinstance(spec, str):
        name, _, arg = spec.partition(":")
        return name.strip(), float(arg) if arg else 0.0
    name, arg = spec
    return str(name), float(arg)


def _evaluate_statistic(name: str, arg: float, V: np.ndarray, p: SimParams) -> np.ndarray:
    modes = np.arange(-p.N, p.N + 1)
    if name == "fl_norm":
        w = bracket(modes) ** arg
        return np.max(w[:, None] * np.abs(V), axis=0)
    if name == "sobolev_norm":
        w = bracket(modes) ** (2.0 * arg)
        return np.sqrt(np.sum(w[:, None] * np.abs(V) ** 2, axis=0))
    if name == "abs_coeff":
        n = int(arg)
        if abs(n) > p.N:
            raise InvalidParameterError(f"mode {n} outside cutoff {p.N}")
        return np.abs(V[n + p.N])
    if name == "l2_block":
        M = int(arg)
        if not (1 <= M <= p.N):
            raise InvalidParameterError(f"block size must lie in [1, {p.N}]")
        rows = slice(p.N + 1, p.N + M + 1)
        w = bracket(np.arange(1, M + 1)) ** (2.0 * p.s)
        return np.sqrt(np.sum(w[:, None] * np.abs(V[rows]) ** 2, axis=0))
    raise InvalidParameterError(f"unknown statistic {name!r}")


def lp_moment(stat, p_exp: float, e: Ensemble, weight=None) -> tuple[float, float]:
    """Self-normalized L^p moment of a statistic over the ensemble.

    Returns ((sum w x^p / sum w)^(1/p), jackknife standard error).  `weight`
    may be None (plain average), a mass-ball radius r (density weights), or a
    precomputed per-sample weight array.  The l2_block statistic is the block
    norm of the whitened coefficients <n>^s c_n over 1 <= n <= M, so its law
    is that of a chi with 2M degrees of freedom.
    """
    if p_exp < 1:
        raise InvalidParameterError("p must be >= 1")
    if e.size == 0:
        raise DegenerateEstimatorError("empty ensemble")
    name, arg = parse_statistic(stat)
    V = e.coeff_matrix()
    x = _evaluate_statistic(name, arg, V, e.params)
    if weight is None:
        w = np.ones_like(x)
    elif np.isscalar(weight):
        ind, wt = ensemble_density_values(e, float(weight))
        w = ind * wt
    else:
        w = np.asarray(weight, dtype=float)
    sw = float(np.sum(w))
    if sw == 0.0:
        raise DegenerateEstimatorError("all weights vanish")
    if e.size < 2:
        raise DegenerateEstimatorError("need at least two samples for a standard error")
    xp = x**p_exp
    swx = float(np.sum(w * xp))
    value = (swx / sw) ** (1.0 / p_exp)
    # delete-1 jackknife from the totals
    denom = sw - w
    if not np.all(denom > 0):
        raise DegenerateEstimatorError("jackknife degenerate: a single sample carries all weight")
    loo = (np.maximum(swx - w * xp, 0.0) / denom) ** (1.0 / p_exp)
    m = e.size
    se = math.sqrt((m - 1) / m * float(np.sum((loo - np.mean(loo)) ** 2)))
    return value, se


# ----------------------------------------------------------------------
# truncation convergence of the correction


def r_convergence(p: SimParams, e: Ensemble, N_list: Sequence[int],
                  p_norm: float = 2.0) -> list[tuple[int, float]]:
    """L^p distance of the correction at truncation N from its value at the
    largest listed truncation, per N; the column decreases as N grows."""
    if len(N_list) == 0:
        raise InvalidParameterError("N_list must be nonempty")
    ns = sorted(set(int(n) for n in N_list))
    if ns[-1] > e.params.N:
        raise InvalidParameterError("largest N exceeds the sampler cutoff")
    V = e.coeff_matrix()
    r_ref = correction_R_batch(V, p.s, p.alpha, ns[-1])
    out = []
    for N in ns[:-1]:
        diff = correction_R_batch(V, p.s, p.alpha, N) - r_ref
        out.append((N, float(np.mean(np.abs(diff) ** p_norm) ** (1.0 / p_norm))))
    return out


# ----------------------------------------------------------------------
# transport experiments


def flow_jacobian_det(f0: SpectralField, p: SimParams, t: float,
                      h: float = 1e-5) -> float:
    """Determinant of the finite-difference Jacobian of the flow map in real
    coordinates (Re then Im of every mode); 1 up to FD error by volume
    preservation.  Limited to phase-space dimension 2(2N+1) <= 18."""
    L = 2 * p.N + 1
    dim = 2 * L
    if dim > 18:
        raise UnsupportedDimensionError(
            f"phase-space dimension {dim} exceeds the dense-Jacobian limit 18"
        )
    if f0.cutoff != p.N:
        raise InvalidParameterError("initial field must live at the truncation cutoff")
    if t == 0.0:
        return 1.0
    base = np.concatenate([f0.coeffs.real, f0.coeffs.imag])
    pts = np.repeat(base[:, None], 2 * dim, axis=1)
    for j in range(dim):
        pts[j, 2 * j] += h
        pts[j, 2 * j + 1] -= h
    Z = pts[:L] + 1j * pts[L:]
    out = flow_batch(Z, p, t)
    X = np.vstack([out.real, out.imag])
    J = (X[:, 0::2] - X[:, 1::2]) / (2.0 * h)
    return float(np.linalg.det(J))


@dataclass(frozen=True)
class RegionSpec:
    """Target set for transport estimates: an H^sigma ball intersected with an
    optional half-space {Re coeff(n0) >= 0}."""

    sigma: float = 0.0
    center: SpectralField | None = None
    radius: float | None = None
    halfspace_mode: int | None = None

    def membership(self, V: np.ndarray, cutoff: int) -> np.ndarray:
        keep = np.ones(V.shape[1], dtype=bool)
        if self.radius is not None:
            D = V
            if self.center is not None:
                D = V - self.center.project(cutoff).coeffs[:, None]
            w = bracket(np.arange(-cutoff, cutoff + 1)) ** (2.0 * self.sigma)
            keep &= np.sum(w[:, None] * np.abs(D) ** 2, axis=0) <= self.radius**2
        if self.halfspace_mode is not None:
            n0 = self.halfspace_mode
            if abs(n0) > cutoff:
                raise InvalidParameterError(f"half-space mode {n0} outside cutoff")
            keep &= V[n0 + cutoff].real >= 0.0
        return keep


@dataclass(frozen=True)
class PushforwardCheck:
    """Two independent estimates of the same transported weighted mass."""

    lhs: float
    lhs_ci: tuple[float, float]
    rhs: float
    rhs_ci: tuple[float, float]
    ratio: float
    samples_in_region: int

    @property
    def cis_overlap(self) -> bool:
        return self.lhs_ci[0] <= self.rhs_ci[1] and self.rhs_ci[0] <= self.lhs_ci[1]


def _mean_ci(x: np.ndarray) -> tuple[float, tuple[float, float]]:
    m = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return m, (m - 1.96 * se, m + 1.96 * se)


def pushforward_check(A: RegionSpec, p: SimParams, r: float, t: float,
                      e: Ensemble) -> PushforwardCheck:
    """Compare the weighted mass transported onto A with its change-of-variables
    expression.

    Estimate 1 pulls samples back: mean of F(v) * 1{flow(-t) v in A}.  Estimate
    2 keeps samples in A and reweights with the modified energy along the
    forward flow: mean of 1_A(v) * 1{||v|| <= r} * exp(-E(flow(t) v)/2 +
    ||v||_{H^s}^2 / 2).  Both are unnormalized masses against the same Gaussian
    reference, so volume preservation plus mass conservation make them equal;
    at t = 0 they coincide sample-by-sample.
    """
    if e.params.N != p.N:
        raise InvalidParameterError("sampler cutoff must equal the dynamics cutoff")
    V = e.coeff_matrix()
    mass = np.sum(np.abs(V) ** 2, axis=0)
    ind = np.sqrt(mass) <= r
    Rv = correction_R_batch(V, p.s, p.alpha, p.N)
    F = ind * np.exp(-0.5 * Rv)

    if t == 0.0:
        W = U = V
    else:
        W = flow_batch(V, p, -t)
        U = flow_batch(V, p, +t)

    in_A_back = A.membership(W, p.N)
    lhs_terms = F * in_A_back

    w_hs = bracket(np.arange(-p.N, p.N + 1)) ** (2.0 * p.s)
    hs_V = np.sum(w_hs[:, None] * np.abs(V) ** 2, axis=0)
    if t == 0.0:
        E_U = hs_V + Rv
    else:
        hs_U = np.sum(w_hs[:, None] * np.abs(U) ** 2, axis=0)
        E_U = hs_U + correction_R_batch(U, p.s, p.alpha, p.N)
    in_A = A.membership(V, p.N)
    rhs_terms = in_A * ind * np.exp(-0.5 * E_U + 0.5 * hs_V)

    hits = int(np.sum(in_A_back | in_A))
    if hits == 0:
        raise DegenerateEstimatorError("no samples land in the target region")
    lhs, lhs_ci = _mean_ci(lhs_terms)
    rhs, rhs_ci = _mean_ci(rhs_terms)
    ratio = lhs / rhs if rhs != 0 else math.inf
    return PushforwardCheck(lhs, lhs_ci, rhs, rhs_ci, ratio, hits)


@dataclass(frozen=True)
class GaugeCheck:
    """Two-sample Kolmogorov-Smirnov distances between an ensemble and its
    mean-field gauge pushforward, per statistic."""

    stats: tuple[tuple[str, float], ...]
    max_ks: float
    critical_1pct: float


def gauge_invariance_check(p: SimParams, t: float, e: Ensemble) -> GaugeCheck:
    """Empirical invariance of the Gaussian ensemble under the gauge map
    f -> exp(2 i t ||f||^2) f, via KS distances on a fixed statistic battery:
    |coeff(n)|^2 for |n| <= 3, the mass, and Re coeff(1)."""
    V = e.coeff_matrix()
    mass = np.sum(np.abs(V) ** 2, axis=0)
    G = V * np.exp(2j * t * mass)[None, :]
    battery: list[tuple[str, np.ndarray, np.ndarray]] = []
    for n in range(-min(3, p.N), min(3, p.N) + 1):
        battery.append(
            (f"abs_sq_coeff({n})", np.abs(V[n + p.N]) ** 2, np.abs(G[n + p.N]) ** 2)
        )
    battery.append(("l2_mass", np.sqrt(mass), np.sqrt(np.sum(np.abs(G) ** 2, axis=0))))
    if p.N >= 1:
        battery.append(("re_coeff(1)", V[1 + p.N].real, G[1 + p.N].real))
    rows = []
    for name, a, b in battery:
        if t == 0.0:
            d = 0.0
        else:
            d = float(_stats.ks_2samp(a, b, method="asymp").statistic)
        rows.append((name, d))
    m = e.size
    critical = math.sqrt(-math.log(0.005) / 2.0) * math.sqrt(2.0 / m)
    return GaugeCheck(tuple(rows), max(d for _, d in rows), critical)


# ----------------------------------------------------------------------
# ensemble scans used by the batch front end and the acceptance suite


@dataclass(frozen=True)
class ScanRow:
    """One (truncation, sample) entry of the derivative-bound scan."""

    N: int
    index: int
    strong: float
    weak: float
    terms: tuple[float, float, float, float]
    fd_residual: float | None = None


def ratio_scan(base: SimParams, N_list: Sequence[int], size: int, seed: int,
               eps_tilde: float | None = None, fd_step: float | None = None,
               threads: int = 1) -> list[ScanRow]:
    """Evaluate both derivative-bound ratios on a seeded ensemble per
    truncation.  With fd_step set, also attach the relative deviation of the
    four-term sum from a centered finite difference of the modified energy."""
    et = eps_tilde if eps_tilde is not None else base.eps / 2.0
    rows: list[ScanRow] = []

    def one(N: int, k: int) -> ScanRow:
        p = replace(base, N=N)
        f = sample_mu(p, seed, k)
        terms = derivative_terms(f, 0.0, p)
        num = abs(terms.total)
        den_s = sobolev_norm(f, p.sigma) ** 6
        den_w = (
            fourier_lebesgue_norm(f, p.s - et, np.inf) ** 2
            * sobolev_norm(f, p.sigma) ** 4
        )
        strong = num / den_s if den_s > 0 else 0.0
        weak = num / den_w if den_w > 0 else 0.0
        res = None
        if fd_step is not None:
            fd = fd_energy_derivative(f, p, fd_step, richardson=True)
            res = abs(terms.total - fd) / max(abs(fd), 1e-12)
        return ScanRow(N, k, strong, weak, tuple(terms), res)

    jobs = [(int(N), k) for N in N_list for k in range(size)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda nk: one(*nk), jobs))
    else:
        rows = [one(N, k) for N, k in jobs]
    return rows


def density_l2_norm(e: Ensemble, r: float, trunc: int | None = None) -> float:
    """Empirical L^2 norm of the density over the ensemble."""
    ind, wt = ensemble_density_values(e, r, trunc)
    return float(np.sqrt(np.mean((ind * wt) ** 2)))


def moment_growth_exponent(e: Ensemble, sigma: float, p_list: Sequence[float],
                           weight_r: float | None = None) -> tuple[float, list[tuple[float, float]]]:
    """Fit beta in ||stat||_{L^p} ~ C p^beta for the weighted-sup statistic at
    regularity sigma; Gaussian-type tails give beta near 1/2."""
    if weight_r is not None:
        ind, wt = ensemble_density_values(e, weight_r)
        w = ind * wt
    else:
        w = None
    pts = []
    for q in p_list:
        val, _ = lp_moment(("fl_norm", sigma), q, e, weight=w)
        pts.append((float(q), val))
    logs = np.log(np.array(pts))
    beta = float(np.polyfit(logs[:, 0], logs[:, 1], 1)[0])
    return beta, pts


def gaussian_tail_fit(values: np.ndarray, q_lo: float = 0.5,
                      q_hi: float = 0.999) -> float:
    """Slope c of -log P[X >= K] against K^2 over the quantile window; a
    positive slope certifies a subgaussian empirical tail."""
    v = np.sort(np.asarray(values, dtype=float))
    m = len(v)
    ks = np.linspace(np.quantile(v, q_lo), np.quantile(v, q_hi), 25)
    surv = np.array([np.sum(v >= k) / m for k in ks])
    keep = surv > 0
    if keep.sum() < 2:
        raise DegenerateEstimatorError("not enough tail mass to fit")
    slope = float(np.polyfit(ks[keep] ** 2, -np.log(surv[keep]), 1)[0])
    return slope
