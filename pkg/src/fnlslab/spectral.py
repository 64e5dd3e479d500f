"""Fields on the torus, their norms, and the FFT-based cubic nonlinearity.

A function on the torus [0, 2*pi) is stored purely on the Fourier side: a
field with cutoff N keeps the complex coefficients of the modes -N..N in a
flat array, entry k holding the coefficient of mode k - N.  All physical-side
integrals use the normalized measure (1/2pi) * dx, so the L^2 norm of a field
equals the l^2 norm of its coefficients with no 2*pi bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .errors import InvalidParameterError, UndefinedRatioError

__all__ = [
    "SpectralField",
    "SobolevIndex",
    "bracket",
    "sobolev_norm",
    "fourier_lebesgue_norm",
    "physical_lp",
    "cubic_term",
    "gn_ratio",
]

# A Sobolev regularity exponent; kept as a plain float on purpose.
SobolevIndex = float


def bracket(n):
    """Japanese bracket <n> = (1 + n^2)^(1/2), elementwise on arrays."""
    n = np.asarray(n, dtype=float)
    return np.sqrt(1.0 + n * n)


@dataclass(frozen=True)
class SpectralField:
    """Immutable Fourier-coefficient snapshot of a field on the torus.

    Attributes:
        cutoff: largest retained mode N >= 0.
        coeffs: complex array of length 2N+1; entry k is the coefficient of
            mode k - N.  The array is copied on construction and frozen.
    """

    cutoff: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.cutoff < 0:
            raise InvalidParameterError("cutoff must be >= 0")
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.shape[0] != 2 * self.cutoff + 1:
            raise InvalidParameterError(
                f"coeffs must have length {2 * self.cutoff + 1}, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c.view(np.float64))):
            raise InvalidParameterError("coeffs must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(cutoff: int) -> "SpectralField":
        return SpectralField(cutoff, np.zeros(2 * cutoff + 1, dtype=np.complex128))

    @staticmethod
    def from_modes(pairs, cutoff: int) -> "SpectralField":
        """Build a field from an iterable of (mode, coefficient) pairs."""
        c = np.zeros(2 * cutoff + 1, dtype=np.complex128)
        for n, a in dict(pairs).items():
            if abs(n) > cutoff:
                raise InvalidParameterError(f"mode {n} outside cutoff {cutoff}")
            c[n + cutoff] = a
        return SpectralField(cutoff, c)

    # -- accessors ----------------------------------------------------

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1)

    def coeff(self, n: int) -> complex:
        if abs(n) > self.cutoff:
            return 0.0 + 0.0j
        return complex(self.coeffs[n + self.cutoff])

    def project(self, cutoff: int) -> "SpectralField":
        """Project onto modes |n| <= cutoff (truncating or zero-padding)."""
        if cutoff == self.cutoff:
            return self
        c = np.zeros(2 * cutoff + 1, dtype=np.complex128)
        m = min(cutoff, self.cutoff)
        c[cutoff - m : cutoff + m + 1] = self.coeffs[self.cutoff - m : self.cutoff + m + 1]
        return SpectralField(cutoff, c)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.cutoff, coeffs)

    def is_zero(self) -> bool:
        return bool(np.all(self.coeffs == 0))


# ----------------------------------------------------------------------
# norms


def sobolev_norm(f: SpectralField, sigma: SobolevIndex) -> float:
    """H^sigma norm: (sum over n of <n>^(2 sigma) |c_n|^2)^(1/2)."""
    w = bracket(f.modes) ** (2.0 * sigma)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def fourier_lebesgue_norm(f: SpectralField, sigma: SobolevIndex, q: float) -> float:
    """Weighted-coefficient l^q norm: || <n>^sigma c_n ||_{l^q}; q = inf gives the sup."""
    if not (q >= 1.0):
        raise InvalidParameterError(f"q must be >= 1 or inf, got {q}")
    weighted = bracket(f.modes) ** sigma * np.abs(f.coeffs)
    if np.isinf(q):
        return float(np.max(weighted)) if weighted.size else 0.0
    return float(np.sum(weighted**q) ** (1.0 / q))


def _grid_size(cutoff: int) -> int:
    # >= 2(2N+1) physical points: exact quadrature/convolution for cubic terms.
    return _fft.next_fast_len(max(2 * (2 * cutoff + 1), 4))


def _to_grid(coeffs: np.ndarray, cutoff: int, grid: int) -> np.ndarray:
    """Evaluate the trigonometric polynomial on a uniform grid of `grid` points.

    Works on a (2N+1,) vector or a (2N+1, M) batch (grid values per column).
    """
    shape = (grid,) + coeffs.shape[1:]
    spec = np.zeros(shape, dtype=np.complex128)
    n = np.arange(-cutoff, cutoff + 1)
    spec[n % grid] = coeffs
    return _fft.ifft(spec, axis=0) * grid


def _from_grid(values: np.ndarray, cutoff: int) -> np.ndarray:
    """Fourier coefficients of modes -N..N from grid samples."""
    grid = values.shape[0]
    spec = _fft.fft(values, axis=0) / grid
    n = np.arange(-cutoff, cutoff + 1)
    return spec[n % grid]


def physical_lp(f: SpectralField, p: int) -> float:
    """L^p norm under the normalized measure, for p in {2, 4}.

    p = 2 is Parseval; p = 4 samples |u|^4 on a zero-padded grid large enough
    that the quadrature of the degree-4N trigonometric polynomial is exact.
    """
    if p == 2:
        return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2)))
    if p == 4:
        g = _grid_size(f.cutoff)
        u = _to_grid(f.coeffs, f.cutoff, g)
        return float(np.mean(np.abs(u) ** 4) ** 0.25)
    raise InvalidParameterError(f"p must be 2 or 4, got {p}")


# ----------------------------------------------------------------------
# nonlinearity


def _cubic_batch(coeffs: np.ndarray, cutoff: int, trunc: int, gauged: bool = True) -> np.ndarray:
    """Gauged cubic nonlinearity on raw coefficient arrays (optionally batched).

    Computes P_T[(|g|^2 - 2 mean|g|^2) g] with g = P_T u and T = trunc, using a
    zero-padded grid so the convolution is alias-free on |n| <= T.  Output has
    the same storage cutoff as the input, with zeros above T.  With
    gauged=False the mean-square correction is omitted.
    """
    L = 2 * cutoff + 1
    out = np.zeros_like(coeffs)
    lo, hi = cutoff - trunc, cutoff + trunc + 1
    g = coeffs[lo:hi]
    grid = _grid_size(trunc)
    u = _to_grid(g, trunc, grid)
    w = (np.abs(u) ** 2) * u
    conv = _from_grid(w, trunc)
    if gauged:
        mass = np.sum(np.abs(g) ** 2, axis=0)
        conv = conv - 2.0 * mass * g
    out[lo:hi] = conv
    return out


def cubic_term(f: SpectralField, trunc: int) -> SpectralField:
    """Dealiased gauged cubic term P_T[(|P_T f|^2 - 2 avg |P_T f|^2) P_T f].

    The truncation level may be at most f.cutoff; output modes above it are
    zero.  Exact (not merely alias-reduced) by the factor-2 padded grid.
    """
    if trunc > f.cutoff:
        raise InvalidParameterError(f"truncation {trunc} exceeds field cutoff {f.cutoff}")
    if trunc < 0:
        raise InvalidParameterError("truncation must be >= 0")
    return f.with_coeffs(_cubic_batch(f.coeffs, f.cutoff, trunc))


def gn_ratio(f: SpectralField, alpha: float) -> float:
    """Interpolation-inequality ratio ||f||_L4^4 / (A^(1/alpha) ||f||_L2^(4-1/alpha))
    with A the inhomogeneously weighted norm (sum <n>^(2 alpha) |c_n|^2)^(1/2).

    Scale-invariant (degree 4 in f on both sides) and equal to 1 on a single
    zero mode.  The weight uses <n> rather than |n| so constants are admissible.
    """
    if alpha < 0.25:
        raise InvalidParameterError("alpha must be >= 1/4")
    if f.is_zero():
        raise UndefinedRatioError("ratio undefined for the zero field")
    num = physical_lp(f, 4) ** 4
    a = sobolev_norm(f, alpha)
    l2 = physical_lp(f, 2)
    return float(num / (a ** (1.0 / alpha) * l2 ** (4.0 - 1.0 / alpha)))
