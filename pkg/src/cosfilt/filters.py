"""Binomial time-series expansion of the cosine spectral filter.

The operator cos^M((H - E)/scale) suppresses spectral weight farther than
about delta from E once M = scale^2/delta^2.  Expanding the M-th power of
the cosine binomially rewrites the filter as a sum of plain evolution
operators at the stroboscopic times t_m = 2m/scale, which is exactly what
time-series amplitude measurements can supply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

GRID_FULL = "full"
GRID_OPTIMIZED = "optimized"

# Largest |x| for which exp(-x^2/2) >= |cos x|, i.e. where the Gaussian
# dominates the cosine and the Gaussian-shape error bound applies.
COS_GAUSS_CROSSOVER = brentq(lambda x: math.exp(-0.5 * x * x) + math.cos(x), 1.6, 2.0)

# log(cos x) + x^2/2 = sum_k _LOGCOS_SERIES[k] * x^(4+2k), |x| small
_LOGCOS_SERIES = (-1.0 / 12.0, -1.0 / 45.0, -17.0 / 2520.0, -31.0 / 14175.0,
                  -0.00073860296082518304741, -0.00025658057404089150121,
                  -9.0989649190707391766e-05)


def nearest_even(value: float) -> int:
    """Nearest even integer; exact ties (odd integers) round up."""
    if value < 0:
        raise ValueError(f"nearest_even requires a non-negative value, got {value}")
    return 2 * int(math.floor(value / 2.0 + 0.5))


def truncation_error_bound(x: float) -> float:
    """Operator-norm error 2*exp(-x^2/2) of keeping only |m| <= x*sqrt(M)."""
    if x < 0:
        raise ValueError("truncation parameter x must be >= 0")
    return 2.0 * math.exp(-0.5 * x * x)


def _central_weight(m_order: int) -> float:
    """2^-M binom(M, M/2): exact integer arithmetic for small M, the
    asymptotic central-binomial series (relative error < (M/2)^-5) above."""
    if m_order == 0:
        return 1.0
    half = m_order // 2
    if m_order <= 20_000:
        c = math.comb(m_order, half)
        bits = c.bit_length()
        shift = max(bits - 64, 0)
        return math.ldexp(float(c >> shift), shift - m_order)
    inv = 1.0 / half
    series = 1.0 + inv * (-1.0 / 8 + inv * (1.0 / 128 + inv * (5.0 / 1024
                                                               - inv * 21.0 / 32768)))
    return series / math.sqrt(math.pi * half)


def binomial_coefficients(m_order: int, radius: int) -> np.ndarray:
    """Weights c_m = 2^-M binom(M, M/2 - m) for m = -radius..radius.

    Anchored at the exactly-computed central weight and grown outward by the
    ratio recurrence c_m/c_{m-1} = (M/2-m+1)/(M/2+m), so neither the
    binomial nor the 2^-M prefactor is ever formed; good to ~1e-13 relative
    out to the radii any practical truncation uses, for M up to ~10^6.
    """
    if m_order < 0 or m_order % 2 != 0:
        raise ValueError(f"order M must be a non-negative even integer, got {m_order}")
    if radius < 0 or radius > m_order // 2:
        raise ValueError(f"radius must lie in [0, M/2], got {radius} for M={m_order}")
    center = _central_weight(m_order)
    if radius == 0:
        return np.array([center])
    m = np.arange(1.0, radius + 1.0)
    half = m_order // 2
    right = center * np.cumprod((half - m + 1.0) / (half + m))
    return np.concatenate([right[::-1], [center], right])


@dataclass(frozen=True)
class FilterSpec:
    """Parameters pinning one cosine filter and its time grid.

    The full grid uses scale = n_sites and resolves the filter over the whole
    spectrum; the optimized grid rescales to r*sqrt(n_sites), shrinking both
    the number of time points and the maximum evolution time when the probed
    state has sqrt(N)-scale energy spread.  ``exponent_scale`` is stored
    explicitly so downstream code never re-derives which grid was used.
    """

    delta: float
    n_sites: int
    x: float = 3.0
    grid: str = GRID_FULL
    r: float | None = None
    exponent_scale: float = field(default=None)

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.x <= 0:
            raise ValueError("x must be > 0")
        if self.n_sites < 2:
            raise ValueError("n_sites must be >= 2")
        if self.grid not in (GRID_FULL, GRID_OPTIMIZED):
            raise ValueError(f"unknown grid kind {self.grid!r}")
        if self.grid == GRID_OPTIMIZED:
            if self.r is None or self.r <= 0:
                raise ValueError("optimized grid requires r > 0")
            derived = self.r * math.sqrt(self.n_sites)
        else:
            derived = float(self.n_sites)
        if self.exponent_scale is None:
            object.__setattr__(self, "exponent_scale", derived)
        elif self.exponent_scale <= 0:
            raise ValueError("exponent_scale must be > 0")

    @property
    def order(self) -> int:
        """Cosine power M = nearest-even(scale^2 / delta^2)."""
        return nearest_even((self.exponent_scale / self.delta) ** 2)

    @property
    def radius_nominal(self) -> int:
        """Requested truncation radius R = ceil(x * scale / delta)."""
        v = self.x * self.exponent_scale / self.delta
        return int(math.ceil(v * (1.0 - 1e-12)))

    @property
    def radius(self) -> int:
        """Effective radius: coefficients vanish beyond M/2, so clamp there."""
        return min(self.radius_nominal, self.order // 2)

    @property
    def t_max_nominal(self) -> float:
        """Maximum evolution time 2R/scale quoted for the nominal radius."""
        return 2.0 * self.radius_nominal / self.exponent_scale

    @property
    def truncation_bound(self) -> float:
        return truncation_error_bound(self.x)


@dataclass(frozen=True)
class FilterExpansion:
    """Realized expansion: weights c_m and times t_m for m = -R..R."""

    coeffs: np.ndarray
    times: np.ndarray
    spec: FilterSpec

    def __post_init__(self):
        if len(self.coeffs) != len(self.times) or len(self.coeffs) % 2 != 1:
            raise ValueError("coeffs and times must share an odd common length")

    @property
    def radius(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def positive_times(self) -> np.ndarray:
        """Grid restricted to t_m >= 0 (t -> -t is recovered by conjugation)."""
        return self.times[self.radius:]

    @property
    def positive_coeffs(self) -> np.ndarray:
        return self.coeffs[self.radius:]

    def coefficient_sum(self) -> float:
        return float(self.coeffs.sum())

    @classmethod
    def flat(cls, spec: FilterSpec) -> "FilterExpansion":
        """Single-term expansion c_0 = 1: the delta -> infinity limit."""
        return cls(coeffs=np.ones(1), times=np.zeros(1), spec=spec)


def build_expansion(spec: FilterSpec) -> FilterExpansion:
    """Materialize weights and times for a filter spec.

    Raises if the rounded cosine power is zero (delta too large for this
    scale); use :meth:`FilterExpansion.flat` for the explicit flat limit.
    """
    m_order = spec.order
    if m_order == 0:
        raise ValueError(
            f"delta={spec.delta} exceeds exponent scale {spec.exponent_scale}: "
            "rounded cosine power is 0 (flat filter); use FilterExpansion.flat")
    radius = spec.radius
    coeffs = binomial_coefficients(m_order, radius)
    times = 2.0 * np.arange(-radius, radius + 1) / spec.exponent_scale
    return FilterExpansion(coeffs=coeffs, times=times, spec=spec)


def _log_cos_plus_half_square(x: np.ndarray) -> np.ndarray:
    """log(cos x) + x^2/2, computed without cancellation for |x| < 1.2."""
    x2 = x * x
    small = np.abs(x) <= 0.15
    x2s = np.where(small, x2, 0.0)
    series = np.zeros_like(x2s)
    for c in reversed(_LOGCOS_SERIES):
        series = (series + c) * x2s
    series = series * x2s  # lift P(x^2)*x^2 from the loop to the leading x^4
    x_l = np.where(small, 0.1, x)
    large = np.log1p(-2.0 * np.sin(0.5 * x_l) ** 2) + 0.5 * x_l * x_l
    return np.where(small, series, large)


def gaussian_cos_gap(m_order: int, x):
    """Gap f_M(x) = exp(-M x^2 / 2) - cos^M(x) for even M >= 2.

    Near x = 0 the two terms agree to fourth order, so the difference is
    assembled from a cancellation-free series for log(cos x) + x^2/2 rather
    than by direct subtraction.
    """
    if m_order < 2 or m_order % 2 != 0:
        raise ValueError("m_order must be an even integer >= 2")
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    inner = ax < 1.2
    xi = np.where(inner, xa, 0.0)
    gauss = np.exp(-0.5 * m_order * xi * xi)
    f_inner = gauss * (-np.expm1(m_order * _log_cos_plus_half_square(xi)))
    xo = np.where(inner, 2.0, xa)
    f_outer = np.exp(-0.5 * m_order * xo * xo) - (np.cos(xo) ** 2) ** (m_order // 2)
    out = np.where(inner, f_inner, f_outer)
    return float(out) if np.isscalar(x) else out
