"""Time-series estimators for filtered norms and observables.

Every quantity here is a weighted sum of measured amplitudes,
sum_m c_m e^{i E t_m} a(t_m), i.e. the expectation of the cosine filter
written through its stroboscopic expansion.  Phases always multiply the raw
amplitudes by e^{i E t_m}; for the optimized grid this is identical to
de-rotating the amplitudes to the mean-energy frame and applying
e^{i (E - E_psi) t_m}, and only this form keeps the full and optimized grids
numerically consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .device import AmplitudeSource, NoisySource
from .filters import (GRID_FULL, FilterExpansion, FilterSpec, build_expansion,
                      truncation_error_bound)


class UnresolvableEnergyError(RuntimeError):
    """Filtered denominator too small; carries search advice when available."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class EstimateResult:
    """One estimator output with its raw sums and truncation metadata."""

    value: float
    raw_numerator: complex
    raw_denominator: complex
    truncation_bound: float
    grid: FilterSpec


@dataclass(frozen=True)
class EnergySearchReport:
    """Outcome of the guaranteed-interval energy search."""

    interval: tuple[float, float]
    r: float
    slices: int
    chosen_e: float
    q_at_e: float
    threshold: float
    succeeded: bool
    e_mean: float
    sigma: float


def _positive_time_sum(coeffs_pos, times_pos, amps_pos, energy):
    """Real filter sum folded onto t >= 0 using a(-t) = conj(a(t))."""
    terms = coeffs_pos * amps_pos * np.exp(1j * energy * times_pos)
    return float(terms[0].real + 2.0 * terms[1:].real.sum())


def ldos(source: AmplitudeSource, state, energy: float,
         expansion: FilterExpansion) -> EstimateResult:
    """Broadened local density of states D(E) = <filter at E>.

    Only t >= 0 amplitudes are requested; the negative-time half of the sum
    is their conjugate, which halves the device calls and makes the result
    real by construction.  Small negative values are possible under
    truncation or noise and are reported as-is.
    """
    amps = source.amplitude_series(state, expansion.positive_times)
    value = _positive_time_sum(expansion.positive_coeffs,
                               expansion.positive_times, amps, energy)
    return EstimateResult(value=value, raw_numerator=complex(value),
                          raw_denominator=1.0 + 0.0j,
                          truncation_bound=expansion.spec.truncation_bound,
                          grid=expansion.spec)


def _denominator_floor(source, floor):
    if floor is not None:
        return floor
    return 1e-6 if isinstance(source, NoisySource) else 0.0


def _raise_unresolvable(source, state, expansion, energy, den):
    report = None
    if source.supports_moments:
        try:
            report = find_valid_energy(source, state, expansion.spec.delta,
                                       x=expansion.spec.x)
        except Exception:
            report = None
    advice = (f"; try E near {report.chosen_e:.6g}" if report is not None
              and report.succeeded else "")
    raise UnresolvableEnergyError(
        f"filtered norm {den:.3e} at E={energy} is below the floor{advice}",
        report=report)


def filtered_observable(source: AmplitudeSource, state, obs, energy: float,
                        expansion: FilterExpansion,
                        denominator_floor: float | None = None) -> EstimateResult:
    """Symmetrized filtered observable <A P + P A>/(2 <P>).

    Hermiticity of A and of the filter collapses the numerator to
    Re sum_m c_m e^{i E t_m} <A e^{-i H t_m}>; the denominator is the
    filtered norm from :func:`ldos`.
    """
    den = ldos(source, state, energy, expansion).value
    obs_amps = source.observable_series(state, obs, expansion.times)
    num_c = (expansion.coeffs * obs_amps
             * np.exp(1j * energy * expansion.times)).sum()
    floor = _denominator_floor(source, denominator_floor)
    if den <= floor:
        _raise_unresolvable(source, state, expansion, energy, den)
    return EstimateResult(value=float(num_c.real) / den,
                          raw_numerator=complex(num_c),
                          raw_denominator=complex(den),
                          truncation_bound=expansion.spec.truncation_bound,
                          grid=expansion.spec)


def double_filtered_denominator(source: AmplitudeSource, state, energy: float,
                                expansion: FilterExpansion) -> float:
    """<P^2> via the self-convolution of the weights: one amplitude sweep
    over the doubled grid instead of a quadratic two-time scan."""
    conv = np.convolve(expansion.coeffs, expansion.coeffs)
    radius2 = len(expansion.coeffs) - 1
    times2 = (2.0 * np.arange(-radius2, radius2 + 1)
              / expansion.spec.exponent_scale)
    amps = source.amplitude_series(state, times2[radius2:])
    return _positive_time_sum(conv[radius2:], times2[radius2:], amps, energy)


def double_filtered_observable(source: AmplitudeSource, state, obs,
                               energy: float, expansion: FilterExpansion,
                               denominator_floor: float | None = None
                               ) -> EstimateResult:
    """Doubly filtered observable <P A P>/<P^2>.

    The numerator needs the full two-time matrix ((2R+1)^2 device values);
    the denominator reduces to a single sweep through the weight
    convolution.
    """
    if not source.supports_two_time:
        raise UnresolvableEnergyError("source does not provide the two-time "
                                      "amplitudes this estimator needs")
    grid = source.observable_grid(state, obs, expansion.times)
    w = expansion.coeffs * np.exp(1j * energy * expansion.times)
    num_c = np.vdot(w, grid @ w)
    den = double_filtered_denominator(source, state, energy, expansion)
    floor = _denominator_floor(source, denominator_floor)
    if den <= floor:
        _raise_unresolvable(source, state, expansion, energy, den)
    return EstimateResult(value=float(num_c.real) / den,
                          raw_numerator=complex(num_c),
                          raw_denominator=complex(den),
                          truncation_bound=expansion.spec.truncation_bound,
                          grid=expansion.spec)


def interval_half_width_factor(sigma: float, delta: float) -> float:
    """r such that a workable energy lies within r*sigma of the mean."""
    return math.sqrt(3.0 * math.log(2.0 * (1.0 + 2.0 * sigma**2 / delta**2)))


def norm_threshold(sigma: float, delta: float) -> float:
    """Guaranteed filtered-norm level (1/4)(d^2/(d^2+2s^2))^(3/2)."""
    return 0.25 * (delta**2 / (delta**2 + 2.0 * sigma**2)) ** 1.5


def find_valid_energy(source: AmplitudeSource, state, delta: float,
                      x: float = 3.0) -> EnergySearchReport:
    """Scan the guaranteed window around E_psi for a non-negligible norm.

    Slices the window [E_psi - r sigma, E_psi + r sigma] into
    ceil(24 N r sigma / delta^2) pieces and accepts the first midpoint whose
    filtered norm D reaches the guaranteed threshold; one amplitude sweep
    serves every slice.  ``q_at_e`` reports 2 D(E), twice the threshold
    quantity, matching the error-budget convention downstream.
    """
    if not source.supports_moments:
        raise UnresolvableEnergyError("energy search needs exact moments")
    n = source.n_sites
    if delta > n / math.sqrt(2.0):
        raise ValueError(f"search guarantee needs delta <= N/sqrt(2) = "
                         f"{n / math.sqrt(2.0):.6g}")
    e_mean, sigma = source.moments(state)
    r = interval_half_width_factor(sigma, delta)
    threshold = norm_threshold(sigma, delta)
    half = r * sigma
    slices = max(1, math.ceil(24.0 * n * r * sigma / delta**2))
    spec = FilterSpec(delta=delta, n_sites=n, x=x, grid=GRID_FULL)
    expansion = build_expansion(spec)
    amps = source.amplitude_series(state, expansion.positive_times)
    mids = e_mean - half + (np.arange(slices) + 0.5) * (2.0 * half / slices)
    terms = expansion.positive_coeffs * amps
    d_values = np.empty(slices)
    for lo in range(0, slices, 4096):
        chunk = mids[lo:lo + 4096]
        phases = np.exp(1j * np.outer(chunk, expansion.positive_times))
        d_values[lo:lo + 4096] = (phases[:, 0] * terms[0]).real \
            + 2.0 * (phases[:, 1:] * terms[1:]).real.sum(axis=1)
    ok = np.nonzero(d_values >= threshold)[0]
    if ok.size:
        pick = int(ok[0])
        succeeded = True
    else:
        pick = int(np.argmax(d_values))
        succeeded = False
    return EnergySearchReport(interval=(e_mean - half, e_mean + half), r=r,
                              slices=slices, chosen_e=float(mids[pick]),
                              q_at_e=2.0 * float(d_values[pick]),
                              threshold=threshold, succeeded=succeeded,
                              e_mean=e_mean, sigma=sigma)


def shot_budget(expansion: FilterExpansion, epsilon: float, q: float) -> dict:
    """Advisory repetition counts per time point for a target quotient error.

    Splits the budget as num-error = eps*q/3 and den-error = eps*q^2/6, then
    sizes shots so two standard deviations of each weighted sum stay inside
    its share (per-point complex variance 2/L, weights c_m).
    """
    if epsilon <= 0 or q <= 0:
        raise ValueError("epsilon and q must be positive")
    delta_p = epsilon * q / 3.0
    delta_q = epsilon * q * q / 6.0
    csq = float((expansion.coeffs ** 2).sum())
    return {
        "delta_p": delta_p,
        "delta_q": delta_q,
        "shots_numerator": math.ceil(8.0 * csq / delta_p**2),
        "shots_denominator": math.ceil(8.0 * csq / delta_q**2),
        "time_points": len(expansion.coeffs),
    }
