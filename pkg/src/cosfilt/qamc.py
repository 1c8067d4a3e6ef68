"""Metropolis samplers whose weights are filtered norms from the device.

The microcanonical chain walks over Fock basis states with target weight
proportional to D(E) (clamped below the cutoff); the canonical chain walks
jointly over (state, grid energy) with weight exp(-beta E) D(E).  Weights are
never negative, so there is no sign problem; the price is one device sweep
per proposed state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ising as ising_mod
from .device import AmplitudeSource
from .estimators import filtered_observable
from .filters import FilterExpansion


class ColdStartError(RuntimeError):
    """Initial state has zero weight; pick E via the energy search first."""


@dataclass(frozen=True)
class McConfig:
    """Chain parameters.  ``burn_in`` counts sweeps (one proposal per block);
    samples are recorded every step afterwards, with no thinning."""

    samples: int = 100_000
    burn_in: int = 1_000
    seed: int = 0
    proposal: str = "single-block-flip"
    cutoff: float = 0.0
    energy_grid: tuple[float, float, float] | None = None
    error_blocks: int = 32

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.proposal != "single-block-flip":
            raise ValueError(f"unknown proposal kind {self.proposal!r}")
        if self.cutoff < 0:
            raise ValueError("cutoff must be >= 0")
        if self.energy_grid is not None:
            e0, e1, step = self.energy_grid
            if not (step > 0 and e0 < e1):
                raise ValueError("energy grid needs E_min < E_max and step > 0")

    def grid_energies(self) -> np.ndarray:
        if self.energy_grid is None:
            raise ValueError("no energy grid configured")
        e0, e1, step = self.energy_grid
        count = int(math.floor((e1 - e0) / step + 1e-9)) + 1
        return e0 + step * np.arange(count)


@dataclass(frozen=True)
class McTrace:
    """Run summary; ``d_evaluations`` counts device weight sweeps."""

    estimate: float
    standard_error: float
    acceptance_rate: float
    samples_used: int
    d_evaluations: int
    flag: str | None = None


def blocked_standard_error(samples: np.ndarray, n_blocks: int = 32) -> float:
    """Standard error from contiguous block means (guards autocorrelation)."""
    n_blocks = min(n_blocks, samples.size)
    usable = (samples.size // n_blocks) * n_blocks
    means = samples[:usable].reshape(n_blocks, -1).mean(axis=1)
    if n_blocks < 2:
        return 0.0
    return float(means.std(ddof=1) / math.sqrt(n_blocks))


def _eigenvalue_resolver(source, observable, expansion):
    """Per-state observable value for the sampled estimator.

    Returns (fn(state, energy), energy_dependent).  Basis-diagonal block
    observables and plain callables are classical and energy-independent;
    a non-diagonal block observable costs one filtered-observable estimate
    (an extra device sweep) per kept sample.
    """
    if callable(observable):
        return (lambda state, energy: observable(state)), False
    if isinstance(observable, ising_mod.BlockObservable):
        if observable.is_diagonal():
            return (lambda state, energy:
                    observable.fock_eigenvalue(state)), False

        def resolver(state, energy):
            return filtered_observable(source, state, observable, energy,
                                       expansion).value
        return resolver, True
    raise TypeError("observable must be a BlockObservable or callable")


class _WeightEvaluator:
    """Folded filter sum for arbitrary grid energies, one table per chain."""

    def __init__(self, source, expansion: FilterExpansion, energies):
        self.source = source
        self.times = expansion.positive_times
        coeffs = expansion.positive_coeffs
        energies = np.atleast_1d(np.asarray(energies, dtype=float))
        self.weights = coeffs[None, :] * np.exp(
            1j * np.outer(energies, self.times))
        self.calls = 0

    def amps(self, state) -> np.ndarray:
        self.calls += 1
        return self.source.amplitude_series(state, self.times)

    def d_value(self, amps: np.ndarray, e_index: int = 0) -> float:
        w = self.weights[e_index]
        terms = w * amps
        return float(terms[0].real + 2.0 * terms[1:].real.sum())


def _propose_label(rng, labels, block):
    step = int(rng.integers(1, 4))
    return (labels[block] - 1 + step) % 4 + 1


def metropolis_micro(source: AmplitudeSource, model: ising_mod.IsingModel,
                     observable, energy: float, expansion: FilterExpansion,
                     config: McConfig,
                     initial_state: ising_mod.FockState | None = None) -> McTrace:
    """Estimate the filtered-trace average of a basis-diagonal observable.

    Target weight max(D(E), 0) with values below the cutoff set to zero;
    proposals resample one uniformly chosen block label.  Deterministic for
    a fixed config seed (noise draws come from the source's own stream).
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    cutoff = max(config.cutoff, getattr(source, "cutoff", 0.0))
    resolver, _ = _eigenvalue_resolver(source, observable, expansion)
    evaluator = _WeightEvaluator(source, expansion, [energy])

    state = initial_state or ising_mod.greedy_state_for_energy(model, energy)
    d = evaluator.d_value(evaluator.amps(state))
    weight = d if d >= cutoff else 0.0
    if weight <= 0.0:
        raise ColdStartError(
            f"initial state has zero weight at E={energy}; run the energy "
            "search (find_valid_energy) to pick a workable E")

    n_blocks = model.n_blocks
    total = config.burn_in * n_blocks + config.samples
    samples = np.empty(config.samples)
    accepted = 0
    lam = None
    for step in range(total):
        block = int(rng.integers(n_blocks))
        new_label = _propose_label(rng, state.labels, block)
        proposal = state.with_label(block, new_label)
        d_new = evaluator.d_value(evaluator.amps(proposal))
        w_new = d_new if d_new >= cutoff else 0.0
        if w_new > 0.0 and (w_new >= weight or rng.random() < w_new / weight):
            state, weight = proposal, w_new
            lam = None
            if step >= config.burn_in * n_blocks:
                accepted += 1
        if step >= config.burn_in * n_blocks:
            if lam is None:
                lam = resolver(state, energy)
            samples[step - config.burn_in * n_blocks] = lam

    acceptance = accepted / config.samples
    flag = "low-acceptance" if acceptance < 1e-3 else None
    return McTrace(estimate=float(samples.mean()),
                   standard_error=blocked_standard_error(samples,
                                                         config.error_blocks),
                   acceptance_rate=acceptance, samples_used=config.samples,
                   d_evaluations=evaluator.calls, flag=flag)


def metropolis_canonical(source: AmplitudeSource, model: ising_mod.IsingModel,
                         observable, beta: float, expansion: FilterExpansion,
                         config: McConfig,
                         initial_state: ising_mod.FockState | None = None
                         ) -> McTrace:
    """Estimate the thermal average by sampling (state, grid energy) jointly.

    Target exp(-beta E) max(D(E), 0) on the configured energy grid; moves
    alternate a single-block label resample with a +-1 grid step in E.  Grid
    moves reuse the stored amplitude sweep of the current state, so only
    state moves cost device calls.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if config.energy_grid is None:
        raise ValueError("canonical sampling needs config.energy_grid")
    rng = np.random.Generator(np.random.PCG64(config.seed))
    cutoff = max(config.cutoff, getattr(source, "cutoff", 0.0))
    energies = config.grid_energies()
    evaluator = _WeightEvaluator(source, expansion, energies)
    log_boltz = -beta * energies

    state = initial_state or ising_mod.greedy_state_for_energy(model, 0.0)
    resolver, e_dependent = _eigenvalue_resolver(source, observable, expansion)
    e_idx = int(np.argmin(np.abs(energies - ising_mod.state_energy(model, state))))
    amps = evaluator.amps(state)
    d = evaluator.d_value(amps, e_idx)
    weight = d if d >= cutoff else 0.0
    if weight <= 0.0:
        raise ColdStartError("initial (state, E) pair has zero weight")

    n_blocks = model.n_blocks
    total = config.burn_in * n_blocks + config.samples
    samples = np.empty(config.samples)
    accepted = 0
    lam = None
    for step in range(total):
        recording = step >= config.burn_in * n_blocks
        if step % 2 == 0:
            block = int(rng.integers(n_blocks))
            new_label = _propose_label(rng, state.labels, block)
            proposal = state.with_label(block, new_label)
            amps_new = evaluator.amps(proposal)
            d_new = evaluator.d_value(amps_new, e_idx)
            w_new = d_new if d_new >= cutoff else 0.0
            if w_new > 0.0 and (w_new >= weight
                                or rng.random() < w_new / weight):
                state, weight, amps = proposal, w_new, amps_new
                lam = None
                if recording:
                    accepted += 1
        else:
            move = 1 if rng.integers(2) else -1
            new_idx = e_idx + move
            if 0 <= new_idx < energies.size:
                d_new = evaluator.d_value(amps, new_idx)
                w_new = d_new if d_new >= cutoff else 0.0
                ratio = (w_new / weight) * math.exp(log_boltz[new_idx]
                                                    - log_boltz[e_idx]) \
                    if w_new > 0.0 else 0.0
                if w_new > 0.0 and (ratio >= 1.0 or rng.random() < ratio):
                    e_idx, weight = new_idx, w_new
                    if e_dependent:
                        lam = None
                    if recording:
                        accepted += 1
        if recording:
            if lam is None:
                lam = resolver(state, float(energies[e_idx]))
            samples[step - config.burn_in * n_blocks] = lam

    acceptance = accepted / config.samples
    flag = "low-acceptance" if acceptance < 1e-3 else None
    return McTrace(estimate=float(samples.mean()),
                   standard_error=blocked_standard_error(samples,
                                                         config.error_blocks),
                   acceptance_rate=acceptance, samples_used=config.samples,
                   d_evaluations=evaluator.calls, flag=flag)


def integrated_weight(source: AmplitudeSource, state, beta: float,
                      expansion: FilterExpansion,
                      e_bounds: tuple[float, float]) -> float:
    """Closed-form integral of exp(-beta E) D(E) over [E0, E1].

    Each expansion term integrates analytically; the t_m = 0, beta = 0 term
    degenerates to a linear-in-E contribution.  Lets state-only sampling
    absorb the energy integral for basis-diagonal observables.
    """
    e0, e1 = e_bounds
    if not e1 > e0:
        raise ValueError("need E1 > E0")
    amps = source.amplitude_series(state, expansion.positive_times)
    times = expansion.positive_times
    coeffs = expansion.positive_coeffs
    total = 0.0
    for m, (c, t, a) in enumerate(zip(coeffs, times, amps)):
        rate = 1j * t - beta
        if abs(rate) < 1e-14:
            term = c * a * (e1 - e0)
        else:
            term = c * a * (np.exp(rate * e1) - np.exp(rate * e0)) / rate
        total += term.real if m == 0 else 2.0 * term.real
    return float(total)
