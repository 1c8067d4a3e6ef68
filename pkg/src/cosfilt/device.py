"""Uniform amplitude interface over the backends, plus decorators.

Everything downstream (estimators, samplers, the command line) talks to an
:class:`AmplitudeSource`: something that returns a_psi(t) = <psi|e^{-iHt}|psi>
and the observable-weighted variants for a state it understands.  Backends
here are the exact free-fermion chain and dense diagonalization; a noise
wrapper emulates finite measurement statistics on top of either.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dense as dense_mod
from . import ising as ising_mod


class CapabilityError(RuntimeError):
    """Operation not supported by this amplitude source."""


class UnresolvedZeroError(RuntimeError):
    """A zero of |a(t)|^2 whose order could not be classified."""

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


def child_seed(seed: int, index: int) -> int:
    """Deterministic per-worker seed: hash of (master seed, worker index)."""
    ss = np.random.SeedSequence(entropy=[int(seed) & (2**64 - 1), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class AmplitudeSource:
    """Contract: return amplitudes for a state, observable and time(s).

    ``amplitude(state, 0) == 1`` and ``amplitude(state, -t) ==
    conj(amplitude(state, t))`` hold exactly for noiseless backends.
    """

    supports_two_time = False
    supports_moments = False
    n_sites: int

    def amplitude(self, state, t: float) -> complex:
        return complex(self.amplitude_series(state, [t])[0])

    def amplitude_series(self, state, times) -> np.ndarray:
        raise NotImplementedError

    def observable_series(self, state, obs, times) -> np.ndarray:
        """<psi| A e^{-i H t} |psi> on a grid (two-time with t1 = 0)."""
        raise NotImplementedError

    def observable_amplitude(self, state, obs, t1: float, t2: float) -> complex:
        if not self.supports_two_time:
            raise CapabilityError("source does not provide two-time amplitudes")
        return complex(self.observable_grid(state, obs, [t1], [t2])[0, 0])

    def observable_grid(self, state, obs, times, times2=None) -> np.ndarray:
        raise CapabilityError("source does not provide two-time amplitudes")

    def moments(self, state) -> tuple[float, float]:
        raise CapabilityError("source does not expose exact moments")


class FreeFermionSource(AmplitudeSource):
    """Exact amplitudes for the periodic fermion chain on Fock states.

    Block-amplitude tables are cached per time grid, so repeated calls with
    the same grid (the Monte Carlo inner loop) cost one table lookup and a
    product over blocks.
    """

    supports_two_time = True
    supports_moments = True

    def __init__(self, model: ising_mod.IsingModel, cache_grids: int = 8):
        self.model = model
        self._cache: dict[bytes, np.ndarray] = {}
        self._cache_grids = cache_grids

    @property
    def n_sites(self) -> int:
        return self.model.n_sites

    def _table(self, times: np.ndarray) -> np.ndarray:
        key = times.tobytes()
        table = self._cache.get(key)
        if table is None:
            # device convention e^{-iHt}: conjugate of the block e^{+iHt} table
            table = np.conj(ising_mod.block_amplitudes(self.model, times))
            if len(self._cache) >= self._cache_grids:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = table
        return table

    def amplitude_series(self, state, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        table = self._table(times)
        rows = table[np.arange(self.model.n_blocks), state.labels - 1, :]
        return rows.prod(axis=0)

    def _exclusive_products(self, rows: np.ndarray) -> np.ndarray:
        """prod over blocks q != k, computed via prefix/suffix products so a
        vanishing factor never forces a division."""
        n = rows.shape[0]
        pre = np.ones_like(rows)
        np.cumprod(rows[:-1], axis=0, out=pre[1:])
        suf = np.ones_like(rows)
        np.cumprod(rows[:0:-1], axis=0, out=suf[n - 2::-1])
        return pre * suf

    def _block_obs_coeffs(self, state, obs: ising_mod.BlockObservable):
        """Per-block spectral data of <p_k| e^{iH t1} A_k e^{-iH t2} |p_k>."""
        hk = ising_mod.block_hamiltonians(self.model)
        vals, vecs = np.linalg.eigh(hk)
        nb = self.model.n_blocks
        idx = state.labels - 1
        u = vecs[np.arange(nb), idx, :].conj()  # u = U^dag e_p per block
        rot = np.einsum("kai,kab,kbj->kij", vecs.conj(), obs.blocks, vecs)
        return vals, u, rot

    def observable_series(self, state, obs, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        rows = self._table(times)[np.arange(self.model.n_blocks),
                                  state.labels - 1, :]
        excl = self._exclusive_products(rows)
        vals, u, rot = self._block_obs_coeffs(state, obs)
        gamma = np.einsum("ka,kab,kb->kb", u.conj(), rot, u)
        own = np.einsum("kb,kbt->kt", gamma, np.exp(-1j * vals[:, :, None]
                                                    * times[None, None, :]))
        return (own * excl).sum(axis=0)

    def observable_grid(self, state, obs, times, times2=None) -> np.ndarray:
        t1 = np.atleast_1d(np.asarray(times, dtype=float))
        t2 = t1 if times2 is None else np.atleast_1d(np.asarray(times2, float))
        vals, u, rot = self._block_obs_coeffs(state, obs)
        m4 = u.conj()[:, :, None] * rot * u[:, None, :]
        tau = t2[None, :] - t1[:, None]
        tau_flat, inv = np.unique(np.round(tau, 12), return_inverse=True)
        rows_tau = self._table(tau_flat)[np.arange(self.model.n_blocks),
                                         state.labels - 1, :]
        excl_tau = self._exclusive_products(rows_tau)
        out = np.zeros((t1.size, t2.size), dtype=complex)
        for k in range(self.model.n_blocks):
            e1 = np.exp(1j * np.outer(t1, vals[k]))
            e2 = np.exp(-1j * np.outer(vals[k], t2))
            own = (e1 @ m4[k]) @ e2
            out += own * excl_tau[k][inv].reshape(tau.shape)
        return out

    def moments(self, state) -> tuple[float, float]:
        e = ising_mod.state_energy(self.model, state)
        var = ising_mod.state_energy_variance(self.model, state)
        return e, float(np.sqrt(var))


class DenseSource(AmplitudeSource):
    """Amplitudes from a cached dense eigendecomposition."""

    supports_two_time = True
    supports_moments = True

    def __init__(self, model: dense_mod.DenseModel):
        self.model = model

    @property
    def n_sites(self) -> int:
        return self.model.n_sites

    def amplitude_series(self, state, times) -> np.ndarray:
        return dense_mod.amplitude_series(self.model, state, times)

    def observable_series(self, state, obs, times) -> np.ndarray:
        return dense_mod.observable_series(self.model, state, obs, times)

    def observable_grid(self, state, obs, times, times2=None) -> np.ndarray:
        return dense_mod.observable_grid(self.model, state, obs, times, times2)

    def moments(self, state) -> tuple[float, float]:
        return dense_mod.moments(self.model, state)


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement-noise model: additive complex Gaussian of std 1/sqrt(shots)
    per quadrature, plus a cutoff that the samplers apply to derived weights
    (never to raw amplitudes)."""

    cutoff: float = 0.0
    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.cutoff < 1.0):
            raise ValueError("cutoff must lie in [0, 1)")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be >= 1 when present")


class NoisySource(AmplitudeSource):
    """Wraps a source with seeded pseudo-random measurement noise.

    Deterministic for a fixed seed and call sequence.  Owns its generator,
    so one instance must stay on one thread; parallel runs take separate
    instances with :func:`child_seed`-derived seeds.
    """

    def __init__(self, inner: AmplitudeSource, noise: NoiseSpec):
        self.inner = inner
        self.noise = noise
        self.cutoff = noise.cutoff
        self._rng = np.random.Generator(np.random.PCG64(noise.seed))
        self.supports_two_time = inner.supports_two_time
        self.supports_moments = inner.supports_moments

    @property
    def n_sites(self) -> int:
        return self.inner.n_sites

    def _perturb(self, values: np.ndarray) -> np.ndarray:
        if self.noise.shots is None:
            return values
        std = 1.0 / np.sqrt(self.noise.shots)
        shape = values.shape
        noise = self._rng.standard_normal((2,) + shape) * std
        return values + noise[0] + 1j * noise[1]

    def amplitude_series(self, state, times) -> np.ndarray:
        return self._perturb(self.inner.amplitude_series(state, times))

    def observable_series(self, state, obs, times) -> np.ndarray:
        return self._perturb(self.inner.observable_series(state, obs, times))

    def observable_grid(self, state, obs, times, times2=None) -> np.ndarray:
        return self._perturb(self.inner.observable_grid(state, obs, times, times2))

    def moments(self, state) -> tuple[float, float]:
        # moments are backend bookkeeping, not amplitude measurements
        return self.inner.moments(state)


def wrap_noisy(source: AmplitudeSource, noise: NoiseSpec) -> AmplitudeSource:
    """Decorate a source with measurement noise; a no-op spec returns the
    source unchanged."""
    if noise.shots is None and noise.cutoff == 0.0:
        return source
    return NoisySource(source, noise)


def reconstruct_signed(abs2_series, *, dt: float = 1.0, mu: float = 0.0,
                       zero_tol: float = 0.05, fit_points: int = 5) -> np.ndarray:
    """Recover the real series g(t) = a(t) e^{i mu t / 2} from |a(t)|^2.

    Works when symmetry makes g real: then g = +-sqrt(|a|^2) and only the
    sign pattern is missing.  Candidate zeros are local minima of |a|^2 with
    |g| below ``zero_tol``; around each, |a|^2 ~ alpha (t-t0)^(2n) and the
    log-log slope of the window gives 2n.  Odd n flips the sign, even n does
    not.  The overall sign is fixed by g(0) = +1; ``mu`` documents the frame
    and does not enter numerically.
    """
    abs2 = np.asarray(abs2_series, dtype=float)
    if abs2.ndim != 1 or abs2.size < 2 * fit_points + 3:
        raise ValueError("need a 1-d series longer than the fit window")
    n = abs2.size
    interior = np.arange(1, n - 1)
    is_min = (abs2[interior] <= abs2[interior - 1]) & (abs2[interior] <= abs2[interior + 1])
    candidates = interior[is_min & (np.sqrt(abs2[interior]) < zero_tol)]

    # merge plateaus of equal neighbouring minima into one candidate
    zeros = []
    for idx in candidates:
        if zeros and idx - zeros[-1] < 3:
            raise UnresolvedZeroError(
                f"zeros closer than 3 samples near t={idx * dt:.6g}",
                window=((idx - 3) * dt, (idx + 3) * dt))
        zeros.append(int(idx))

    flips = []
    for idx in zeros:
        lo, hi = idx - fit_points, idx + fit_points
        if lo < 1 or hi > n - 2:
            raise UnresolvedZeroError(
                f"zero at t={idx * dt:.6g} too close to the series edge",
                window=(max(lo, 0) * dt, min(hi, n - 1) * dt))
        # vertex of the parabola through the three lowest samples locates t0
        y0, y1, y2 = abs2[idx - 1], abs2[idx], abs2[idx + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
        shift = float(np.clip(shift, -1.5, 1.5))
        t0 = idx + shift
        offs = np.arange(lo, hi + 1, dtype=float)
        dist = np.abs(offs - t0)
        keep = (dist > 0.5) & (abs2[lo:hi + 1] > 0.0)
        if keep.sum() < 4:
            raise UnresolvedZeroError(
                f"not enough usable samples around t={idx * dt:.6g}",
                window=(lo * dt, hi * dt))
        lx = np.log(dist[keep])
        ly = np.log(abs2[lo:hi + 1][keep])
        slope = np.polyfit(lx, ly, 1)[0]
        nearest_even_order = 2.0 * round(slope / 2.0)
        if nearest_even_order < 2.0 or abs(slope - nearest_even_order) > 0.25:
            raise UnresolvedZeroError(
                f"zero near t={t0 * dt:.6g} has ambiguous order "
                f"(fitted exponent {slope:.3f})",
                window=(lo * dt, hi * dt))
        if int(nearest_even_order) // 2 % 2 == 1:
            flips.append(t0)

    signs = np.ones(n)
    for t0 in flips:
        signs[np.arange(n) > t0] *= -1.0
    return signs * np.sqrt(abs2)
