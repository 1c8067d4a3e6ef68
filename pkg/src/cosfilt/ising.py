"""Closed-form backend for the periodic transverse-field chain in its
fermionic momentum-block form.

The chain of N fermionic modes splits into N/2 independent 4-level blocks:
block k (k = 1..N/2-1) pairs the momenta +-k, block 0 pairs the modes 0 and
N/2.  Every quantity used here (energies, return amplitudes, traces, thermal
averages) factorizes over blocks, which keeps exact results affordable up to
N ~ 100.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .filters import GRID_FULL, FilterExpansion

# block-basis occupation counts: |1> empty, |2> doubly occupied, |3>,|4> single
_BLOCK_OCCUPATIONS = np.array([0.0, 2.0, 1.0, 1.0])

_LOG_FLOOR = -300.0 * math.log(10.0)


class UnresolvableEnergyError(RuntimeError):
    """Raised when a filtered denominator is too small to divide by."""


@dataclass(frozen=True)
class IsingModel:
    """Couplings of the periodic chain; block data is derived eagerly.

    Immutable after construction; every operation on it is pure.
    """

    g: float
    h: float
    n_sites: int

    def __post_init__(self):
        n = self.n_sites
        if n < 4 or n % 2 != 0:
            raise ValueError("n_sites must be an even integer >= 4")

    @property
    def n_blocks(self) -> int:
        return self.n_sites // 2

    @property
    def x_inner(self) -> np.ndarray:
        """x_k = h + g cos(2 pi k / N) for the paired blocks k = 1..N/2-1."""
        k = np.arange(1, self.n_blocks)
        return self.h + self.g * np.cos(2.0 * np.pi * k / self.n_sites)

    @property
    def y_inner(self) -> np.ndarray:
        k = np.arange(1, self.n_blocks)
        return self.g * np.sin(2.0 * np.pi * k / self.n_sites)

    @property
    def z_inner(self) -> np.ndarray:
        return np.hypot(self.x_inner, self.y_inner)

    @property
    def x_zero(self) -> float:
        return self.h + self.g

    @property
    def x_half(self) -> float:
        return self.h - self.g

    @property
    def x0_plus(self) -> float:
        return 0.5 * (self.x_zero + self.x_half)

    @property
    def x0_minus(self) -> float:
        return 0.5 * (self.x_zero - self.x_half)


@dataclass(frozen=True)
class BlockSpectrum:
    """Per-block dispersion data as produced by :func:`block_spectrum`."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    x0_plus: float
    x0_minus: float


def block_spectrum(model: IsingModel) -> BlockSpectrum:
    """Dispersion (x_k, y_k, z_k) of the paired blocks plus the 0-block pair.

    Eigenvalues of block k are {+-z_k, 0, 0}; of block 0 they are
    {+-x0_plus, +-x0_minus}.
    """
    return BlockSpectrum(x=model.x_inner, y=model.y_inner, z=model.z_inner,
                         x0_plus=model.x0_plus, x0_minus=model.x0_minus)


@dataclass(frozen=True)
class FockState:
    """Product state over momentum blocks: one label in 1..4 per block."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-d array")
        if labels.min() < 1 or labels.max() > 4:
            raise ValueError("labels must lie in 1..4")

    @property
    def n_blocks(self) -> int:
        return self.labels.size

    def with_label(self, block: int, label: int) -> "FockState":
        labels = self.labels.copy()
        labels[block] = label
        return FockState(labels)

    def occupied_modes(self, n_sites: int) -> list[int]:
        """Momentum indices k in (-N/2, N/2] whose modes are occupied."""
        if n_sites != 2 * self.n_blocks:
            raise ValueError("n_sites inconsistent with label count")
        modes = []
        half = self.n_blocks
        for k, p in enumerate(self.labels):
            if k == 0:
                pair = (half, 0)  # block 0 couples modes N/2 and 0
            else:
                pair = (k, -k)
            if p == 2:
                modes.extend(pair)
            elif p == 3:
                modes.append(pair[0])
            elif p == 4:
                modes.append(pair[1])
        return sorted(modes)


def random_fock_state(model: IsingModel, rng: np.random.Generator) -> FockState:
    return FockState(rng.integers(1, 5, size=model.n_blocks))


def block_energies(model: IsingModel) -> np.ndarray:
    """Diagonal block energies E_{k,p}, shape (n_blocks, 4)."""
    e = np.zeros((model.n_blocks, 4))
    e[0] = (-model.x0_plus, model.x0_plus, -model.x0_minus, model.x0_minus)
    x = model.x_inner
    e[1:, 0] = -x
    e[1:, 1] = x
    return e


def block_hamiltonians(model: IsingModel) -> np.ndarray:
    """The 4x4 block Hamiltonians, shape (n_blocks, 4, 4), Hermitian."""
    n = model.n_blocks
    h = np.zeros((n, 4, 4), dtype=complex)
    h[0] = np.diag([-model.x0_plus, model.x0_plus, -model.x0_minus, model.x0_minus])
    x, y = model.x_inner, model.y_inner
    h[1:, 0, 0] = -x
    h[1:, 1, 1] = x
    h[1:, 0, 1] = -1j * y
    h[1:, 1, 0] = 1j * y
    return h


def state_energy(model: IsingModel, state: FockState) -> float:
    """Mean energy of a Fock state: sum of its per-block diagonal energies."""
    if state.n_blocks != model.n_blocks:
        raise ValueError("state size does not match model")
    e = block_energies(model)
    return float(e[np.arange(model.n_blocks), state.labels - 1].sum())


def state_energy_variance(model: IsingModel, state: FockState) -> float:
    """Energy variance; only paired blocks in |1> or |2> contribute y_k^2."""
    if state.n_blocks != model.n_blocks:
        raise ValueError("state size does not match model")
    active = state.labels[1:] <= 2
    return float((model.y_inner[active] ** 2).sum())


def fock_min_energy(model: IsingModel) -> float:
    """Lowest mean energy reachable by any Fock state."""
    return float(block_energies(model).min(axis=1).sum())


def fock_max_energy(model: IsingModel) -> float:
    return float(block_energies(model).max(axis=1).sum())


def greedy_state_for_energy(model: IsingModel, target: float) -> FockState:
    """Fock state whose mean energy tracks the target; used to seed chains.

    Visits blocks in order, each time choosing the label that keeps the
    running energy on the interpolated path toward the target.
    """
    energies = block_energies(model)
    n = model.n_blocks
    labels = np.empty(n, dtype=np.int64)
    acc = 0.0
    for k in range(n):
        goal = target * (k + 1) / n
        pick = int(np.argmin(np.abs(acc + energies[k] - goal)))
        labels[k] = pick + 1
        acc += energies[k, pick]
    return FockState(labels)


def block_amplitudes(model: IsingModel, times: np.ndarray) -> np.ndarray:
    """Matrix elements <p|exp(+i H_k t)|p>, shape (n_blocks, 4, n_times).

    Paired blocks: labels 1/2 give cos(z t) -+ i sin(z t) x/z, labels 3/4
    give 1; a z = 0 block is the zero Hamiltonian, so its amplitude is 1.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = model.n_blocks
    out = np.ones((n, 4, times.size), dtype=complex)
    e0 = np.array([-model.x0_plus, model.x0_plus, -model.x0_minus, model.x0_minus])
    out[0] = np.exp(1j * e0[:, None] * times[None, :])
    x, z = model.x_inner, model.z_inner
    zt = z[:, None] * times[None, :]
    ratio = np.divide(x, z, out=np.zeros_like(x), where=z != 0)
    a1 = np.cos(zt) - 1j * np.sin(zt) * ratio[:, None]
    out[1:, 0, :] = a1
    out[1:, 1, :] = np.conj(a1)
    return out


def loschmidt_series(model: IsingModel, state: FockState, times) -> np.ndarray:
    """Return amplitudes a_p(t) = <p|exp(+i H t)|p> on a time grid."""
    table = block_amplitudes(model, times)
    rows = table[np.arange(model.n_blocks), state.labels - 1, :]
    return rows.prod(axis=0)


def loschmidt_amplitude(model: IsingModel, state: FockState, t: float) -> complex:
    return complex(loschmidt_series(model, state, [t])[0])


@dataclass(frozen=True)
class BlockObservable:
    """Observable that splits over momentum blocks: one 4x4 per block.

    ``norm_bound`` records the subadditive operator-norm bound
    sum_k ||A_k||_2 used as metadata by the estimators.
    """

    blocks: np.ndarray
    label: str = ""
    norm_bound: float = field(default=None)

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=complex)
        object.__setattr__(self, "blocks", blocks)
        if blocks.ndim != 3 or blocks.shape[1:] != (4, 4):
            raise ValueError("blocks must have shape (n_blocks, 4, 4)")
        herm = np.abs(blocks - blocks.conj().transpose(0, 2, 1)).max()
        if herm > 1e-12:
            raise ValueError(f"blocks are not Hermitian (residue {herm:.2e})")
        if self.norm_bound is None:
            bound = float(np.abs(np.linalg.eigvalsh(blocks)).max(axis=1).sum())
            object.__setattr__(self, "norm_bound", bound)

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        off = self.blocks * (1.0 - np.eye(4))
        return float(np.abs(off).max()) <= tol

    def fock_eigenvalue(self, state: FockState) -> float:
        """Eigenvalue on a Fock state; requires per-block diagonal blocks."""
        if not self.is_diagonal():
            raise ValueError("observable is not diagonal in the Fock basis")
        idx = state.labels - 1
        return float(self.blocks[np.arange(self.n_blocks), idx, idx].real.sum())


def magnetization_blocks(model: IsingModel) -> BlockObservable:
    """Mean occupation (1/N) sum_k b_k^dag b_k as per-block diagonals."""
    diag = np.tile(np.diag(_BLOCK_OCCUPATIONS), (model.n_blocks, 1, 1))
    return BlockObservable(blocks=diag / model.n_sites, label="magnetization",
                           norm_bound=1.0)


def hamiltonian_blocks(model: IsingModel, scale: float = 1.0) -> BlockObservable:
    """The Hamiltonian itself (divided by ``scale``) as a block observable."""
    return BlockObservable(blocks=block_hamiltonians(model) / scale,
                           label=f"H/{scale:g}" if scale != 1.0 else "H")


def _block_eigensystems(model: IsingModel, observable: BlockObservable | None):
    """Eigenvalues of each block and, if given, diag(U^dag A_k U)."""
    hk = block_hamiltonians(model)
    vals, vecs = np.linalg.eigh(hk)
    if observable is None:
        return vals, None
    rotated = np.einsum("kai,kab,kbj->kij", vecs.conj(), observable.blocks, vecs)
    return vals, np.einsum("kii->ki", rotated)


def block_traces(model: IsingModel, m_indices, exponent_scale: float,
                 observable: BlockObservable | None = None):
    """Normalized block traces r_{m,k} (and s_{m,k} for an observable).

    r_{m,k} = (1/4) tr exp(-i 2m H_k / scale); the closed forms are
    cos^2(m z_k/scale) for paired blocks and the two-cosine average for
    block 0.  s_{m,k} = (1/4) tr(A_k exp(-i 2m H_k / scale)).
    """
    if exponent_scale <= 0:
        raise ValueError("exponent_scale must be > 0")
    m = np.atleast_1d(np.asarray(m_indices, dtype=float))
    tau = 2.0 * m / exponent_scale  # the stroboscopic times t_m
    r = np.empty((m.size, model.n_blocks))
    r[:, 0] = 0.5 * (np.cos(tau * model.x0_plus) + np.cos(tau * model.x0_minus))
    r[:, 1:] = np.cos(0.5 * tau[:, None] * model.z_inner[None, :]) ** 2
    if observable is None:
        return r, None
    if observable.n_blocks != model.n_blocks:
        raise ValueError("observable block count does not match model")
    vals, diag = _block_eigensystems(model, observable)
    phases = np.exp(-1j * tau[:, None, None] * vals[None, :, :])
    s = 0.25 * np.einsum("mka,ka->mk", phases, diag)
    return r, s


def _signed_log(values: np.ndarray):
    mag = np.abs(values)
    with np.errstate(divide="ignore"):
        log = np.log(mag)
    sign = np.where(values < 0, -1.0, 1.0)
    return log, sign


def exact_microcanonical(model: IsingModel, observable: BlockObservable,
                         energy: float, expansion: FilterExpansion,
                         log_floor: float = _LOG_FLOOR) -> float:
    """Trace-formula filtered average tr[A P]/tr[P] via block products.

    Products of up to N/2 cosine-squared factors underflow quickly, so block
    products are accumulated as log-magnitude plus sign and the two series
    are summed with a shared exponent shift.  Near the spectrum edges the
    denominator legitimately collapses; that surfaces as
    :class:`UnresolvableEnergyError` rather than a silent garbage quotient.
    """
    spec = expansion.spec
    if spec.grid != GRID_FULL:
        raise ValueError("trace formula requires a full-grid expansion")
    scale = spec.exponent_scale
    radius = expansion.radius
    m = np.arange(-radius, radius + 1)
    r, s = block_traces(model, m, scale, observable)

    log_r, sign_r = _signed_log(r)
    log_d = log_r.sum(axis=1)
    sign_d = sign_r.prod(axis=1)

    # numerator factor F_m = sum_k s/r, or exclude-one products where r ~ 0
    tiny = np.abs(r).min(axis=1) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(tiny[:, None], 0.0, s / np.where(r == 0.0, 1.0, r)).sum(axis=1)
    log_n = log_d.copy()
    mant_n = sign_d * f
    if tiny.any():
        for i in np.nonzero(tiny)[0]:
            lr, sr = log_r[i], sign_r[i]
            pre_l = np.concatenate(([0.0], np.cumsum(lr)[:-1]))
            suf_l = np.concatenate((np.cumsum(lr[::-1])[:-1][::-1], [0.0]))
            pre_s = np.concatenate(([1.0], np.cumprod(sr)[:-1]))
            suf_s = np.concatenate((np.cumprod(sr[::-1])[:-1][::-1], [1.0]))
            excl_l = pre_l + suf_l
            shift = excl_l.max()
            mant_n[i] = (s[i] * pre_s * suf_s * np.exp(excl_l - shift)).sum()
            log_n[i] = shift

    log_c = np.log(expansion.coeffs)
    phases = np.exp(1j * energy * expansion.times)

    def reduced_sum(log_mag, mantissa):
        total = log_c + log_mag
        shift = total.max()
        if not np.isfinite(shift):
            raise UnresolvableEnergyError(
                f"all filtered trace terms vanished at E={energy}")
        return (mantissa * phases * np.exp(total - shift)).sum(), shift

    den, den_shift = reduced_sum(log_d, sign_d.astype(complex))
    num, num_shift = reduced_sum(log_n, mant_n.astype(complex))

    den_mag = abs(den)
    if den_mag == 0.0 or math.log(den_mag) + den_shift < log_floor:
        raise UnresolvableEnergyError(
            f"filtered trace denominator below floor at E={energy}")
    if abs(den.imag) > 1e-8 * den_mag or num_shift - den_shift > 700.0:
        raise UnresolvableEnergyError(
            f"filtered trace lost reality at E={energy} "
            f"(denominator residue {abs(den.imag)/den_mag:.2e})")
    ratio = (num / den.real) * math.exp(num_shift - den_shift)
    if abs(ratio.imag) > 1e-8 * (1.0 + abs(ratio.real)):
        raise UnresolvableEnergyError(
            f"filtered trace lost reality at E={energy} "
            f"(ratio residue {abs(ratio.imag):.2e})")
    return float(ratio.real)


def exact_canonical(model: IsingModel, observable: BlockObservable,
                    beta: float) -> float:
    """Thermal average tr(A e^{-beta H})/tr(e^{-beta H}) via block sums.

    The ratio per block is a softmax average over the four block levels, so
    no large products or overflowing cosh factors ever appear.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if observable.n_blocks != model.n_blocks:
        raise ValueError("observable block count does not match model")
    vals, diag = _block_eigensystems(model, observable)
    w = np.exp(-beta * (vals - vals.min(axis=1, keepdims=True)))
    w /= w.sum(axis=1, keepdims=True)
    return float((w * diag.real).sum())
