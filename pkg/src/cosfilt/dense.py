"""Dense exact-diagonalization reference backend for small chains.

Provides spin-chain and fermionic-chain builders, exact time-series
amplitudes through the eigenbasis, the exact cosine-filtered expectation
values the time-series estimators are checked against, and a
reflection-parity sector solver that stretches the tilted-field chain to
N = 14 on a small machine.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
import scipy.sparse as sp

from .filters import COS_GAUSS_CROSSOVER, nearest_even

MAX_DENSE_SITES = 14

_SX = np.array([[0.0, 1.0], [1.0, 0.0]])
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
_ID = np.eye(2)
# annihilation of an occupied site: |1> -> |0>
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])


class ResourceLimitError(ValueError):
    """Requested dense problem exceeds the supported size."""


class EmptyWindowError(ValueError):
    """No eigenvalue inside the requested energy window."""


class UnresolvableEnergyError(RuntimeError):
    """Filtered norm too small to define an expectation value."""


def _check_sites(n_sites: int):
    if n_sites < 2:
        raise ValueError("n_sites must be >= 2")
    if n_sites > MAX_DENSE_SITES:
        raise ResourceLimitError(
            f"dense backend supports n_sites <= {MAX_DENSE_SITES}, got {n_sites}")


def _site_operator_sparse(op: np.ndarray, site: int, n_sites: int) -> sp.csr_matrix:
    mat = sp.identity(2 ** site, format="csr", dtype=op.dtype)
    mat = sp.kron(mat, sp.csr_matrix(op), format="csr")
    right = sp.identity(2 ** (n_sites - site - 1), format="csr", dtype=op.dtype)
    return sp.kron(mat, right, format="csr")


def site_bits(n_sites: int, site: int) -> np.ndarray:
    """Bit of ``site`` for every basis index (site 0 is the leading bit)."""
    idx = np.arange(2 ** n_sites)
    return (idx >> (n_sites - site - 1)) & 1


def z_diagonal(n_sites: int, site: int) -> np.ndarray:
    """Diagonal of sigma_z at a site: +1 on |0>, -1 on |1>."""
    return 1.0 - 2.0 * site_bits(n_sites, site)


def x_site_sparse(n_sites: int, site: int) -> sp.csr_matrix:
    return _site_operator_sparse(_SX, site, n_sites)


def zz_bond_diagonal(n_sites: int, site: int) -> np.ndarray:
    """Diagonal of sigma_z(site) sigma_z(site+1)."""
    return z_diagonal(n_sites, site) * z_diagonal(n_sites, site + 1)


class DenseModel:
    """Hermitian matrix plus a cached eigendecomposition.

    Immutable in use: the matrix is never mutated and the eigensystem is
    computed once on first access, after which concurrent reads are safe.
    """

    def __init__(self, matrix: np.ndarray, n_sites: int, kind: str = "custom"):
        _check_sites(n_sites)
        matrix = np.asarray(matrix)
        dim = 2 ** n_sites
        if matrix.shape != (dim, dim):
            raise ValueError(f"matrix must be {dim}x{dim} for n_sites={n_sites}")
        scale = max(1.0, float(np.abs(matrix).max()))
        residue = float(np.abs(matrix - matrix.conj().T).max())
        if residue > 1e-12 * scale:
            raise ValueError(f"matrix is not Hermitian (residue {residue:.2e})")
        self.matrix = matrix
        self.n_sites = n_sites
        self.kind = kind
        self._eig: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigensystem(self):
        if self._eig is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            self._eig = (vals, vecs)
        return self._eig

    def spectrum(self) -> np.ndarray:
        return self.eigensystem()[0]


class DenseState:
    """Unit-norm complex vector on the full 2^N space."""

    def __init__(self, vector: np.ndarray):
        vector = np.asarray(vector, dtype=complex).ravel()
        n = int(round(math.log2(vector.size)))
        if 2 ** n != vector.size:
            raise ValueError("vector length must be a power of two")
        norm = float(np.linalg.norm(vector))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm deviates from 1 by {abs(norm-1.0):.2e}")
        self.vector = vector
        self.n_sites = n

    @classmethod
    def from_site_states(cls, site_states) -> "DenseState":
        vec = np.ones(1, dtype=complex)
        for s in site_states:
            s = np.asarray(s, dtype=complex)
            vec = np.kron(vec, s / np.linalg.norm(s))
        return cls(vec)


def product_state_theta(theta: float, n_sites: int) -> DenseState:
    """(cos(theta)|0> + sin(theta)|1>)^N, the real translation-invariant family."""
    site = np.array([math.cos(theta), math.sin(theta)])
    return DenseState.from_site_states([site] * n_sites)


def product_state(thetas, phis) -> DenseState:
    """General product state with per-site Bloch angles."""
    sites = [np.array([math.cos(t), np.exp(1j * p) * math.sin(t)])
             for t, p in zip(thetas, phis)]
    return DenseState.from_site_states(sites)


def random_product_state(n_sites: int, rng: np.random.Generator) -> DenseState:
    thetas = rng.uniform(0.0, np.pi, n_sites)
    phis = rng.uniform(0.0, 2.0 * np.pi, n_sites)
    return product_state(thetas, phis)


# ---------------------------------------------------------------------------
# model builders


def build_transverse_ising(g: float, h: float, n_sites: int,
                           periodic: bool = True) -> DenseModel:
    """Spin chain (g/2) sum sx sx + (h/2) sum sz."""
    _check_sites(n_sites)
    dim = 2 ** n_sites
    mat = sp.csr_matrix((dim, dim))
    n_bonds = n_sites if periodic else n_sites - 1
    for i in range(n_bonds):
        j = (i + 1) % n_sites
        mat = mat + 0.5 * g * (x_site_sparse(n_sites, i) @ x_site_sparse(n_sites, j))
    diag = np.zeros(dim)
    for i in range(n_sites):
        diag += 0.5 * h * z_diagonal(n_sites, i)
    mat = mat + sp.diags(diag)
    return DenseModel(mat.toarray(), n_sites, kind="transverse-ising")


def tilted_ising_sparse(j: float, h: float, g: float, n_sites: int) -> sp.csr_matrix:
    """Open chain J [sum zz + h sum z + g sum x] as a sparse real matrix."""
    dim = 2 ** n_sites
    diag = np.zeros(dim)
    for i in range(n_sites - 1):
        diag += zz_bond_diagonal(n_sites, i)
    for i in range(n_sites):
        diag += h * z_diagonal(n_sites, i)
    mat = sp.diags(diag).tocsr()
    for i in range(n_sites):
        mat = mat + g * x_site_sparse(n_sites, i)
    return (j * mat).tocsr()


def build_tilted_ising(j: float, h: float, g: float, n_sites: int) -> DenseModel:
    _check_sites(n_sites)
    return DenseModel(tilted_ising_sparse(j, h, g, n_sites).toarray(),
                      n_sites, kind="tilted-ising")


def tilted_exponent_scale(j: float, h: float, g: float, n_sites: int) -> float:
    """Filter scale N(1+|h|+|g|)|J|: keeps every cosine argument inside the
    window where the filter is Gaussian (checked again at run time)."""
    return abs(j) * n_sites * (1.0 + abs(h) + abs(g))


def fermion_lowering_sparse(n_sites: int) -> list[sp.csr_matrix]:
    """True fermionic annihilators a_i on the occupation basis."""
    ops = []
    for i in range(n_sites):
        mat = sp.identity(1, format="csr")
        for q in range(n_sites):
            if q < i:
                factor = _SZ
            elif q == i:
                factor = _LOWER
            else:
                factor = _ID
            mat = sp.kron(mat, sp.csr_matrix(factor), format="csr")
        ops.append(mat)
    return ops


def build_fermion_chain(g: float, h: float, n_sites: int) -> DenseModel:
    """Periodic fermion chain (g/2) sum (a+a^dag)(a'-a'^dag) + h sum (n-1/2)."""
    _check_sites(n_sites)
    if n_sites % 2 != 0:
        raise ValueError("fermion chain uses an even number of modes")
    a = fermion_lowering_sparse(n_sites)
    dim = 2 ** n_sites
    mat = sp.csr_matrix((dim, dim))
    for i in range(n_sites):
        jn = (i + 1) % n_sites
        mat = mat + 0.5 * g * ((a[i] + a[i].T) @ (a[jn] - a[jn].T))
    occ = np.zeros(dim)
    for i in range(n_sites):
        occ += site_bits(n_sites, i)
    mat = mat + sp.diags(h * (occ - 0.5 * n_sites))
    return DenseModel(mat.toarray(), n_sites, kind="fermion-chain")


def fock_state_vector(n_sites: int, modes) -> DenseState:
    """Momentum Fock state: apply b_k^dag for each k in ``modes`` to the vacuum.

    Momentum indices live in (-N/2, N/2]; the overall phase depends on the
    application order, which no diagonal quantity can see.
    """
    a = fermion_lowering_sparse(n_sites)
    adag = [op.T.conj().tocsr() for op in a]
    vec = np.zeros(2 ** n_sites, dtype=complex)
    vec[0] = 1.0  # all sites empty
    sites = np.arange(n_sites)
    for k in modes:
        if not (-n_sites // 2 < k <= n_sites // 2):
            raise ValueError(f"momentum index {k} out of range")
        phases = np.exp(-2j * np.pi * k * sites / n_sites) / math.sqrt(n_sites)
        new = np.zeros_like(vec)
        for n, ph in enumerate(phases):
            new += ph * (adag[n] @ vec)
        vec = new
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ValueError("mode list is not a valid Fock state (repeated mode?)")
    return DenseState(vec / norm)


def magnetization_diagonal(n_sites: int) -> np.ndarray:
    """Diagonal of the mean occupation (1/2N) sum (sz+1) ... fermionically
    (1/N) sum n_i: equals occupied-bit count over N."""
    idx = np.arange(2 ** n_sites)
    counts = np.zeros(2 ** n_sites)
    for i in range(n_sites):
        counts += (idx >> i) & 1
    return counts / n_sites


def build_xy_chain(jx, jy, fields, n_sites: int, periodic: bool = False) -> DenseModel:
    """Bipartite-friendly chain sum [jx sx sx + jy sy sy] + sum h_i sz."""
    _check_sites(n_sites)
    jx = np.broadcast_to(np.asarray(jx, dtype=float), (n_sites,))
    jy = np.broadcast_to(np.asarray(jy, dtype=float), (n_sites,))
    fields = np.broadcast_to(np.asarray(fields, dtype=float), (n_sites,))
    dim = 2 ** n_sites
    mat = sp.csr_matrix((dim, dim), dtype=complex)
    n_bonds = n_sites if periodic else n_sites - 1
    if periodic and n_sites % 2 != 0:
        raise ValueError("periodic bipartite chain needs even n_sites")
    for i in range(n_bonds):
        jn = (i + 1) % n_sites
        if jx[i] != 0.0:
            mat = mat + jx[i] * (x_site_sparse(n_sites, i) @ x_site_sparse(n_sites, jn))
        if jy[i] != 0.0:
            sy_i = _site_operator_sparse(_SY, i, n_sites)
            sy_j = _site_operator_sparse(_SY, jn, n_sites)
            mat = mat + jy[i] * (sy_i @ sy_j)
    diag = np.zeros(dim)
    for i in range(n_sites):
        diag += fields[i] * z_diagonal(n_sites, i)
    mat = mat + sp.diags(diag)
    dense = mat.toarray()
    if np.abs(dense.imag).max() < 1e-14:
        dense = dense.real
    return DenseModel(dense, n_sites, kind="xy-chain")


def xy_parity_eigenstate(n_sites: int, signs=None) -> DenseState:
    """Product eigenstate of (tensor over even sites sx)(odd sites sy).

    Even sites carry sx eigenstates, odd sites sy eigenstates; ``signs``
    selects the +-1 eigenvalue per site (defaults to all +1).
    """
    if signs is None:
        signs = [1] * n_sites
    sites = []
    for i, s in enumerate(signs):
        if i % 2 == 0:
            sites.append(np.array([1.0, float(s)]) / math.sqrt(2.0))
        else:
            sites.append(np.array([1.0, 1j * float(s)]) / math.sqrt(2.0))
    return DenseState.from_site_states(sites)


# ---------------------------------------------------------------------------
# amplitudes and exact filters


def _eig_overlap(model: DenseModel, state: DenseState) -> np.ndarray:
    vals, vecs = model.eigensystem()
    return vecs.conj().T @ state.vector


def _apply_observable(obs, vec: np.ndarray) -> np.ndarray:
    if callable(obs):
        return obs(vec)
    obs = np.asarray(obs)
    if obs.ndim == 1:
        return obs * vec
    return obs @ vec


def amplitude(model: DenseModel, state: DenseState, t: float) -> complex:
    """<psi| exp(-i H t) |psi>."""
    return complex(amplitude_series(model, state, [t])[0])


def amplitude_series(model: DenseModel, state: DenseState, times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    vals, _ = model.eigensystem()
    v = _eig_overlap(model, state)
    w = np.abs(v) ** 2
    return np.exp(-1j * np.outer(times, vals)) @ w


def observable_amplitude(model: DenseModel, state: DenseState, obs,
                         t1: float, t2: float) -> complex:
    """<psi| exp(i H t1) A exp(-i H t2) |psi>."""
    grid = observable_grid(model, state, obs, np.array([t1]), np.array([t2]))
    return complex(grid[0, 0])


def observable_series(model: DenseModel, state: DenseState, obs, times) -> np.ndarray:
    """One-sided series <psi| A exp(-i H t) |psi> on a time grid."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    vals, vecs = model.eigensystem()
    v = _eig_overlap(model, state)
    va = vecs.conj().T @ _apply_observable(obs, state.vector)
    gamma = np.conj(va) * v
    return np.exp(-1j * np.outer(times, vals)) @ gamma


def observable_grid(model: DenseModel, state: DenseState, obs,
                    times, times2=None) -> np.ndarray:
    """Two-time matrix a[i, j] = <psi| exp(i H t_i) A exp(-i H t_j) |psi>."""
    t1 = np.atleast_1d(np.asarray(times, dtype=float))
    t2 = t1 if times2 is None else np.atleast_1d(np.asarray(times2, dtype=float))
    vals, vecs = model.eigensystem()
    v = _eig_overlap(model, state)
    w1 = vecs @ (np.exp(-1j * np.outer(vals, t1)) * v[:, None])
    if times2 is None:
        w2 = w1
    else:
        w2 = vecs @ (np.exp(-1j * np.outer(vals, t2)) * v[:, None])
    if callable(obs):
        aw = np.stack([obs(w2[:, j]) for j in range(w2.shape[1])], axis=1)
    else:
        obs_arr = np.asarray(obs)
        aw = obs_arr[:, None] * w2 if obs_arr.ndim == 1 else obs_arr @ w2
    return w1.conj().T @ aw


def moments(model: DenseModel, state: DenseState) -> tuple[float, float]:
    """Exact (mean energy, energy spread) without diagonalizing."""
    hpsi = model.matrix @ state.vector
    e = float(np.vdot(state.vector, hpsi).real)
    e2 = float(np.vdot(hpsi, hpsi).real)
    return e, math.sqrt(max(e2 - e * e, 0.0))


def _filter_factors(vals: np.ndarray, energy: float, delta: float,
                    exponent_scale: float, warn: bool = True) -> np.ndarray:
    m_order = nearest_even((exponent_scale / delta) ** 2)
    arg = (vals - energy) / exponent_scale
    if warn and np.abs(arg).max() > COS_GAUSS_CROSSOVER:
        warnings.warn(
            "cosine filter argument leaves the Gaussian window; "
            "increase exponent_scale", RuntimeWarning, stacklevel=3)
    if m_order == 0:
        return np.ones_like(arg)
    c = np.abs(np.cos(arg))
    with np.errstate(divide="ignore"):
        return np.exp(m_order * np.log(c, out=np.full_like(c, -np.inf),
                                       where=c > 0.0))


def ldos_exact(model: DenseModel, state: DenseState, energy: float,
               delta: float, exponent_scale: float | None = None) -> float:
    """Exact filtered norm <psi| cos^M((H-E)/scale) |psi>."""
    scale = model.n_sites if exponent_scale is None else exponent_scale
    vals, _ = model.eigensystem()
    v = _eig_overlap(model, state)
    f = _filter_factors(vals, energy, delta, scale, warn=False)
    return float((f * np.abs(v) ** 2).sum())


def single_filtered_exact(model: DenseModel, state: DenseState, obs,
                          energy: float, delta: float,
                          exponent_scale: float | None = None,
                          floor: float = 1e-300) -> float:
    """Exact symmetrized single-filter average Re<psi|A P|psi>/<psi|P|psi>."""
    scale = model.n_sites if exponent_scale is None else exponent_scale
    vals, vecs = model.eigensystem()
    v = _eig_overlap(model, state)
    f = _filter_factors(vals, energy, delta, scale, warn=False)
    den = float((f * np.abs(v) ** 2).sum())
    if den < floor:
        raise UnresolvableEnergyError(f"filtered norm {den:.3e} below floor")
    filtered = vecs @ (f * v)
    num = float(np.vdot(state.vector, _apply_observable(obs, filtered)).real)
    return num / den


def filtered_expectation_exact(model: DenseModel, state: DenseState, obs,
                               energy: float, delta: float,
                               exponent_scale: float | None = None,
                               floor: float = 1e-300) -> float:
    """Exact double-filter average <P psi|A|P psi>/<P psi|P psi>.

    Applies the cosine filter in the eigenbasis with no time-series
    truncation; this is the drift-free oracle for the expansion estimators.
    """
    scale = model.n_sites if exponent_scale is None else exponent_scale
    vals, vecs = model.eigensystem()
    v = _eig_overlap(model, state)
    f = _filter_factors(vals, energy, delta, scale)
    phi = f * v
    den = float((np.abs(phi) ** 2).sum())
    if den < floor:
        raise UnresolvableEnergyError(f"filtered norm {den:.3e} below floor")
    full = vecs @ phi
    num = float(np.vdot(full, _apply_observable(obs, full)).real)
    return num / den


def eigenwindow_average(model: DenseModel, obs, energy: float,
                        window: float) -> float:
    """Unweighted mean of eigenstate expectations with |E_i - E| <= window."""
    vals, vecs = model.eigensystem()
    mask = np.abs(vals - energy) <= window
    if not mask.any():
        nearest = float(vals[np.argmin(np.abs(vals - energy))])
        raise EmptyWindowError(
            f"no eigenvalue within {window} of E={energy}; nearest is {nearest}")
    cols = vecs[:, mask]
    if callable(obs):
        acols = np.stack([obs(cols[:, j]) for j in range(cols.shape[1])], axis=1)
    else:
        obs_arr = np.asarray(obs)
        acols = obs_arr[:, None] * cols if obs_arr.ndim == 1 else obs_arr @ cols
    vals_i = np.einsum("si,si->i", cols.conj(), acols).real
    return float(vals_i.mean())


# ---------------------------------------------------------------------------
# reflection-parity sectors for the open tilted chain


def _reflect_indices(n_sites: int) -> np.ndarray:
    idx = np.arange(2 ** n_sites)
    out = np.zeros_like(idx)
    for i in range(n_sites):
        bit = (idx >> i) & 1
        out |= bit << (n_sites - 1 - i)
    return out


class ReflectionSectors:
    """Even/odd spatial-reflection sectors of a reflection-symmetric matrix.

    Halves the eigenproblem: two ~2^(N-1) dense solves instead of one 2^N
    solve, which is what makes N = 14 tractable here.
    """

    def __init__(self, matrix: sp.spmatrix, n_sites: int):
        self.n_sites = n_sites
        dim = 2 ** n_sites
        refl = _reflect_indices(n_sites)
        reps = np.nonzero(np.arange(dim) <= refl)[0]
        self._reps = reps
        self._refl = refl
        paired = refl[reps] != reps
        orbit = np.where(paired, 2.0, 1.0)
        rep_pos = np.full(dim, -1, dtype=np.int64)
        rep_pos[reps] = np.arange(reps.size)
        self._rep_pos = rep_pos
        self._orbit = orbit

        coeff = 1.0 / np.sqrt(orbit)
        rows = np.concatenate([reps, refl[reps][paired]])
        cols = np.concatenate([np.arange(reps.size), np.nonzero(paired)[0]])
        vals = np.concatenate([coeff, coeff[paired]])
        b_even = sp.csr_matrix((vals, (rows, cols)), shape=(dim, reps.size))
        odd_sel = np.nonzero(paired)[0]
        rows_o = np.concatenate([reps[odd_sel], refl[reps[odd_sel]]])
        half = 1.0 / math.sqrt(2.0)
        vals_o = np.concatenate([np.full(odd_sel.size, half),
                                 np.full(odd_sel.size, -half)])
        cols_o = np.concatenate([np.arange(odd_sel.size)] * 2)
        b_odd = sp.csr_matrix((vals_o, (rows_o, cols_o)), shape=(dim, odd_sel.size))
        self.basis = (b_even, b_odd)

        self._eigs = []
        for b in self.basis:
            sector = (b.T @ (matrix @ b)).toarray()
            self._eigs.append(np.linalg.eigh(sector))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.sort(np.concatenate([e[0] for e in self._eigs]))

    def project(self, full_vector: np.ndarray, sector: int) -> np.ndarray:
        return self.basis[sector].T @ full_vector

    def expand(self, coeffs: np.ndarray, sector: int) -> np.ndarray:
        return self.basis[sector] @ coeffs

    def eigen_expectations(self, obs, sector: int, mask: np.ndarray) -> np.ndarray:
        """<E_i|A|E_i> for the masked eigenstates of one sector; ``obs`` is a
        full-space diagonal (1-d) or sparse matrix, reflection symmetric."""
        vals, vecs = self._eigs[sector]
        cols = vecs[:, mask]
        if isinstance(obs, np.ndarray) and obs.ndim == 1:
            d_orbit = obs[self._reps].copy()
            paired = self._orbit == 2.0
            d_orbit[paired] = 0.5 * (obs[self._reps[paired]]
                                     + obs[self._refl[self._reps[paired]]])
            if sector == 0:
                weights = np.abs(cols) ** 2
                return weights.T @ d_orbit
            d_odd = d_orbit[paired]
            return (np.abs(cols) ** 2).T @ d_odd
        b = self.basis[sector]
        sector_obs = (b.T @ (obs @ b))
        return np.einsum("si,si->i", cols, sector_obs @ cols)


class TiltedIsingSectors:
    """Reflection-sector solver for the open tilted-field chain."""

    def __init__(self, j: float, h: float, g: float, n_sites: int):
        if n_sites < 4 or n_sites > MAX_DENSE_SITES:
            raise ResourceLimitError(f"supported sizes are 4..{MAX_DENSE_SITES}")
        self.j, self.h, self.g, self.n_sites = j, h, g, n_sites
        self._h_sparse = tilted_ising_sparse(j, h, g, n_sites)
        self.sectors = ReflectionSectors(self._h_sparse, n_sites)
        self.exponent_scale = tilted_exponent_scale(j, h, g, n_sites)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.sectors.eigenvalues

    def moments(self, state: DenseState) -> tuple[float, float]:
        hpsi = self._h_sparse @ state.vector
        e = float(np.vdot(state.vector, hpsi).real)
        e2 = float(np.vdot(hpsi, hpsi).real)
        return e, math.sqrt(max(e2 - e * e, 0.0))

    def filtered_double_expectation(self, state: DenseState, obs, energy: float,
                                    delta: float, floor: float = 1e-300) -> float:
        """Sector-basis equivalent of :func:`filtered_expectation_exact` for
        reflection-symmetric states and observables."""
        coeffs = self.sectors.project(state.vector, 0)
        odd = self.sectors.project(state.vector, 1)
        if odd.size and float(np.linalg.norm(odd)) > 1e-10:
            raise ValueError("state is not reflection symmetric")
        vals, vecs = self.sectors._eigs[0]
        v = vecs.T @ coeffs
        arg_max = float(np.abs((self.eigenvalues - energy)
                               / self.exponent_scale).max())
        if arg_max > COS_GAUSS_CROSSOVER:
            warnings.warn("cosine filter argument leaves the Gaussian window",
                          RuntimeWarning, stacklevel=2)
        f_even = _filter_factors(vals, energy, delta, self.exponent_scale,
                                 warn=False)
        phi = f_even * v
        den = float((np.abs(phi) ** 2).sum())
        if den < floor:
            raise UnresolvableEnergyError(f"filtered norm {den:.3e} below floor")
        full = self.sectors.expand(vecs @ phi, 0)
        if isinstance(obs, np.ndarray) and obs.ndim == 1:
            num = float((np.abs(full) ** 2 @ obs).real)
        else:
            num = float(np.vdot(full, obs @ full).real)
        return num / den

    def eigenwindow_average(self, obs, energy: float, window: float) -> float:
        pieces = []
        for sector in (0, 1):
            vals = self.sectors._eigs[sector][0]
            mask = np.abs(vals - energy) <= window
            if mask.any():
                pieces.append(self.sectors.eigen_expectations(obs, sector, mask))
        if not pieces:
            allv = self.eigenvalues
            nearest = float(allv[np.argmin(np.abs(allv - energy))])
            raise EmptyWindowError(
                f"no eigenvalue within {window} of E={energy}; nearest {nearest}")
        return float(np.concatenate(pieces).mean())
