"""Shared test oracles, kept independent of the code paths they check."""

import itertools
import math

import numpy as np

from cosfilt import device, ising


def exhaustive_micro_reference(model, expansion, energy, diag_observable,
                               cutoff=0.0, chunk=4096):
    """Brute-force filtered-trace average: enumerate every Fock state,
    weight by max(D(E) after cutoff, 0), average the observable eigenvalue.

    Works block-by-block on label chunks so N = 20 (4^10 states) stays
    affordable; the arithmetic is an honest sum over all states.
    """
    nb = model.n_blocks
    source = device.FreeFermionSource(model)
    times = expansion.positive_times
    table = np.conj(ising.block_amplitudes(model, times))  # e^{-iHt} entries
    weights = expansion.positive_coeffs * np.exp(1j * energy * times)
    occupations = np.array([0.0, 2.0, 1.0, 1.0])

    labels_iter = itertools.product((0, 1, 2, 3), repeat=nb)
    num = 0.0
    den = 0.0
    count = 0
    block_idx = np.arange(nb)
    while True:
        batch = list(itertools.islice(labels_iter, chunk))
        if not batch:
            break
        lab = np.array(batch)  # (b, nb) of 0..3
        amps = table[block_idx[None, :], lab, :].prod(axis=1)  # (b, nt)
        terms = weights[None, :] * amps
        d = terms[:, 0].real + 2.0 * terms[:, 1:].real.sum(axis=1)
        w = np.where(d >= cutoff, d, 0.0)
        w = np.maximum(w, 0.0)
        lam = diag_observable.blocks[block_idx[None, :], lab, lab].real.sum(axis=1)
        num += float((w * lam).sum())
        den += float(w.sum())
        count += lab.shape[0]
    assert count == 4 ** nb
    assert source.n_sites == model.n_sites
    return num / den


def binomial_weight_exact(m_order: int, m: int) -> float:
    """Exact 2^-M binom(M, M/2 - m) through integer arithmetic."""
    k = m_order // 2 - m
    if k < 0 or k > m_order:
        return 0.0
    from fractions import Fraction
    return float(Fraction(math.comb(m_order, k), 2 ** m_order))


def dense_thermal_average(model_dense, diag_obs, beta):
    """trace(A e^{-beta H})/trace(e^{-beta H}) straight from eigenpairs."""
    vals, vecs = model_dense.eigensystem()
    w = np.exp(-beta * (vals - vals.min()))
    a_eig = np.einsum("si,si->i", vecs.conj(), diag_obs[:, None] * vecs).real
    return float((w * a_eig).sum() / w.sum())
