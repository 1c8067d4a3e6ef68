import math

import numpy as np
import pytest

from cosfilt import dense


def test_model_validation():
    with pytest.raises(dense.ResourceLimitError):
        dense.build_tilted_ising(1.0, 0.5, -1.05, 15)
    bad = np.zeros((4, 4))
    bad[0, 1] = 1.0
    with pytest.raises(ValueError):
        dense.DenseModel(bad, 2)
    with pytest.raises(ValueError):
        dense.DenseState(np.ones(4))  # not normalized


def test_tilted_spectrum_nondegenerate_at_chaotic_point():
    dm = dense.build_tilted_ising(1.0, 0.5, -1.05, 10)
    vals = dm.spectrum()
    assert vals[0] < -10.0 and vals[-1] > 10.0
    assert np.diff(vals).min() > 1e-8


def test_tilted_classical_limit_enumerable():
    dm = dense.build_tilted_ising(1.0, 0.5, 0.0, 4)
    # diagonal model: energies enumerable straight from the bit patterns
    expected = []
    for s in range(16):
        z = [1 - 2 * ((s >> (3 - i)) & 1) for i in range(4)]
        expected.append(sum(z[i] * z[i + 1] for i in range(3)) + 0.5 * sum(z))
    assert np.allclose(np.sort(dm.spectrum()), np.sort(expected), atol=1e-12)


def test_tilted_transverse_limit_symmetric_in_g():
    a = dense.build_tilted_ising(1.0, 0.0, 0.7, 8).spectrum()
    b = dense.build_tilted_ising(1.0, 0.0, -0.7, 8).spectrum()
    assert np.allclose(a, b, atol=1e-10)


def test_product_state_theta_energy():
    n, h, g = 10, 0.5, -1.05
    dm = dense.build_tilted_ising(1.0, h, g, n)
    # exact finite-size energy of the real translation-invariant family
    for theta in (0.0, math.pi / 4, math.pi / 3, math.pi / 6):
        st = dense.product_state_theta(theta, n)
        e = dense.moments(dm, st)[0]
        expected = ((n - 1) * math.cos(2 * theta) ** 2
                    + h * n * math.cos(2 * theta) + g * n * math.sin(2 * theta))
        assert e == pytest.approx(expected, abs=1e-10)
    st0 = dense.product_state_theta(0.0, n)
    assert dense.moments(dm, st0)[0] == pytest.approx(n - 1 + n * h)


def test_energy_density_limits_match_quoted_values():
    h, g = 0.5, -1.05
    dens = lambda t: math.cos(2 * t) ** 2 + h * math.cos(2 * t) + g * math.sin(2 * t)
    assert dens(math.pi / 4) == pytest.approx(-1.05)
    assert dens(math.pi / 3) == pytest.approx(-0.909, abs=5e-4)
    assert dens(math.pi / 6) == pytest.approx(-0.409, abs=5e-4)


def test_amplitude_identities():
    dm = dense.build_transverse_ising(1.0, 2.0, 8)
    rng = np.random.default_rng(0)
    st = dense.random_product_state(8, rng)
    assert dense.amplitude(dm, st, 0.0) == pytest.approx(1.0)
    mag = dense.magnetization_diagonal(8)
    assert dense.observable_amplitude(dm, st, np.ones(256), 0.4, 0.4) == \
        pytest.approx(1.0)
    # two-time amplitude equals the one-sided amplitude of the evolved state
    vals, vecs = dm.eigensystem()
    t1, t2 = 0.9, 2.3
    evolved = vecs @ (np.exp(-1j * vals * t1) * (vecs.conj().T @ st.vector))
    lhs = dense.observable_amplitude(dm, st, mag, t1, t2)
    rhs = dense.observable_amplitude(dm, dense.DenseState(evolved), mag,
                                     0.0, t2 - t1)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_evolution_conserves_norm_and_energy():
    dm = dense.build_transverse_ising(1.0, 2.0, 8)
    rng = np.random.default_rng(1)
    st = dense.random_product_state(8, rng)
    vals, vecs = dm.eigensystem()
    v = vecs.conj().T @ st.vector
    e0 = dense.moments(dm, st)[0]
    for t in (0.1, 37.0, 1000.0):
        evolved = vecs @ (np.exp(-1j * vals * t) * v)
        assert np.linalg.norm(evolved) == pytest.approx(1.0, abs=1e-10)
        e_t = float(np.vdot(evolved, dm.matrix @ evolved).real)
        assert e_t == pytest.approx(e0, abs=1e-10)


def test_filtered_expectation_identity_and_projector_limit():
    dm = dense.build_transverse_ising(1.0, 2.0, 6)
    rng = np.random.default_rng(2)
    st = dense.random_product_state(6, rng)
    assert dense.filtered_expectation_exact(dm, st, np.ones(64), 0.0, 2.0) == \
        pytest.approx(1.0)
    vals, vecs = dm.eigensystem()
    mag = dense.magnetization_diagonal(6)
    # pick the interior level with the widest gaps (the model is integrable,
    # so many levels are exactly degenerate and unusable here)
    gaps = np.minimum(np.diff(vals)[:-1], np.diff(vals)[1:])
    idx = int(np.argmax(gaps)) + 1
    got = dense.filtered_expectation_exact(dm, st, mag, float(vals[idx]),
                                           float(gaps[idx - 1]) / 10.0)
    ref = float(np.vdot(vecs[:, idx], mag * vecs[:, idx]).real)
    assert got == pytest.approx(ref, abs=1e-8)


def test_filtered_expectation_floor():
    dm = dense.build_transverse_ising(1.0, 2.0, 6)
    rng = np.random.default_rng(3)
    st = dense.random_product_state(6, rng)
    with pytest.raises(dense.UnresolvableEnergyError):
        dense.filtered_expectation_exact(dm, st, dense.magnetization_diagonal(6),
                                         -8.5, 0.02)


def test_eigenwindow_average():
    dm = dense.build_transverse_ising(1.0, 2.0, 6)
    vals, vecs = dm.eigensystem()
    width = float(vals[-1] - vals[0])
    assert dense.eigenwindow_average(dm, np.ones(64), 0.0, width) == \
        pytest.approx(1.0)
    mag = dense.magnetization_diagonal(6)
    lone = 5
    gap = min(vals[lone] - vals[lone - 1], vals[lone + 1] - vals[lone]) / 3
    got = dense.eigenwindow_average(dm, mag, float(vals[lone]), gap)
    ref = float(np.vdot(vecs[:, lone], mag * vecs[:, lone]).real)
    assert got == pytest.approx(ref)
    with pytest.raises(dense.EmptyWindowError) as err:
        dense.eigenwindow_average(dm, mag, vals[0] - 50.0, 1.0)
    assert "nearest" in str(err.value)


def test_variance_extensivity_band():
    for n in (6, 8, 10, 12):
        dm = dense.build_tilted_ising(1.0, 0.5, -1.05, n)
        st = dense.product_state_theta(math.pi / 4, n)
        _, sigma = dense.moments(dm, st)
        assert 0.5 <= sigma ** 2 / n <= 5.0


def test_reflection_sectors_match_full_dense():
    n = 10
    solver = dense.TiltedIsingSectors(1.0, 0.5, -1.05, n)
    dm = dense.build_tilted_ising(1.0, 0.5, -1.05, n)
    assert np.abs(np.sort(solver.eigenvalues)
                  - np.sort(dm.spectrum())).max() < 1e-10
    scale = dense.tilted_exponent_scale(1.0, 0.5, -1.05, n)
    zz = dense.zz_bond_diagonal(n, n // 2 - 1)
    x_sym = 0.5 * (dense.x_site_sparse(n, n // 2 - 1)
                   + dense.x_site_sparse(n, n // 2))
    for theta in (math.pi / 4, math.pi / 6):
        st = dense.product_state_theta(theta, n)
        energy = solver.moments(st)[0]
        assert energy == pytest.approx(dense.moments(dm, st)[0], abs=1e-10)
        for obs_s, obs_d in ((zz, zz), (x_sym, x_sym.toarray())):
            a = solver.filtered_double_expectation(st, obs_s, energy, 1.3)
            b = dense.filtered_expectation_exact(dm, st, obs_d, energy, 1.3,
                                                 exponent_scale=scale)
            assert a == pytest.approx(b, abs=1e-10)
        ra = solver.eigenwindow_average(zz, energy, 0.05 * n)
        rb = dense.eigenwindow_average(dm, zz, energy, 0.05 * n)
        assert ra == pytest.approx(rb, abs=1e-10)
        rxa = solver.eigenwindow_average(x_sym, energy, 0.05 * n)
        rxb = dense.eigenwindow_average(dm, x_sym.toarray(), energy, 0.05 * n)
        assert rxa == pytest.approx(rxb, abs=1e-10)


def test_reflection_sectors_reject_asymmetric_state():
    solver = dense.TiltedIsingSectors(1.0, 0.5, -1.05, 6)
    rng = np.random.default_rng(4)
    vec = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    state = dense.DenseState(vec / np.linalg.norm(vec))
    with pytest.raises(ValueError):
        solver.filtered_double_expectation(state, dense.zz_bond_diagonal(6, 2),
                                           0.0, 1.0)


def test_gaussian_window_warning():
    dm = dense.build_tilted_ising(1.0, 0.5, -1.05, 8)
    st = dense.product_state_theta(math.pi / 4, 8)
    with pytest.warns(RuntimeWarning):
        # scale too small: cosine argument leaves the validated window
        dense.filtered_expectation_exact(dm, st, dense.zz_bond_diagonal(8, 3),
                                         0.0, 1.0, exponent_scale=6.0)


def test_fermion_chain_and_fock_vectors():
    dm = dense.build_fermion_chain(1.0, 2.0, 6)
    vac = dense.fock_state_vector(6, [])
    # hopping annihilates the vacuum, leaving -h N / 2
    assert dense.moments(dm, vac)[0] == pytest.approx(-6.0)
    with pytest.raises(ValueError):
        dense.fock_state_vector(6, [1, 1])
    with pytest.raises(ValueError):
        dense.fock_state_vector(6, [4])


def test_xy_chain_and_parity_state():
    n = 6
    fields = np.linspace(0.4, 1.0, n)
    dm = dense.build_xy_chain(1.0, 0.0, fields, n)
    st = dense.xy_parity_eigenstate(n)
    # symmetry makes the return amplitude real
    amps = dense.amplitude_series(dm, st, np.linspace(0, 5, 41))
    assert np.abs(amps.imag).max() < 1e-10
