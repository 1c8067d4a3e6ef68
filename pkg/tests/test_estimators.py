import math

import numpy as np
import pytest

from cosfilt import dense, device, estimators, filters, ising


@pytest.fixture(scope="module")
def dense_setup():
    dm = dense.build_transverse_ising(1.0, 2.0, 8)
    return dm, device.DenseSource(dm)


def test_ldos_flat_limit(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(0)
    st = dense.random_product_state(8, rng)
    flat = filters.FilterExpansion.flat(filters.FilterSpec(delta=1.0, n_sites=8))
    res = estimators.ldos(src, st, 3.7, flat)
    assert res.value == pytest.approx(1.0)
    assert res.raw_denominator == 1.0 + 0.0j


def test_ldos_matches_exact_filter(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(1)
    for delta in (0.5, 1.0, 2.0):
        expn = filters.build_expansion(filters.FilterSpec(delta=delta,
                                                          n_sites=8, x=3.0))
        for _ in range(5):
            st = dense.random_product_state(8, rng)
            e = dense.moments(dm, st)[0] + rng.uniform(-1, 1)
            got = estimators.ldos(src, st, e, expn).value
            ref = dense.ldos_exact(dm, st, e, delta)
            assert abs(got - ref) <= expn.spec.truncation_bound + 1e-10


def test_ldos_positivity_up_to_truncation(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(2)
    expn = filters.build_expansion(filters.FilterSpec(delta=0.5, n_sites=8, x=3.0))
    for e in np.linspace(-10, 10, 41):
        st = dense.random_product_state(8, rng)
        assert estimators.ldos(src, st, float(e), expn).value >= \
            -expn.spec.truncation_bound


def test_grid_consistency_when_scales_coincide(dense_setup):
    # r = sqrt(N) makes the optimized scale equal the full one
    dm, src = dense_setup
    rng = np.random.default_rng(3)
    st = dense.random_product_state(8, rng)
    full = filters.build_expansion(filters.FilterSpec(delta=0.7, n_sites=8, x=3.0))
    opt = filters.build_expansion(filters.FilterSpec(
        delta=0.7, n_sites=8, x=3.0, grid=filters.GRID_OPTIMIZED,
        r=math.sqrt(8.0)))
    e = dense.moments(dm, st)[0]
    a = estimators.ldos(src, st, e, full).value
    b = estimators.ldos(src, st, e, opt).value
    assert a == pytest.approx(b, abs=1e-10)


def test_ldos_energy_mass(dense_setup):
    """Integrated filtered norm carries the Gaussian mass sqrt(2 pi) delta."""
    dm, src = dense_setup
    rng = np.random.default_rng(4)
    st = dense.random_product_state(8, rng)
    delta = 0.8
    expn = filters.build_expansion(filters.FilterSpec(delta=delta, n_sites=8,
                                                      x=3.0))
    es = np.linspace(-14.0, 14.0, 1401)
    d = [estimators.ldos(src, st, float(e), expn).value for e in es]
    mass = np.trapezoid(d, es)
    assert mass == pytest.approx(math.sqrt(2 * math.pi) * delta, rel=0.05)


def test_filtered_observable_identity_and_oracle(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(5)
    mag = dense.magnetization_diagonal(8)
    expn = filters.build_expansion(filters.FilterSpec(delta=1.0, n_sites=8, x=3.0))
    for _ in range(5):
        st = dense.random_product_state(8, rng)
        e = dense.moments(dm, st)[0]
        assert estimators.filtered_observable(src, st, np.ones(256), e,
                                              expn).value == pytest.approx(1.0)
        got = estimators.filtered_observable(src, st, mag, e, expn).value
        ref = dense.single_filtered_exact(dm, st, mag, e, 1.0)
        den = dense.ldos_exact(dm, st, e, 1.0)
        assert abs(got - ref) <= expn.spec.truncation_bound / den + 1e-8


def test_filtered_observable_floor_raises(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(6)
    st = dense.random_product_state(8, rng)
    expn = filters.build_expansion(filters.FilterSpec(delta=0.3, n_sites=8, x=3.0))
    with pytest.raises(estimators.UnresolvableEnergyError) as err:
        # below the spectral edge but inside the filter's principal window
        estimators.filtered_observable(src, st, dense.magnetization_diagonal(8),
                                       -12.0, expn, denominator_floor=1e-6)
    assert err.value.report is not None  # search advice attached


def test_double_filtered_identity_and_oracle(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(7)
    mag = dense.magnetization_diagonal(8)
    expn = filters.build_expansion(filters.FilterSpec(delta=1.0, n_sites=8, x=3.0))
    for _ in range(3):
        st = dense.random_product_state(8, rng)
        e = dense.moments(dm, st)[0]
        assert estimators.double_filtered_observable(
            src, st, np.ones(256), e, expn).value == pytest.approx(1.0, abs=1e-10)
        got = estimators.double_filtered_observable(src, st, mag, e, expn).value
        ref = dense.filtered_expectation_exact(dm, st, mag, e, 1.0)
        den = estimators.double_filtered_denominator(src, st, e, expn)
        assert abs(got - ref) <= 2 * expn.spec.truncation_bound / den + 1e-8


def test_double_filtered_denominator_routes_agree(dense_setup):
    """Convolved single sweep equals the quadratic two-time sum."""
    dm, src = dense_setup
    rng = np.random.default_rng(8)
    st = dense.random_product_state(8, rng)
    expn = filters.build_expansion(filters.FilterSpec(delta=1.5, n_sites=8, x=3.0))
    e = dense.moments(dm, st)[0]
    fast = estimators.double_filtered_denominator(src, st, e, expn)
    grid = src.observable_grid(st, np.ones(256), expn.times)
    w = expn.coeffs * np.exp(1j * e * expn.times)
    slow = float(np.vdot(w, grid @ w).real)
    assert fast == pytest.approx(slow, abs=1e-10)


def test_double_filtered_needs_two_time_support(dense_setup):
    dm, src = dense_setup

    class OneSided(device.AmplitudeSource):
        supports_two_time = False
        n_sites = 8

    expn = filters.build_expansion(filters.FilterSpec(delta=1.0, n_sites=8))
    with pytest.raises(estimators.UnresolvableEnergyError):
        estimators.double_filtered_observable(OneSided(), None, None, 0.0, expn)


def test_find_valid_energy_eigenstate():
    model = ising.IsingModel(g=1.0, h=2.0, n_sites=10)
    src = device.FreeFermionSource(model)
    st = ising.FockState(np.full(5, 3))  # exact eigenstate, sigma = 0
    rep = estimators.find_valid_energy(src, st, 1.0)
    assert rep.succeeded
    assert rep.q_at_e == pytest.approx(2.0, abs=1e-6)
    assert rep.threshold == pytest.approx(0.25)
    assert rep.slices == 1


def test_find_valid_energy_guarantee_and_exact_norm():
    model = ising.IsingModel(g=1.0, h=2.0, n_sites=10)
    src = device.FreeFermionSource(model)
    dm = dense.build_fermion_chain(1.0, 2.0, 10)
    rng = np.random.default_rng(9)
    for _ in range(20):
        st = ising.random_fock_state(model, rng)
        rep = estimators.find_valid_energy(src, st, 1.0)
        assert rep.succeeded
        assert rep.interval[0] <= rep.chosen_e <= rep.interval[1]
        # the reported norm tracks the exact filtered norm of the state
        vec = dense.fock_state_vector(10, st.occupied_modes(10))
        exact = dense.ldos_exact(dm, vec, rep.chosen_e, 1.0)
        assert rep.q_at_e / 2.0 == pytest.approx(
            exact, abs=filters.truncation_error_bound(3.0))
        assert exact >= rep.threshold - filters.truncation_error_bound(3.0)


def test_find_valid_energy_threshold_value():
    assert estimators.norm_threshold(1.0, 1.0) == pytest.approx(
        0.25 * 3.0 ** -1.5)
    assert 2.0 * estimators.norm_threshold(1.0, 1.0) == pytest.approx(
        0.0962, abs=5e-5)


def test_find_valid_energy_precondition():
    model = ising.IsingModel(g=1.0, h=2.0, n_sites=10)
    src = device.FreeFermionSource(model)
    st = ising.FockState(np.full(5, 1))
    with pytest.raises(ValueError):
        estimators.find_valid_energy(src, st, 10.0)  # delta > N/sqrt(2)


def test_shot_budget_scales():
    expn = filters.build_expansion(filters.FilterSpec(delta=1.0, n_sites=20, x=3.0))
    plan = estimators.shot_budget(expn, epsilon=1e-2, q=0.5)
    tighter = estimators.shot_budget(expn, epsilon=1e-3, q=0.5)
    assert plan["delta_p"] == pytest.approx(1e-2 * 0.5 / 3.0)
    assert plan["delta_q"] == pytest.approx(1e-2 * 0.25 / 6.0)
    assert tighter["shots_numerator"] > plan["shots_numerator"]
    with pytest.raises(ValueError):
        estimators.shot_budget(expn, epsilon=0.0, q=0.5)


def test_noisy_default_floor(dense_setup):
    dm, src = dense_setup
    rng = np.random.default_rng(10)
    st = dense.random_product_state(8, rng)
    # enough shots that the tail stays below the 1e-6 noisy-source floor
    noisy = device.wrap_noisy(src, device.NoiseSpec(shots=10 ** 12, seed=1))
    expn = filters.build_expansion(filters.FilterSpec(delta=0.4, n_sites=8, x=3.0))
    with pytest.raises(estimators.UnresolvableEnergyError):
        estimators.filtered_observable(noisy, st, dense.magnetization_diagonal(8),
                                       -12.0, expn)
    # the same call on the noiseless source uses a zero floor and just divides
    res = estimators.filtered_observable(src, st, dense.magnetization_diagonal(8),
                                         -12.0, expn)
    assert math.isfinite(res.value)
