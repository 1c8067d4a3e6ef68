import math

import numpy as np
import pytest

from cosfilt import dense, device, ising


@pytest.fixture(scope="module")
def ff_pair():
    model = ising.IsingModel(g=1.0, h=2.0, n_sites=8)
    dm = dense.build_fermion_chain(1.0, 2.0, 8)
    return model, device.FreeFermionSource(model), device.DenseSource(dm)


def test_capability_flags(ff_pair):
    _, ff, ds = ff_pair
    assert ff.supports_two_time and ff.supports_moments
    assert ds.supports_two_time and ds.supports_moments
    assert ff.n_sites == ds.n_sites == 8


def test_amplitude_normalization_and_conjugation(ff_pair):
    model, ff, _ = ff_pair
    rng = np.random.default_rng(0)
    for _ in range(10):
        st = ising.random_fock_state(model, rng)
        assert ff.amplitude(st, 0.0) == pytest.approx(1.0)
        t = rng.uniform(0.1, 4.0)
        assert ff.amplitude(st, -t) == pytest.approx(np.conj(ff.amplitude(st, t)))


def test_backends_agree(ff_pair):
    model, ff, ds = ff_pair
    rng = np.random.default_rng(1)
    mag_b = ising.magnetization_blocks(model)
    mag_d = dense.magnetization_diagonal(8)
    times = np.linspace(-2.5, 2.5, 21)
    for _ in range(5):
        st = ising.random_fock_state(model, rng)
        vec = dense.fock_state_vector(8, st.occupied_modes(8))
        assert np.abs(ff.amplitude_series(st, times)
                      - ds.amplitude_series(vec, times)).max() < 1e-10
        assert np.abs(ff.observable_series(st, mag_b, times)
                      - ds.observable_series(vec, mag_d, times)).max() < 1e-10
        g1 = ff.observable_grid(st, mag_b, times[:9])
        g2 = ds.observable_grid(vec, mag_d, times[:9])
        assert np.abs(g1 - g2).max() < 1e-10
        e1, s1 = ff.moments(st)
        e2, s2 = ds.moments(vec)
        assert e1 == pytest.approx(e2, abs=1e-10)
        assert s1 ** 2 == pytest.approx(s2 ** 2, abs=1e-9)


def test_hamiltonian_observable_series(ff_pair):
    # A = H makes the observable series the time derivative of the amplitude
    model, ff, _ = ff_pair
    rng = np.random.default_rng(2)
    st = ising.random_fock_state(model, rng)
    hob = ising.hamiltonian_blocks(model)
    dt = 1e-6
    for t in (0.3, 1.7):
        deriv = (ff.amplitude(st, t + dt) - ff.amplitude(st, t - dt)) / (2 * dt)
        assert ff.observable_series(st, hob, [t])[0] == pytest.approx(
            1j * deriv, abs=1e-6)


def test_moments_eigenstate_and_extensivity():
    model = ising.IsingModel(g=1.3, h=0.2, n_sites=10)
    ff = device.FreeFermionSource(model)
    # single-occupation labels everywhere: an exact eigenstate, zero spread
    st = ising.FockState(np.full(5, 3))
    assert ff.moments(st)[1] == 0.0
    dm = dense.build_tilted_ising(1.0, 0.5, -1.05, 10)
    ds = device.DenseSource(dm)
    e, sigma = ds.moments(dense.product_state_theta(math.pi / 4, 10))
    assert 0.5 <= sigma ** 2 / 10 <= 5.0


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        device.NoiseSpec(cutoff=1.5)
    with pytest.raises(ValueError):
        device.NoiseSpec(shots=0)
    assert device.NoiseSpec().cutoff == 0.0


def test_wrap_noisy_passthrough(ff_pair):
    model, ff, _ = ff_pair
    assert device.wrap_noisy(ff, device.NoiseSpec()) is ff
    noisy = device.wrap_noisy(ff, device.NoiseSpec(shots=100, seed=3))
    assert isinstance(noisy, device.NoisySource)
    assert noisy.n_sites == 8


def test_noise_statistics(ff_pair):
    model, ff, _ = ff_pair
    st = ising.FockState(np.full(4, 1))
    shots = 10_000
    noisy = device.wrap_noisy(ff, device.NoiseSpec(shots=shots, seed=7))
    draws = np.array([noisy.amplitude(st, 0.0) for _ in range(10_000)])
    target = 1.0 / math.sqrt(shots)
    for quad in (draws.real - 1.0, draws.imag):
        std = quad.std(ddof=1)
        assert abs(std - target) < 3.0 * target / math.sqrt(2 * len(draws))
    # soft amplitude bound
    assert np.abs(draws).max() <= 1.0 + 5.0 / math.sqrt(shots)
    # conjugation symmetry holds in expectation
    t = 0.9
    a_pos = np.array([noisy.amplitude(st, t) for _ in range(10_000)])
    a_neg = np.array([noisy.amplitude(st, -t) for _ in range(10_000)])
    diff = a_pos.mean() - np.conj(a_neg.mean())
    assert abs(diff) < 4.0 * math.sqrt(2.0) * target / math.sqrt(len(a_pos))


def test_noise_replay_bit_identical(ff_pair):
    model, ff, _ = ff_pair
    st = ising.FockState(np.array([1, 2, 3, 4]))
    times = np.linspace(0, 3, 10)
    a = device.wrap_noisy(ff, device.NoiseSpec(shots=100, seed=11)) \
        .amplitude_series(st, times)
    b = device.wrap_noisy(ff, device.NoiseSpec(shots=100, seed=11)) \
        .amplitude_series(st, times)
    assert (a == b).all()


def test_noisy_moments_stay_exact(ff_pair):
    model, ff, _ = ff_pair
    st = ising.FockState(np.array([1, 2, 3, 4]))
    noisy = device.wrap_noisy(ff, device.NoiseSpec(shots=10, seed=1))
    assert noisy.moments(st) == ff.moments(st)


def test_child_seed_deterministic_and_distinct():
    a = device.child_seed(123, 0)
    assert a == device.child_seed(123, 0)
    seeds = {device.child_seed(123, i) for i in range(100)}
    assert len(seeds) == 100
    assert device.child_seed(124, 0) != a


def test_reconstruct_cosine():
    dt = 0.01
    t = np.arange(0.0, 3 * math.pi, dt)
    rec = device.reconstruct_signed(np.cos(t) ** 2, dt=dt)
    assert np.abs(rec - np.cos(t)).max() < 1e-9


def test_reconstruct_even_zero_keeps_sign():
    dt = 0.01
    t = np.arange(0.0, 2.0, dt)
    g = 0.2 + (t - 1.0) ** 2  # never changes sign, dips near t=1
    g0 = (t - 1.0) ** 2 * (1 + 0.3 * (t - 1.0))  # fourth-order |a|^2 zero
    rec = device.reconstruct_signed(g0 ** 2, dt=dt, zero_tol=0.3)
    assert (rec >= -1e-12).all()
    rec2 = device.reconstruct_signed(g ** 2, dt=dt, zero_tol=0.05)
    assert np.allclose(rec2, g)


def test_reconstruct_ambiguous_zero_raises():
    dt = 0.01
    t = np.arange(0.0, 2.0, dt)
    abs2 = np.abs(t - 1.0) ** 3  # half-odd order in |a|: no valid 2n
    with pytest.raises(device.UnresolvedZeroError) as err:
        device.reconstruct_signed(abs2, dt=dt, zero_tol=0.3)
    assert err.value.window is not None


def test_reconstruct_xy_chain_small():
    n = 6
    rng = np.random.default_rng(5)
    fields = rng.uniform(0.4, 1.1, n)
    dm = dense.build_xy_chain(1.0, 0.0, fields, n)
    st = dense.xy_parity_eigenstate(n)
    dt = 0.01
    times = np.arange(0.0, 12.0, dt)
    amps = dense.amplitude_series(dm, st, times)
    assert np.abs(amps.imag).max() < 1e-10
    rec = device.reconstruct_signed(np.abs(amps) ** 2, dt=dt)
    assert np.abs(rec - amps.real).max() < 1e-3
