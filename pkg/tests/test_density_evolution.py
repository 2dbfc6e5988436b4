import numpy as np
import pytest

from bicmllr.density_evolution import (
    DePopulation,
    de_channel_population,
    de_iterate,
    de_run,
)
from bicmllr.llr import true_nocsi_functions
from conftest import channel, rng


P = 100_000


def test_error_rate_tie_convention():
    pop = DePopulation(np.array([-1.0, 0.0, 0.0, 1.0]))
    assert pop.error_rate == pytest.approx(0.5)


def test_zero_llr_function_gives_half(am8):
    fns = [lambda u: np.zeros(np.shape(u)) for _ in range(3)]
    pop = de_channel_population(fns, am8, channel(8.0), P, seed=0)
    assert pop.error_rate == pytest.approx(0.5)


def test_population_deterministic(am8):
    spec = channel(8.0)
    fns = true_nocsi_functions(am8, spec)
    a = de_channel_population(fns, am8, spec, P, seed=3)
    b = de_channel_population(fns, am8, spec, P, seed=3)
    assert np.array_equal(a.samples, b.samples)
    assert a.size == P


def test_high_snr_population_reliable_with_csi(am8):
    # with the fading gain known, almost every sample is reliable at 30 dB;
    # without CSI the magnitude bits keep an irreducible error floor (the
    # reason capacity saturates at ~1.55 of 3 bits), so CSI LLRs are the
    # right probe of the symmetrization plumbing here
    from bicmllr.llr import TrueCsiLlr
    spec = channel(30.0)
    fns = [TrueCsiLlr(am8, i, spec.sigma2) for i in range(1, 4)]
    pop = de_channel_population(fns, am8, spec, P, seed=0)
    assert pop.error_rate < 0.01


def test_nocsi_population_error_floor(am8):
    spec = channel(30.0)
    fns = true_nocsi_functions(am8, spec)
    pop = de_channel_population(fns, am8, spec, P, seed=0)
    assert 0.05 < pop.error_rate < 0.25


def test_saturated_positive_is_fixed_point():
    chan = DePopulation(np.full(20_000, 50.0))
    pop = DePopulation(chan.samples.copy())
    traj = de_iterate(pop, chan, dv=3, dc=4, iterations=3, seed=0)
    assert traj == [0.0, 0.0, 0.0]
    assert np.all(pop.samples > 0)


def test_erasure_recursion_oracle():
    """Degenerate {0, +50} populations reduce to scalar erasure DE."""
    eps = 0.6
    r = rng(0)
    chan = DePopulation(np.where(r.random(P) < eps, 0.0, 50.0))
    pop = DePopulation(chan.samples.copy())
    traj = de_iterate(pop, chan, dv=3, dc=4, iterations=20, seed=1)
    eps_hat = np.mean(chan.samples == 0.0)
    x = eps_hat
    tol = 2.0 / np.sqrt(P)
    for measured in traj:
        # predict one iteration ahead from the previously measured state so
        # sampling noise does not compound across the comparison
        x_pred = eps_hat * (1.0 - (1.0 - x) ** 3) ** 2
        # error_rate counts ties as half, so erasure fraction = 2 * error_rate
        assert 2.0 * measured == pytest.approx(x_pred, abs=tol)
        x = 2.0 * measured


def test_erasure_subthreshold_converges():
    eps = 0.4  # below the (3,4) erasure threshold
    r = rng(2)
    chan = DePopulation(np.where(r.random(P) < eps, 0.0, 50.0))
    pop = DePopulation(chan.samples.copy())
    traj = de_iterate(pop, chan, dv=3, dc=4, iterations=200, seed=3, target=1e-4)
    assert traj[-1] < 1e-4


def test_trajectory_decreases_above_threshold(am8):
    spec = channel(9.0)
    fns = true_nocsi_functions(am8, spec)
    ok, traj = de_run(fns, am8, spec, P, seed=4, dv=3, dc=4, max_iter=300)
    assert ok
    tail = traj[5:]
    assert all(b <= a + 2.0 / np.sqrt(P) for a, b in zip(tail, tail[1:]))
    assert traj[-1] < 1e-3


def test_monotone_in_snr(am8):
    outcomes = []
    for snr in (7.0, 8.3):
        spec = channel(snr)
        fns = true_nocsi_functions(am8, spec)
        ok, _ = de_run(fns, am8, spec, P, seed=5, dv=3, dc=4, max_iter=400)
        outcomes.append(ok)
    assert outcomes == [False, True]


def test_argument_validation(am8):
    pop = DePopulation(np.zeros(20_000))
    with pytest.raises(ValueError):
        de_iterate(pop, pop, dv=3)  # dc missing
    with pytest.raises(ValueError):
        de_iterate(pop, pop)
    with pytest.raises(ValueError):
        de_channel_population([lambda u: u] * 3, am8, channel(8.0), 100, seed=0)


def test_irregular_matches_regular_for_degenerate_distributions():
    r = rng(6)
    chan = DePopulation(np.where(r.random(50_000) < 0.5, 0.0, 50.0))
    pop_a = DePopulation(chan.samples.copy())
    pop_b = DePopulation(chan.samples.copy())
    ta = de_iterate(pop_a, chan, dv=3, dc=4, iterations=10, seed=7)
    lam = [0.0, 0.0, 1.0]
    rho = [0.0, 0.0, 0.0, 1.0]
    tb = de_iterate(pop_b, chan, lam=lam, rho=rho, iterations=10, seed=7)
    for a, b in zip(ta, tb):
        assert a == pytest.approx(b, abs=3.0 / np.sqrt(50_000))
