"""Test the stabilizing horizon N0 and the suboptimality index alpha_N."""
import numpy as np
import pytest

from control.horizon_manager import HorizonManager
from utils.exceptions import GammaBelowOne, InputError


def test_example1_horizon():
    horizon = HorizonManager(6.4)
    assert horizon.horizon_threshold() == pytest.approx(11.93, abs=0.01)
    assert horizon.minimal_horizon() == 12
    assert 0.535 <= horizon.alpha(16) <= 0.545
    assert horizon.alpha(15) == pytest.approx(0.448, abs=0.005)
    assert horizon.smallest_horizon_for_alpha(0.5) == 16


def test_gamma_two():
    horizon = HorizonManager(2.0)
    assert horizon.minimal_horizon() == 3
    assert horizon.alpha(3) == pytest.approx(2 / 3)
    assert horizon.smallest_horizon_for_alpha(0.6) == 3
    assert horizon.smallest_horizon_for_alpha(0.9) == 5


def test_gamma_one_is_degenerate():
    horizon = HorizonManager(1.0)
    assert horizon.minimal_horizon() == 2
    assert horizon.alpha(2) == 1.0
    assert horizon.alpha(50) == 1.0
    assert horizon.smallest_horizon_for_alpha(0.99) == 2


@pytest.mark.parametrize("gamma", [0.5, 0.999, float("inf"), float("nan")])
def test_invalid_gamma(gamma):
    with pytest.raises(GammaBelowOne):
        HorizonManager(gamma)


def test_alpha_needs_horizon_two():
    with pytest.raises(InputError):
        HorizonManager(3.0).alpha(1)


@pytest.mark.parametrize("target", [0.0, 1.0, -0.1])
def test_alpha_target_range(target):
    with pytest.raises(InputError):
        HorizonManager(3.0).smallest_horizon_for_alpha(target)


def test_minimal_horizon_is_tight(rng):
    for gamma in rng.uniform(1.05, 50.0, 200):
        horizon = HorizonManager(float(gamma))
        n0 = horizon.minimal_horizon()
        assert n0 > horizon.horizon_threshold()
        assert horizon.alpha(n0) > 0
        if n0 - 1 >= 2:
            assert horizon.alpha(n0 - 1) <= 1e-12


def test_alpha_increases_to_one():
    horizon = HorizonManager(6.4)
    table = horizon.alpha_table(100)
    values = [table[N] for N in sorted(table)]
    assert min(table) == 12 and max(table) == 100
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=1e-6)


def test_log_form_matches_direct_form():
    for gamma in (1.5, 2.0, 6.4, 20.0):
        horizon = HorizonManager(gamma)
        for N in range(2, 31):
            assert horizon.alpha(N) == pytest.approx(horizon.alpha_direct(N), rel=1e-9, abs=1e-9)


def test_large_horizon_does_not_overflow():
    assert np.isfinite(HorizonManager(6.4).alpha(2000))


def test_certificate():
    certificate = HorizonManager(6.4).certificate(n_max=20)
    assert certificate.n0 == 12
    assert sorted(certificate.alpha_table) == list(range(12, 21))


def test_performance_bound():
    p_hat = np.array([64.0, 23.0, 2.0, 13.3448, 9.4516])
    bound = HorizonManager.performance_bound(p_hat, 0.5, np.ones(5))
    assert bound == pytest.approx(2 * p_hat.sum())
    with pytest.raises(InputError):
        HorizonManager.performance_bound(p_hat, 0.0, np.ones(5))
