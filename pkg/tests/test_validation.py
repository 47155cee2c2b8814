import numpy as np
import pytest

from vibratrak import validation
from vibratrak.validation import CHECKS, cycle_work, random_state, run_checks


@pytest.mark.parametrize("name", list(CHECKS))
def test_check_passes(name):
    (res,) = run_checks([name])
    assert res.passed, res.detail
    assert res.seconds >= 0


def test_unknown_check():
    with pytest.raises(KeyError):
        run_checks(["nope"])


def test_crashing_check_is_a_failure(monkeypatch):
    def boom():
        raise RuntimeError("bad")

    monkeypatch.setitem(CHECKS, "linear_frf", boom)
    (res,) = run_checks(["linear_frf"])
    assert not res.passed and "RuntimeError" in res.detail


def test_cycle_work_of_viscous_force():
    # c v under x = a cos t dissipates pi c a^2 per cycle (omega = 1); the helper drops pi
    X = np.array([0.0, 2.0, 0.0])
    F = np.array([0.0, 0.0, -0.3 * 2.0])  # c v = -c a sin t
    assert cycle_work(X, F) == pytest.approx(0.3 * 4.0)


def test_random_state_shapes():
    rng = np.random.default_rng(0)
    X = random_state(rng, 4, odd_only=True)
    assert X.shape == (9,) and X[0] == 0 and not X[3:5].any() and not X[7:9].any()
    assert validation.random_state(rng, 2, static=False)[0] == 0
