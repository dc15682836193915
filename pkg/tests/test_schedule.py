import math

import pytest
from hypothesis import given, strategies as st

from autorank_lora import DomainError, ScheduleState, StateError, alpha, normalized_loss, threshold


@pytest.mark.parametrize("epoch, expected", [(0, 1.0), (50, 1.5), (100, 2.0)])
def test_alpha_values(epoch, expected):
    assert alpha(epoch, 100) == expected


def test_alpha_errors():
    with pytest.raises(DomainError):
        alpha(101, 100)
    with pytest.raises(DomainError):
        alpha(-1, 100)
    with pytest.raises(DomainError):
        alpha(0, 0)


@pytest.mark.parametrize("total", [1, 7, 10, 100, 1000])
def test_alpha_affine_steps(total):
    for e in range(total):
        assert abs((alpha(e + 1, total) - alpha(e, total)) - 1 / total) <= 1e-15


def _state(losses, reference):
    s = ScheduleState(total_epochs=100)
    s.window_losses = list(losses)
    s.reference_loss = reference
    return s


def test_normalized_loss_ceiling():
    assert normalized_loss(_state([2.0, 2.0], 2.0)) == 1 - 1e-6


def test_normalized_loss_floor():
    assert normalized_loss(_state([0.0], 2.0)) == 1e-6


def test_normalized_loss_ratio():
    assert normalized_loss(_state([0.25, 0.75], 2.0)) == 0.25


def test_normalized_loss_empty_window():
    with pytest.raises(StateError):
        normalized_loss(_state([], 1.0))


def test_record_and_flush():
    s = ScheduleState(total_epochs=3)
    s.record(4.0)
    s.record(2.0)
    assert s.reference_loss == 4.0 and s.epoch == 2
    assert normalized_loss(s) == 0.75
    s.flush()
    assert s.window_losses == [] and s.reference_loss == 4.0
    s.record(1.0)
    with pytest.raises(StateError):
        s.record(1.0)
    with pytest.raises(DomainError):
        ScheduleState(total_epochs=3).record(float("nan"))


@given(
    losses=st.lists(st.floats(0, 1e6), min_size=1, max_size=20),
    reference=st.floats(1e-3, 1e6),
)
def test_normalized_loss_bounds(losses, reference):
    l = normalized_loss(_state(losses, reference))
    assert 1e-6 <= l <= 1 - 1e-6


def test_threshold_values():
    assert threshold(0.25, 1.5) == 0.875
    assert threshold(0.5, 1.0) == 0.5
    assert threshold(1 - 1e-12, 1.0) < 1e-11


@pytest.mark.parametrize("l", [0.0, 1.0, -0.5, 2.0])
def test_threshold_domain(l):
    with pytest.raises(DomainError):
        threshold(l, 1.5)


def test_threshold_alpha_domain():
    with pytest.raises(DomainError):
        threshold(0.5, 0.9)


def test_threshold_monotonicity_grid():
    ls = [i / 20 for i in range(1, 20)]
    alphas = [1 + i / 10 for i in range(11)]
    for a in alphas:
        ps = [threshold(l, a) for l in ls]
        assert all(x > y for x, y in zip(ps, ps[1:]))
    for l in ls:
        ps = [threshold(l, a) for a in alphas]
        assert all(x < y for x, y in zip(ps, ps[1:]))


@given(l=st.floats(1e-6, 1 - 1e-6), total=st.integers(1, 500))
def test_threshold_non_decreasing_over_training(l, total):
    ps = [threshold(l, alpha(e, total)) for e in range(total + 1)]
    assert all(b >= a for a, b in zip(ps, ps[1:]))
    assert all(0 < p < 1 or math.isclose(p, 0, abs_tol=1e-12) for p in ps)
