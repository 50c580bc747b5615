"""IDM acceleration law against hand-computed values."""

import math

import pytest

from efsm import AGGRESSIVE, LEADER, NORMAL, CollisionStateError, IdmParams, idm_accel, idm_accel_free


def direct(p, v, dv, s):
    s_star = max(0.0, p.s0 + v * p.T + v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf)))
    return p.a_max * (1.0 - (v / p.v0) ** p.delta_exp - (s_star / s) ** 2)


def test_hand_value_steady_following():
    # s* = 1 + 12.5 = 13.5, (v/v0)^4 = 0.0625, (s*/s)^2 = 0.455625
    a = idm_accel(LEADER, v=12.5, dv=0.0, s=20.0)
    assert a == pytest.approx(0.57825, abs=1e-12)


def test_hand_value_free_road():
    assert idm_accel_free(LEADER, 12.5) == pytest.approx(1.2 * (1 - 0.0625), abs=1e-12)
    assert idm_accel_free(LEADER, 25.0) == pytest.approx(0.0, abs=1e-12)
    assert idm_accel_free(LEADER, 0.0) == pytest.approx(1.2, abs=1e-12)


@pytest.mark.parametrize("p", [LEADER, AGGRESSIVE, NORMAL])
@pytest.mark.parametrize(
    "v,dv,s",
    [
        (0.0, 0.0, 10.0),
        (12.5, 0.0, 20.0),
        (20.0, 5.0, 8.0),
        (15.0, -6.0, 30.0),
        (30.0, 2.0, 3.0),
    ],
)
def test_matches_direct_formula(p, v, dv, s):
    assert idm_accel(p, v, dv, s) == pytest.approx(direct(p, v, dv, s), abs=1e-12)


def test_desired_gap_floors_at_zero():
    # strongly opening gap at low speed would drive s* negative; the floor
    # removes the interaction term instead of rewarding it
    p = LEADER
    v, dv, s = 2.0, -50.0, 10.0
    raw_s_star = p.s0 + v * p.T + v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf))
    assert raw_s_star < 0.0
    assert idm_accel(p, v, dv, s) == pytest.approx(idm_accel_free(p, v), abs=1e-12)


def test_interaction_brakes_when_gap_shrinks():
    a_far = idm_accel(NORMAL, 20.0, 0.0, 100.0)
    a_near = idm_accel(NORMAL, 20.0, 0.0, 5.0)
    assert a_near < a_far
    assert a_near < 0.0


def test_closing_speed_brakes_harder():
    a_steady = idm_accel(NORMAL, 20.0, 0.0, 30.0)
    a_closing = idm_accel(NORMAL, 20.0, 8.0, 30.0)
    assert a_closing < a_steady


@pytest.mark.parametrize("s", [0.0, -1.0])
def test_non_positive_gap_raises(s):
    with pytest.raises(CollisionStateError):
        idm_accel(LEADER, 10.0, 0.0, s)


def test_bounds_clamp():
    assert idm_accel(NORMAL, 20.0, 10.0, 3.0, bounds=(-2.5, 2.5)) == -2.5
    assert idm_accel(AGGRESSIVE, 0.0, -10.0, 500.0, bounds=(-0.1, 0.1)) == 0.1
    inside = idm_accel(LEADER, 12.5, 0.0, 20.0, bounds=(-2.5, 2.5))
    assert inside == pytest.approx(0.57825, abs=1e-12)


@pytest.mark.parametrize(
    "kw",
    [
        dict(a_max=0.0),
        dict(v0=-1.0),
        dict(s0=0.0),
        dict(T=-0.5),
        dict(b_comf=0.0),
        dict(delta_exp=0.0),
        dict(v0=float("nan")),
        dict(a_max=float("inf")),
    ],
)
def test_params_reject_non_positive_fields(kw):
    base = dict(a_max=1.2, v0=25.0, s0=1.0, T=1.0, b_comf=2.5)
    base.update(kw)
    with pytest.raises(ValueError):
        IdmParams(**base)


def test_presets_are_the_documented_tuples():
    assert (LEADER.a_max, LEADER.v0, LEADER.s0, LEADER.T, LEADER.b_comf) == (
        1.2, 25.0, 1.0, 1.0, 2.5,
    )
    assert (AGGRESSIVE.a_max, AGGRESSIVE.v0, AGGRESSIVE.s0, AGGRESSIVE.T, AGGRESSIVE.b_comf) == (
        2.25, 28.0, 0.8, 0.3, 2.0,
    )
    assert (NORMAL.a_max, NORMAL.v0, NORMAL.s0, NORMAL.T, NORMAL.b_comf) == (
        1.25, 25.0, 2.0, 1.5, 2.0,
    )
    for p in (LEADER, AGGRESSIVE, NORMAL):
        assert p.delta_exp == 4.0
