"""Built-in car-following cases and the default experiment plan.

Controller parameter sets are [a_max, v0, s0, T, b_comf].  The aggressive
follower keeps a short time headway and minimum gap; the normal follower
keeps comfortable ones.  The four cases differ only in the follower
controller and an optional mid-run controller switch:

  case 1: aggressive throughout (ends in a collision)
  case 2: normal throughout (no collision)
  case 3: aggressive, switching to normal at t = 15 s (no collision)
  case 4: normal, switching to aggressive at t = 10 s (ends in a collision)
"""

from __future__ import annotations

from dataclasses import replace

from .errors import ConfigError
from .idm import IdmParams
from .simulate import ScenarioConfig

__all__ = [
    "LEADER",
    "AGGRESSIVE",
    "NORMAL",
    "PARAM_PRESETS",
    "case_config",
    "variant_config",
    "all_case_configs",
]

LEADER = IdmParams(a_max=1.2, v0=25.0, s0=1.0, T=1.0, b_comf=2.5)
AGGRESSIVE = IdmParams(a_max=2.25, v0=28.0, s0=0.8, T=0.3, b_comf=2.0)
NORMAL = IdmParams(a_max=1.25, v0=25.0, s0=2.0, T=1.5, b_comf=2.0)

PARAM_PRESETS = {"leader": LEADER, "aggressive": AGGRESSIVE, "normal": NORMAL}


def case_config(case_id: int, **overrides) -> ScenarioConfig:
    """ScenarioConfig for one of the four built-in cases.

    Keyword overrides replace any ScenarioConfig field, e.g.
    case_config(1, initial_gap=25.0).
    """
    if case_id == 1:
        cfg = ScenarioConfig(
            case_id=1,
            follower_params_initial=AGGRESSIVE,
            preceding_params=LEADER,
        )
    elif case_id == 2:
        cfg = ScenarioConfig(
            case_id=2,
            follower_params_initial=NORMAL,
            preceding_params=LEADER,
        )
    elif case_id == 3:
        cfg = ScenarioConfig(
            case_id=3,
            follower_params_initial=AGGRESSIVE,
            follower_params_after=NORMAL,
            switch_time=15.0,
            preceding_params=LEADER,
        )
    elif case_id == 4:
        cfg = ScenarioConfig(
            case_id=4,
            follower_params_initial=NORMAL,
            follower_params_after=AGGRESSIVE,
            switch_time=10.0,
            preceding_params=LEADER,
        )
    else:
        raise ConfigError(f"case_id must be 1..4, got {case_id}")
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def variant_config(brake_time: float, case_id: int = 1, **overrides) -> ScenarioConfig:
    """Early-brake variant: the leader full-brakes at a fixed time while the
    follower still runs the case's controller."""
    return case_config(case_id, brake_time=brake_time, **overrides)


def all_case_configs(**overrides) -> list[ScenarioConfig]:
    return [case_config(i, **overrides) for i in (1, 2, 3, 4)]
