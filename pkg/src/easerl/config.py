"""Experiment configuration: one YAML document, schema-versioned, strictly
validated.

Unknown keys anywhere in the document are errors, so typos fail loudly.  A
user file is deep-merged over environment-specific defaults; the merged and
validated document round-trips bit-identically through serialize/parse.
"""

from __future__ import annotations

import copy
import hashlib
import math

import yaml

from .errors import ConfigError

SCHEMA_VERSION = 1

# Convergence band centers below are measured quantities: each is the mean
# final evaluation return of policies trained from random init on that task
# (the random-init baseline procedure), frozen here so runs are reproducible.
# Regenerate with `easerl train` on the matching config and a fresh seed.
_NAV1_CENTERS = {1: 11.0, 3: 10.9, 5: 10.7, 7: 10.0}

# The relaxed task (penalty off) has a size-independent optimum: the straight
# start-to-goal path. Measured converged return for the shipped shaping.
_NAV1_RELAX_CENTER = 11.2

_BASE_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "environment": {
        "name": "nav1",
        "barrier_size": 7,
        "target_side": "left",
    },
    "training": {
        "arch": "mlp",
        "hidden": 32,
        "log_std_init": -0.7,
        "learning_rate": 1e-3,
        "batch_episodes": 10,
        "eval_every": 4096,
        "eval_episodes": 8,
        "max_steps": 200000,
        "convergence": {"center": 0.0, "half_width": 2.0, "patience": 3},
    },
    "transfer": {
        "methods": ["ease_barrier", "naive"],
        "seeds": [0, 1, 2, 3, 4],
        "budget": 200000,
        "source_checkpoint": "",
        "l2sp_coeff": 0.01,
        "final_eval_episodes": 32,
        "relax_convergence": {"center": 0.0, "half_width": 2.0, "patience": 3},
        "stage_convergence": {"center": 0.0, "half_width": 2.0, "patience": 3},
        "schedule": {
            "mode": "barrier_set",
            "alphas": [],
            "barrier_sizes": [],
            "intervals": [],
            "auto_stages": 3,
        },
        "find_sb1": {"max_halvings": 12, "max_inflations": 20, "inflate_radius": 0.25},
    },
    "landscape": {
        "barrier_size": 5,
        "lo": -1.0,
        "hi": 1.3,
        "bucket": 0.1,
        "samples_per_cell": 10,
        "log_std": 0.0,
        # side-optimal 2-parameter policies, found by training each side from
        # an init inside its own class basin (gradient steps cannot cross the
        # collision hump from a zero init)
        "theta_source": [0.2, 0.44],
        "theta_target": [0.25, -0.4],
    },
    "output": {
        "plots": True,
    },
}


def default_config() -> dict:
    return copy.deepcopy(_BASE_DEFAULTS)


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a mapping")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate_config(cfg: dict) -> dict:
    """Merge over defaults, then check types and ranges. Returns the merged doc."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    merged = _merge(_BASE_DEFAULTS, cfg, "")
    _require(
        merged["schema_version"] == SCHEMA_VERSION,
        f"schema_version must be {SCHEMA_VERSION}",
    )
    env = merged["environment"]
    _require(env["name"] in ("nav1", "nav2", "angle"), f"unknown environment.name {env['name']!r}")
    if env["name"] == "nav1":
        _require(env["barrier_size"] in (1, 3, 5, 7), "environment.barrier_size must be 1, 3, 5 or 7")
        _require(env["target_side"] in ("left", "right"), "nav1 target_side must be left or right")
    elif env["name"] == "nav2":
        side = env["target_side"]
        _require(
            isinstance(side, str) and len(side) == 2 and all(c in "LR" for c in side),
            "nav2 target_side must be two letters from {L, R}",
        )
    else:
        _require(env["target_side"] in ("up", "down"), "angle target_side must be up or down")
    tr = merged["training"]
    _require(tr["arch"] in ("linear", "mlp"), "training.arch must be linear or mlp")
    _require(tr["learning_rate"] > 0, "training.learning_rate must be positive")
    _require(tr["batch_episodes"] >= 1, "training.batch_episodes must be >= 1")
    _require(tr["max_steps"] >= 1, "training.max_steps must be >= 1")
    for block in ("convergence",):
        band = tr[block]
        _require(band["half_width"] > 0, f"training.{block}.half_width must be positive")
        _require(band["patience"] >= 1, f"training.{block}.patience must be >= 1")
    xfer = merged["transfer"]
    known_methods = ("ease_reward", "ease_barrier", "naive", "l2sp", "random")
    for m in xfer["methods"]:
        _require(m in known_methods, f"unknown transfer method {m!r}")
    _require(len(xfer["seeds"]) >= 1, "transfer.seeds must be nonempty")
    _require(xfer["budget"] >= 1, "transfer.budget must be >= 1")
    sched = xfer["schedule"]
    _require(
        sched["mode"] in ("reward_weight", "barrier_set"),
        "schedule.mode must be reward_weight or barrier_set",
    )
    land = merged["landscape"]
    _require(land["bucket"] > 0, "landscape.bucket must be positive")
    _require(land["hi"] > land["lo"], "landscape.hi must exceed landscape.lo")
    _require(land["samples_per_cell"] >= 1, "landscape.samples_per_cell must be >= 1")
    return merged


def nav1_defaults(barrier_size: int, target_side: str = "left") -> dict:
    """Calibrated defaults for a nav1 transfer experiment."""
    cfg = default_config()
    cfg["environment"] = {
        "name": "nav1",
        "barrier_size": barrier_size,
        "target_side": target_side,
    }
    center = _NAV1_CENTERS.get(barrier_size, 10.0)
    # patience 5 and a roomy step ceiling for source training: the larger
    # barriers occasionally pass through the band on a lucky eval before the
    # policy is actually reliable, and a premature source poisons every
    # downstream transfer run
    cfg["training"]["convergence"] = {"center": center, "half_width": 2.0, "patience": 5}
    cfg["training"]["max_steps"] = 500000
    cfg["transfer"]["relax_convergence"] = {
        "center": _NAV1_RELAX_CENTER, "half_width": 2.0, "patience": 3,
    }
    cfg["transfer"]["stage_convergence"] = {"center": center, "half_width": 2.0, "patience": 3}
    if barrier_size == 7:
        cfg["transfer"]["schedule"] = {
            "mode": "barrier_set",
            "alphas": [],
            "barrier_sizes": [4, 7],
            "intervals": [],
            "auto_stages": 3,
        }
    return validate_config(cfg)


def nav2_defaults(target_side: str = "RR") -> dict:
    cfg = default_config()
    cfg["environment"] = {"name": "nav2", "barrier_size": 7, "target_side": target_side}
    # measured plateau of a clean correct-class policy is ~3200; the band floor
    # (2600) still excludes wrong-class goal reachers (~2150)
    cfg["training"]["convergence"] = {"center": 3200.0, "half_width": 600.0, "patience": 5}
    cfg["training"]["max_steps"] = 800000
    # eight equal slices (relax + seven alpha stages) of 500k each; stages
    # that are already inside their band gate at step 0 and spend nothing, so
    # the budget is consumed only by the relax stage (~50-100k) and the two or
    # three weight stages where the barrier transit actually has to shrink
    cfg["transfer"]["budget"] = 4000000
    # the penalty-free optimum measured from a wrong-class source is ~3175
    # (both side bonuses, straight through the barriers); the band floor 2800
    # rejects the wrong-class plateau (~2150) and the one-bonus plateau
    # (~2660), so relax and every weight stage must keep both side bonuses.
    # For stage weight w the floor doubles as a transit ceiling (3175 - w*M*c
    # >= 2800), which tightens 12.5 -> 3.75 -> 1.25 over w = 0.03, 0.1, 0.3:
    # loosening it instead lets the mid-weight stages gate on slow cut-through
    # policies that the next weight then distorts without recovering.
    # Stage patience is 1 because updates after reaching the band only let the
    # normalized-advantage steps random-walk an already-adequate policy
    cfg["transfer"]["relax_convergence"] = {"center": 3150.0, "half_width": 350.0, "patience": 3}
    cfg["transfer"]["stage_convergence"] = {"center": 3150.0, "half_width": 350.0, "patience": 1}
    cfg["transfer"]["schedule"] = {
        "mode": "reward_weight",
        "alphas": [0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0],
        "barrier_sizes": [],
        "intervals": [],
        "auto_stages": 3,
    }
    return validate_config(cfg)


def angle_defaults(target_side: str = "up") -> dict:
    cfg = default_config()
    cfg["environment"] = {"name": "angle", "barrier_size": 7, "target_side": target_side}
    cfg["training"]["convergence"] = {"center": -12.0, "half_width": 6.0, "patience": 3}
    cfg["transfer"]["relax_convergence"] = {"center": -12.0, "half_width": 6.0, "patience": 3}
    cfg["transfer"]["stage_convergence"] = {"center": -12.0, "half_width": 6.0, "patience": 3}
    c = math.pi / 4.0
    cfg["transfer"]["schedule"] = {
        "mode": "barrier_set",
        "alphas": [],
        "barrier_sizes": [],
        "intervals": [[c - 0.002, c + 0.002], [c - 0.02, c + 0.02], [c - 0.2, c + 0.2]],
        "auto_stages": 3,
    }
    return validate_config(cfg)


def serialize_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def parse_config(text: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    return validate_config(doc)


def load_config(path) -> dict:
    try:
        with open(path) as f:
            return parse_config(f.read())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]
