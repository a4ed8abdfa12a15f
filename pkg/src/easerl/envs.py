"""Curriculum-parameterized environments.

Three tasks share one contract: deterministic kinematics, a barrier region
that only ever affects reward (never transitions), and a reward assembled as
base(s, a, s') minus a curriculum-controlled barrier penalty.  The curriculum
knob is either a weight alpha in [0, 1] on the full-barrier penalty or an
active subset of the barrier charged at full magnitude.

nav1: 20x20 field, car starts below a centered rectangular barrier (width in
{1, 3, 5, 7}, depth 2) and must reach the goal band at the top, passing on a
target side.  The side bonus follows the car's heading and anneals linearly
to zero while a distance-to-goal term ramps up.

nav2: same field with two stacked 9x4 barriers; +500 for passing each barrier
on its target side, +2000 at the goal, plus a potential-difference shaping
term.  Returns are undiscounted so the documented >3000 success threshold is
meaningful.

angle: 1-D double integrator over a joint angle with a penalized band around
pi/4; classes are "above" or "below" the band in the time-angle plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rl as _rl
from .errors import NonFiniteAction, UnsupportedSize
from .geometry import ConvexPolygon, IntervalSet, Point2, RegionSet, contains
from .homotopy import Trajectory
from .seeding import rng_for

FIELD_HALF = 10.0
NAV_SIZES = (1, 3, 5, 7)


@dataclass(frozen=True)
class MdpSpec:
    state_dim: int  # observation feature dimension
    action_dim: int
    horizon: int
    discount: float
    goal_set: object = None

    def __post_init__(self):
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must be in (0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class RewardSpec:
    """Curriculum knob: penalty weight or active barrier subset.

    mode "reward_weight": reward = base - alpha * M * [s' in full barrier].
    mode "barrier_set":   reward = base - M * [s' in active subset].
    """

    mode: str
    alpha: float = 1.0
    active: object = None  # RegionSet | IntervalSet when mode == "barrier_set"

    def __post_init__(self):
        if self.mode not in ("reward_weight", "barrier_set"):
            raise ValueError(f"unknown reward mode {self.mode!r}")
        if self.mode == "reward_weight" and not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must be in [0, 1]")
        if self.mode == "barrier_set" and self.active is None:
            raise ValueError("barrier_set mode needs an active subset")


def relaxed_reward(env) -> RewardSpec:
    return RewardSpec("reward_weight", alpha=0.0)


def full_reward(env) -> RewardSpec:
    return RewardSpec("reward_weight", alpha=1.0)


@dataclass(frozen=True)
class StepResult:
    state: np.ndarray
    reward: float
    terminal: bool
    collided: bool  # membership of the penalized set this step


@dataclass(frozen=True)
class CarState:
    """Structured view of a car state vector."""

    position: tuple[float, float]
    heading: float
    speed: float
    angular_velocity: float

    @staticmethod
    def from_vector(v: np.ndarray) -> "CarState":
        return CarState((float(v[0]), float(v[1])), float(v[2]), float(v[3]), float(v[4]))


# car state vector layout: [x, y, heading, speed, ang_vel, t, flags...]
_IX, _IY, _IH, _IV, _IW, _IT = 0, 1, 2, 3, 4, 5


@dataclass(frozen=True)
class CarEnv:
    """Unicycle car in the 20x20 field with a rectangular barrier union."""

    name: str
    spec: MdpSpec
    barrier: RegionSet
    target_bits: tuple[int, ...]  # per part: 1 = left, 0 = right
    goal_poly: ConvexPolygon
    start: tuple[float, float]
    obs_mode: str = "full"  # "full" | "position"
    dt: float = 0.1
    v_set: float = 2.0
    kp: float = 2.0
    steer_max: float = 1.5
    c_side: float = 1.0
    c_goal: float = 2.0
    goal_bonus: float = 50.0
    c_pot: float = 0.0
    side_bonus: float = 0.0
    barrier_tops: tuple[float, ...] = ()

    def action_low_high(self) -> tuple[float, float]:
        return -1.0, 1.0

    def initial_state(self) -> np.ndarray:
        n_flags = len(self.barrier_tops)
        v = np.zeros(6 + n_flags)
        v[_IX], v[_IY] = self.start
        v[_IH] = math.pi / 2.0
        return v

    def features(self, state: np.ndarray) -> np.ndarray:
        if self.obs_mode == "position":
            return np.array([state[_IX] / FIELD_HALF, state[_IY] / FIELD_HALF])
        base = [
            state[_IX] / FIELD_HALF,
            state[_IY] / FIELD_HALF,
            math.cos(state[_IH]),
            math.sin(state[_IH]),
            state[_IV] / self.v_set,
            state[_IW] / self.steer_max,
            state[_IT] / self.spec.horizon,
        ]
        return np.array(base + list(state[6:]))

    def dynamics(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        a = min(1.0, max(-1.0, float(action[0])))
        omega = a * self.steer_max
        nxt = state.copy()
        nxt[_IH] = state[_IH] + omega * self.dt
        nxt[_IV] = state[_IV] + self.kp * (self.v_set - state[_IV]) * self.dt
        nxt[_IX] = state[_IX] + nxt[_IV] * math.cos(nxt[_IH]) * self.dt
        nxt[_IY] = state[_IY] + nxt[_IV] * math.sin(nxt[_IH]) * self.dt
        nxt[_IW] = omega
        nxt[_IT] = state[_IT] + 1.0
        for i, top in enumerate(self.barrier_tops):
            if nxt[6 + i] == 0.0 and nxt[_IY] >= top:
                nxt[6 + i] = 1.0
        return nxt

    def base_reward(self, state: np.ndarray, action: np.ndarray, nxt: np.ndarray) -> float:
        t_norm = state[_IT] / self.spec.horizon
        r = 0.0
        if self.c_side:
            side_sign = 1.0 if self.target_bits[0] == 1 else -1.0
            r += self.c_side * (1.0 - t_norm) * side_sign * math.sin(nxt[_IH] - math.pi / 2.0)
        if self.c_goal:
            dist = max(0.0, self.goal_poly.bbox()[1] - nxt[_IY])
            r += -self.c_goal * t_norm * dist / 16.0
        if self.c_pot:
            d_prev = max(0.0, self.goal_poly.bbox()[1] - state[_IY])
            d_next = max(0.0, self.goal_poly.bbox()[1] - nxt[_IY])
            r += self.c_pot * (d_prev - d_next)
        if self.side_bonus:
            for i in range(len(self.barrier_tops)):
                if state[6 + i] == 0.0 and nxt[6 + i] == 1.0:
                    passed_left = nxt[_IX] < 0.0
                    if passed_left == (self.target_bits[i] == 1):
                        r += self.side_bonus
        if self.goal_bonus and self.in_goal(nxt):
            r += self.goal_bonus
        return r

    def in_goal(self, state: np.ndarray) -> bool:
        return self.goal_poly.contains_point(state[_IX], state[_IY])

    def in_region(self, state: np.ndarray, region: RegionSet) -> bool:
        return contains(region, Point2(state[_IX], state[_IY]))

    def is_terminal(self, state: np.ndarray) -> bool:
        return self.in_goal(state) or state[_IT] >= self.spec.horizon

    def task_point(self, state: np.ndarray) -> tuple[float, float]:
        return float(state[_IX]), float(state[_IY])

    def class_region(self) -> RegionSet:
        return self.barrier

    def anchors(self) -> tuple[Point2, Point2]:
        gx0, gy0, gx1, gy1 = self.goal_poly.bbox()
        return Point2(*self.start), Point2(0.5 * (gx0 + gx1), 0.5 * (gy0 + gy1))

    def class_label(self, bits: tuple[int, ...]) -> str:
        return "".join("L" if b else "R" for b in bits)

    def target_label(self) -> str:
        return self.class_label(self.target_bits)

    def reached_goal(self, traj: Trajectory) -> bool:
        x, y = traj.states[-1]
        return self.goal_poly.contains_point(float(x), float(y))


def _goal_band() -> ConvexPolygon:
    return ConvexPolygon.rectangle(0.0, 9.0, 2.0 * FIELD_HALF, 2.0)


def _side_to_bit(side: str) -> int:
    if side not in ("left", "right"):
        raise ValueError(f"target side must be 'left' or 'right', got {side!r}")
    return 1 if side == "left" else 0


def nav1_make(
    barrier_size: int,
    target_side: str = "right",
    penalty: float = 1000.0,
    horizon: int = 128,
    discount: float = 0.99,
    c_side: float = 0.3,
    c_goal: float = 2.0,
    goal_bonus: float = 50.0,
) -> CarEnv:
    """Single centered barrier of the given width (depth 2), start below,
    goal band above."""
    if barrier_size not in NAV_SIZES:
        raise UnsupportedSize(f"nav1 barrier size must be one of {NAV_SIZES}")
    barrier = RegionSet(
        (ConvexPolygon.rectangle(0.0, 0.0, float(barrier_size), 2.0),), penalty
    )
    goal = _goal_band()
    return CarEnv(
        name=f"nav1-{barrier_size}",
        spec=MdpSpec(7, 1, horizon, discount, goal),
        barrier=barrier,
        target_bits=(_side_to_bit(target_side),),
        goal_poly=goal,
        start=(0.0, -8.0),
        c_side=c_side,
        c_goal=c_goal,
        goal_bonus=goal_bonus,
    )


def nav2_make(
    target_classes: str = "RR",
    penalty: float = 1000.0,
    horizon: int = 128,
    c_pot: float = 10.0,
    side_bonus: float = 500.0,
    goal_bonus: float = 2000.0,
    c_side: float = 1.0,
) -> CarEnv:
    """Two stacked 9x4 barriers; letters in target_classes order bottom, top."""
    if len(target_classes) != 2 or any(c not in "LR" for c in target_classes):
        raise ValueError("nav2 target must be two letters from {L, R}")
    bottom = ConvexPolygon.rectangle(0.0, -3.5, 9.0, 4.0)
    top = ConvexPolygon.rectangle(0.0, 3.5, 9.0, 4.0)
    barrier = RegionSet((bottom, top), penalty)
    goal = _goal_band()
    bits = tuple(1 if c == "L" else 0 for c in target_classes)
    return CarEnv(
        name="nav2",
        spec=MdpSpec(9, 1, horizon, 1.0, goal),
        barrier=barrier,
        target_bits=bits,
        goal_poly=goal,
        start=(0.0, -8.0),
        c_side=c_side,
        c_goal=0.0,
        goal_bonus=goal_bonus,
        c_pot=c_pot,
        side_bonus=side_bonus,
        barrier_tops=(bottom.bbox()[3], top.bbox()[3]),
    )


def landscape_make(
    barrier_size: int = 5,
    target_side: str = "left",
    penalty: float = 1000.0,
    horizon: int = 100,
    discount: float = 0.99,
) -> CarEnv:
    """nav1 variant for loss-surface scans: the policy sees position only."""
    env = nav1_make(barrier_size, target_side, penalty, horizon, discount)
    return CarEnv(
        name=f"landscape-{barrier_size}",
        spec=MdpSpec(2, 1, horizon, discount, env.goal_poly),
        barrier=env.barrier,
        target_bits=env.target_bits,
        goal_poly=env.goal_poly,
        start=env.start,
        obs_mode="position",
        c_side=env.c_side,
        c_goal=env.c_goal,
        goal_bonus=env.goal_bonus,
    )


# angle state vector layout: [angle, ang_vel, t]
_IA, _IAV, _IAT = 0, 1, 2


@dataclass(frozen=True)
class AngleEnv:
    """Double-integrator joint angle with a penalized band around pi/4.

    Task-space points are (time * dt, angle), so the band becomes a rectangle
    in the plane and the crossing-parity machinery applies unchanged.
    """

    name: str
    spec: MdpSpec
    band: IntervalSet
    target_side: str  # "up": angle below band; "down": angle above band
    start_angle: float
    goal_angle: float
    dt: float = 0.05
    torque_max: float = 2.0
    damping: float = 0.98
    c_angle: float = 1.0
    c_torque: float = 0.01

    @property
    def barrier(self) -> IntervalSet:
        return self.band

    def action_low_high(self) -> tuple[float, float]:
        return -1.0, 1.0

    def initial_state(self) -> np.ndarray:
        return np.array([self.start_angle, 0.0, 0.0])

    def features(self, state: np.ndarray) -> np.ndarray:
        return np.array([state[_IA], state[_IAV], state[_IAT] / self.spec.horizon])

    def dynamics(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        a = min(1.0, max(-1.0, float(action[0]))) * self.torque_max
        w = self.damping * state[_IAV] + a * self.dt
        return np.array([state[_IA] + w * self.dt, w, state[_IAT] + 1.0])

    def base_reward(self, state: np.ndarray, action: np.ndarray, nxt: np.ndarray) -> float:
        a = min(1.0, max(-1.0, float(action[0]))) * self.torque_max
        return -self.c_angle * abs(nxt[_IA] - self.goal_angle) - self.c_torque * a * a

    def in_region(self, state: np.ndarray, region) -> bool:
        if isinstance(region, IntervalSet):
            return region.contains_value(float(state[_IA]))
        return contains(region, Point2(*self.task_point(state)))

    def is_terminal(self, state: np.ndarray) -> bool:
        return state[_IAT] >= self.spec.horizon

    def in_goal(self, state: np.ndarray) -> bool:
        return False

    def task_point(self, state: np.ndarray) -> tuple[float, float]:
        return float(state[_IAT] * self.dt), float(state[_IA])

    def class_region(self) -> RegionSet:
        lo, hi = self.band.intervals[0]
        span = self.spec.horizon * self.dt
        rect = ConvexPolygon.rectangle(span / 2.0, (lo + hi) / 2.0, span, hi - lo)
        return RegionSet((rect,), self.band.penalty)

    def anchors(self) -> tuple[Point2, Point2]:
        return (
            Point2(0.0, self.start_angle),
            Point2(self.spec.horizon * self.dt, self.goal_angle),
        )

    def class_label(self, bits: tuple[int, ...]) -> str:
        # parity 1 means the path crossed below the band centroid: the up side
        return "U" if bits[0] else "D"

    def target_label(self) -> str:
        return "U" if self.target_side == "up" else "D"

    def reached_goal(self, traj: Trajectory) -> bool:
        lo, hi = self.band.intervals[0]
        final = float(traj.states[-1, 1])
        return final < lo if self.target_side == "up" else final > hi


def angle_make(
    target_side: str = "up",
    penalty: float = 1000.0,
    horizon: int = 128,
    discount: float = 0.99,
    band_center: float = math.pi / 4.0,
    band_half_width: float = 0.2,
) -> AngleEnv:
    if target_side not in ("up", "down"):
        raise ValueError("angle target side must be 'up' or 'down'")
    band = IntervalSet(
        ((band_center - band_half_width, band_center + band_half_width),), penalty
    )
    start = math.pi / 2.0 if target_side == "up" else 0.0
    goal = 0.0 if target_side == "up" else math.pi / 2.0
    return AngleEnv(
        name="angle",
        spec=MdpSpec(3, 1, horizon, discount),
        band=band,
        target_side=target_side,
        start_angle=start,
        goal_angle=goal,
    )


def penalty_region(env, reward_spec: RewardSpec):
    """The set whose membership is charged this step under the given spec."""
    if reward_spec.mode == "reward_weight":
        return env.barrier
    return reward_spec.active


def step(env, state: np.ndarray, action, reward_spec: RewardSpec) -> StepResult:
    """One transition.  The kinematic update never depends on the reward spec."""
    a = np.asarray(action, dtype=float).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise NonFiniteAction(f"non-finite action {a}")
    nxt = env.dynamics(state, a)
    base = env.base_reward(state, a, nxt)
    member = env.in_region(nxt, penalty_region(env, reward_spec))
    if reward_spec.mode == "reward_weight":
        pen = reward_spec.alpha * env.barrier.penalty if member else 0.0
    else:
        pen = env.barrier.penalty if member else 0.0
    return StepResult(nxt, base - pen, env.is_terminal(nxt), bool(member))


@dataclass
class RolloutRecord:
    obs: np.ndarray  # (T, obs_dim)
    actions: np.ndarray  # (T, action_dim)
    rewards: np.ndarray  # (T,)
    trajectory: Trajectory
    ret: float
    collided: bool


def rollout_record(
    env, policy, reward_spec: RewardSpec, seed: int, noise_mode: str = "fresh"
) -> RolloutRecord:
    """Simulate one episode; all stochasticity comes from the seed.

    Both noise modes draw a per-episode Gaussian tape keyed by the seed alone,
    so identical seeds give identical noise regardless of policy parameters;
    "frozen" exists as the documented name for relying on that property.
    """
    if noise_mode not in ("fresh", "frozen"):
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    horizon = env.spec.horizon
    tape = rng_for(seed, "noise").standard_normal((horizon, env.spec.action_dim))
    state = env.initial_state()
    obs_list = []
    act_list = []
    rew_list = []
    points = [env.task_point(state)]
    raws = [state.copy()]
    discount = env.spec.discount
    ret = 0.0
    gamma_t = 1.0
    collided = False
    for t in range(horizon):
        obs = env.features(state)
        action, _ = _rl.act(policy, obs, tape[t])
        res = step(env, state, action, reward_spec)
        obs_list.append(obs)
        act_list.append(action)
        rew_list.append(res.reward)
        ret += gamma_t * res.reward
        gamma_t *= discount
        collided = collided or res.collided
        state = res.state
        points.append(env.task_point(state))
        raws.append(state.copy())
        if res.terminal:
            break
    traj = Trajectory(np.array(points), np.array(raws))
    return RolloutRecord(
        np.array(obs_list),
        np.array(act_list),
        np.array(rew_list),
        traj,
        float(ret),
        collided,
    )


def rollout(
    env, policy, reward_spec: RewardSpec, seed: int, noise_mode: str = "fresh"
) -> tuple[Trajectory, float, bool]:
    rec = rollout_record(env, policy, reward_spec, seed, noise_mode)
    return rec.trajectory, rec.ret, rec.collided


def mean_rollout(env, policy, reward_spec: RewardSpec) -> Trajectory:
    """Noise-free rollout (the policy's mean action at every step)."""
    horizon = env.spec.horizon
    state = env.initial_state()
    points = [env.task_point(state)]
    raws = [state.copy()]
    zero = np.zeros(env.spec.action_dim)
    for _ in range(horizon):
        obs = env.features(state)
        action, _ = _rl.act(policy, obs, zero)
        res = step(env, state, action, reward_spec)
        state = res.state
        points.append(env.task_point(state))
        raws.append(state.copy())
        if res.terminal:
            break
    return Trajectory(np.array(points), np.array(raws))
