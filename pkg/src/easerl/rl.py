"""Gaussian policies and a self-contained REINFORCE engine.

Policies map observation features to a diagonal Gaussian over actions.  The
mean network is either linear (no bias) or a one-hidden-layer tanh MLP;
log-stddevs are trainable per action dimension and clamped to [-5, 1].
Training is plain stochastic gradient ascent on the REINFORCE estimator with
reward-to-go and a per-timestep batch-mean baseline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergedTraining, NonFiniteState
from .seeding import derive_seed

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class Arch:
    """Mean-network shape descriptor."""

    kind: str  # "linear" | "mlp"
    obs_dim: int
    action_dim: int
    hidden: int = 32

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown arch kind {self.kind!r}")
        if self.obs_dim < 1 or self.action_dim < 1 or self.hidden < 1:
            raise ValueError("arch dims must be positive")

    def theta_size(self) -> int:
        if self.kind == "linear":
            return self.action_dim * self.obs_dim
        return (
            self.hidden * self.obs_dim
            + self.hidden
            + self.action_dim * self.hidden
            + self.action_dim
        )


@dataclass
class PolicyParams:
    """Flat mean-network weights plus per-dimension log-stddev."""

    arch: Arch
    theta: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        self.log_std = np.asarray(self.log_std, dtype=float).reshape(-1)
        if self.theta.size != self.arch.theta_size():
            raise ValueError(
                f"theta size {self.theta.size} != arch size {self.arch.theta_size()}"
            )
        if self.log_std.size != self.arch.action_dim:
            raise ValueError("log_std must have one entry per action dimension")

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.arch, self.theta.copy(), self.log_std.copy())

    def flat(self) -> np.ndarray:
        """Full trainable vector: mean weights then log_std entries."""
        return np.concatenate([self.theta, self.log_std])


def init_policy(arch: Arch, seed: int, log_std_init: float = -0.7) -> PolicyParams:
    """He-uniform init for MLP weights; linear policies start at zero."""
    if arch.kind == "linear":
        theta = np.zeros(arch.theta_size())
    else:
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "init")))
        lim1 = math.sqrt(6.0 / arch.obs_dim)
        w1 = rng.uniform(-lim1, lim1, size=(arch.hidden, arch.obs_dim))
        b1 = np.zeros(arch.hidden)
        lim2 = math.sqrt(6.0 / arch.hidden)
        w2 = rng.uniform(-lim2, lim2, size=(arch.action_dim, arch.hidden))
        b2 = np.zeros(arch.action_dim)
        theta = np.concatenate([w1.ravel(), b1, w2.ravel(), b2])
    log_std = np.full(arch.action_dim, float(log_std_init))
    return PolicyParams(arch, theta, log_std)


def _unpack_mlp(arch: Arch, theta: np.ndarray):
    h, i, o = arch.hidden, arch.obs_dim, arch.action_dim
    k = 0
    w1 = theta[k : k + h * i].reshape(h, i)
    k += h * i
    b1 = theta[k : k + h]
    k += h
    w2 = theta[k : k + o * h].reshape(o, h)
    k += o * h
    b2 = theta[k : k + o]
    return w1, b1, w2, b2


def mean_batch(policy: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Mean actions for a (T, obs_dim) observation batch."""
    obs = np.atleast_2d(obs)
    if policy.arch.kind == "linear":
        w = policy.theta.reshape(policy.arch.action_dim, policy.arch.obs_dim)
        return obs @ w.T
    w1, b1, w2, b2 = _unpack_mlp(policy.arch, policy.theta)
    hidden = np.tanh(obs @ w1.T + b1)
    return hidden @ w2.T + b2


def act(policy: PolicyParams, state: np.ndarray, noise: np.ndarray):
    """Sample an action as mean + exp(log_std) * noise; returns (action, log_prob)."""
    state = np.asarray(state, dtype=float).reshape(-1)
    if not np.all(np.isfinite(state)):
        raise NonFiniteState(f"non-finite observation {state}")
    noise = np.asarray(noise, dtype=float).reshape(-1)
    mean = mean_batch(policy, state)[0]
    std = np.exp(policy.log_std)
    action = mean + std * noise
    z = (action - mean) / std
    log_prob = float(-np.sum(policy.log_std) - 0.5 * np.sum(z * z) - 0.5 * len(z) * _LOG_2PI)
    return action, log_prob


def log_prob_batch(policy: PolicyParams, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    mean = mean_batch(policy, obs)
    std = np.exp(policy.log_std)
    z = (np.atleast_2d(actions) - mean) / std
    return -np.sum(policy.log_std) - 0.5 * np.sum(z * z, axis=1) - 0.5 * z.shape[1] * _LOG_2PI


def episode_grad(
    policy: PolicyParams, obs: np.ndarray, actions: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Sum over timesteps of weights[t] * d log pi(a_t|s_t) / d params.

    Returns the gradient over the full trainable vector (theta then log_std).
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    actions = np.atleast_2d(np.asarray(actions, dtype=float))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    std = np.exp(policy.log_std)
    if policy.arch.kind == "linear":
        mean = mean_batch(policy, obs)
        delta = (actions - mean) / (std * std)  # (T, out)
        wd = delta * weights[:, None]
        d_w = wd.T @ obs  # (out, in)
        d_theta = d_w.ravel()
    else:
        w1, b1, w2, b2 = _unpack_mlp(policy.arch, policy.theta)
        z1 = obs @ w1.T + b1
        hidden = np.tanh(z1)
        mean = hidden @ w2.T + b2
        delta = (actions - mean) / (std * std)
        wd = delta * weights[:, None]
        d_w2 = wd.T @ hidden
        d_b2 = wd.sum(axis=0)
        d_hidden = wd @ w2
        d_z1 = d_hidden * (1.0 - hidden * hidden)
        d_w1 = d_z1.T @ obs
        d_b1 = d_z1.sum(axis=0)
        d_theta = np.concatenate([d_w1.ravel(), d_b1, d_w2.ravel(), d_b2])
    z = (actions - mean) / std
    d_log_std = np.sum(weights[:, None] * (z * z - 1.0), axis=0)
    return np.concatenate([d_theta, d_log_std])


def grad_log_prob(policy: PolicyParams, state: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Analytic gradient of log pi(action|state) over the trainable vector."""
    state = np.asarray(state, dtype=float).reshape(1, -1)
    action = np.asarray(action, dtype=float).reshape(1, -1)
    return episode_grad(policy, state, action, np.ones(1))


def reward_to_go(rewards: np.ndarray, discount: float) -> np.ndarray:
    """G_t = sum_{k>=t} discount^(k-t) r_k."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


@dataclass(frozen=True)
class ConvergenceBand:
    """Training stops once the mean eval return stays inside the band."""

    center: float
    half_width: float
    patience: int = 3


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    max_interaction_steps: int
    convergence: ConvergenceBand
    learning_rate: float = 1e-3
    batch_episodes: int = 10
    eval_every: int = 4096
    eval_episodes: int = 8
    # when the band is never reached, hand back the best-evaluated checkpoint
    # instead of wherever the final update happened to land
    keep_best: bool = False


@dataclass
class TrainReport:
    """Outcome of a training run.

    interaction_steps counts environment steps consumed by training episodes;
    evaluation rollouts are not charged.  return_curve holds (step, mean eval
    return) pairs with strictly increasing step indices.
    """

    params: PolicyParams
    interaction_steps: int
    return_curve: tuple[tuple[int, float], ...]
    converged: bool


def train(
    env,
    reward_spec,
    init: PolicyParams,
    cfg: TrainConfig,
    l2sp: tuple[float, np.ndarray] | None = None,
) -> TrainReport:
    """REINFORCE with reward-to-go and a per-timestep batch-mean baseline.

    Plain SGD ascent on the return.  When `l2sp` is given as (coeff, ref),
    the objective gains -coeff * ||params - ref||^2 over the full trainable
    vector, pulling the solution toward the reference parameters.
    """
    from . import envs as _envs  # deferred to avoid an import cycle

    policy = init.copy()
    discount = env.spec.discount
    horizon = env.spec.horizon
    n_theta = policy.theta.size
    steps = 0
    episode_idx = 0
    eval_idx = 0
    next_eval = cfg.eval_every
    curve: list[tuple[int, float]] = []
    streak = 0
    converged = False

    best_mean = -math.inf
    best_params: PolicyParams | None = None

    def record_eval(at_steps: int) -> None:
        nonlocal eval_idx, streak, converged, best_mean, best_params
        mean, _, _ = evaluate(
            env, reward_spec, policy, cfg.eval_episodes, derive_seed(cfg.seed, "eval", eval_idx)
        )
        eval_idx += 1
        curve.append((at_steps, mean))
        if cfg.keep_best and mean > best_mean:
            best_mean = mean
            best_params = policy.copy()
        band = cfg.convergence
        if abs(mean - band.center) <= band.half_width:
            streak += 1
            if streak >= band.patience:
                converged = True
        else:
            streak = 0

    # evaluate before spending any budget: a policy that already sits inside
    # the band must not be perturbed by further updates
    record_eval(0)

    while not converged and steps + horizon <= cfg.max_interaction_steps:
        batch = []
        while len(batch) < cfg.batch_episodes and steps + horizon <= cfg.max_interaction_steps:
            rec = _envs.rollout_record(
                env, policy, reward_spec, derive_seed(cfg.seed, "train-ep", episode_idx)
            )
            episode_idx += 1
            steps += rec.obs.shape[0]
            batch.append(rec)
        if not batch:
            break

        max_t = max(r.obs.shape[0] for r in batch)
        g_pad = np.full((len(batch), max_t), np.nan)
        gs = []
        for i, rec in enumerate(batch):
            g = reward_to_go(rec.rewards, discount)
            gs.append(g)
            g_pad[i, : len(g)] = g
        baseline = np.nanmean(g_pad, axis=0)

        # normalize advantages across the batch; the barrier penalty makes
        # raw returns span 4 orders of magnitude, which plain SGD cannot take
        advs = [g - baseline[: len(g)] for g in gs]
        scale = float(np.std(np.concatenate(advs))) + 1e-8
        grad = np.zeros(n_theta + policy.arch.action_dim)
        for rec, adv in zip(batch, advs):
            grad += episode_grad(policy, rec.obs, rec.actions, adv / scale)
        grad /= len(batch)
        if l2sp is not None:
            coeff, ref = l2sp
            grad -= 2.0 * coeff * (policy.flat() - ref)

        policy.theta = policy.theta + cfg.learning_rate * grad[:n_theta]
        policy.log_std = np.clip(
            policy.log_std + cfg.learning_rate * grad[n_theta:], LOG_STD_MIN, LOG_STD_MAX
        )
        if not (np.all(np.isfinite(policy.theta)) and np.all(np.isfinite(policy.log_std))):
            raise DivergedTraining(f"non-finite parameters after {steps} steps")

        if steps >= next_eval:
            record_eval(steps)
            next_eval = (steps // cfg.eval_every + 1) * cfg.eval_every

    if cfg.keep_best and not converged:
        if curve[-1][0] != steps:
            record_eval(steps)  # let the freshest parameters compete too
        if not converged and best_params is not None:
            policy = best_params

    return TrainReport(policy, steps, tuple(curve), converged)


def evaluate(env, reward_spec, policy: PolicyParams, episodes: int, seed: int):
    """Deterministic evaluation: (mean return, std, class histogram).

    The histogram maps class labels to counts over evaluation rollouts that do
    not collide with the environment's full barrier; colliding rollouts carry
    no class and are left out (episodes minus histogram total = collisions).
    """
    detail = evaluate_detail(env, reward_spec, policy, episodes, seed)
    return detail["mean"], detail["std"], detail["histogram"]


def evaluate_detail(env, reward_spec, policy: PolicyParams, episodes: int, seed: int) -> dict:
    from . import envs as _envs
    from . import homotopy as _homotopy

    returns = []
    labels = []
    collided_full = []
    collided_active = []
    reached = []
    trajs = []
    region = env.class_region()
    a_start, a_goal = env.anchors()
    for e in range(episodes):
        traj, ret, coll = _envs.rollout(
            env, policy, reward_spec, derive_seed(seed, "eval-ep", e)
        )
        returns.append(ret)
        collided_active.append(coll)
        trajs.append(traj)
        reached.append(env.reached_goal(traj))
        if _homotopy.collides(traj, region):
            collided_full.append(True)
            labels.append(None)
        else:
            collided_full.append(False)
            sig = _homotopy.signature(traj, region, a_start, a_goal)
            labels.append(env.class_label(sig.side_bits))
    hist: dict[str, int] = {}
    for lab in labels:
        if lab is not None:
            hist[lab] = hist.get(lab, 0) + 1
    returns_arr = np.array(returns)
    return {
        "mean": float(np.mean(returns_arr)),
        "std": float(np.std(returns_arr)),
        "histogram": dict(sorted(hist.items())),
        "returns": returns_arr,
        "labels": labels,
        "collided_full": collided_full,
        "collided_active": collided_active,
        "reached": reached,
        "trajectories": trajs,
    }


@dataclass(frozen=True)
class GridSpec:
    lo: float = -1.0
    hi: float = 1.3
    bucket: float = 0.1

    def values(self) -> np.ndarray:
        n = int(round((self.hi - self.lo) / self.bucket)) + 1
        return self.lo + self.bucket * np.arange(n)


@dataclass
class LandscapeResult:
    thetas: np.ndarray  # grid coordinate values, shared by both axes
    loss_barrier: np.ndarray  # (n, n), rows index theta1, cols theta2
    loss_free: np.ndarray


def landscape_scan(
    env,
    grid: GridSpec,
    samples_per_cell: int,
    seed: int,
    log_std: float = 0.0,
) -> LandscapeResult:
    """Estimate the REINFORCE loss surface over a 2-parameter linear policy.

    The loss at a grid point is the mean over sampled episodes of
    sum_t G_t * log pi_theta(a_t|s_t) with reward-to-go G.  The surface is
    computed twice, with the barrier penalty on and off; transitions do not
    depend on the reward, so with shared per-cell seeds both grids score the
    exact same trajectories and differ only in reward.
    """
    from . import envs as _envs

    values = grid.values()
    n = len(values)
    arch = Arch("linear", 2, 1)
    out = {
        "barrier": np.zeros((n, n)),
        "free": np.zeros((n, n)),
    }
    specs = {"barrier": _envs.full_reward(env), "free": _envs.relaxed_reward(env)}
    for i, th1 in enumerate(values):
        for j, th2 in enumerate(values):
            policy = PolicyParams(arch, np.array([th1, th2]), np.array([log_std]))
            for key, spec in specs.items():
                total = 0.0
                for e in range(samples_per_cell):
                    rec = _envs.rollout_record(
                        env, policy, spec, derive_seed(seed, "cell", i, j, "ep", e)
                    )
                    g = reward_to_go(rec.rewards, env.spec.discount)
                    lp = log_prob_batch(policy, rec.obs, rec.actions)
                    total += float(np.sum(g * lp))
                out[key][i, j] = total / samples_per_cell
    return LandscapeResult(values, out["barrier"], out["free"])


def segment_profile(
    thetas: np.ndarray, loss: np.ndarray, p0, p1, samples: int = 101
) -> np.ndarray:
    """Bilinear interpolation of a grid surface along the segment p0 -> p1.

    Points are clamped to the grid's coordinate range, so segments reaching
    slightly outside the scanned box read the nearest edge value.
    """
    thetas = np.asarray(thetas, dtype=float)
    loss = np.asarray(loss, dtype=float)
    ts = np.linspace(0.0, 1.0, samples)
    xs = p0[0] + ts * (p1[0] - p0[0])
    ys = p0[1] + ts * (p1[1] - p0[1])
    lo, hi = thetas[0], thetas[-1]
    xs = np.clip(xs, lo, hi)
    ys = np.clip(ys, lo, hi)
    n = len(thetas)
    step = thetas[1] - thetas[0] if n > 1 else 1.0
    fx = np.clip((xs - lo) / step, 0.0, n - 1.0)
    fy = np.clip((ys - lo) / step, 0.0, n - 1.0)
    i0 = np.minimum(fx.astype(int), n - 2) if n > 1 else np.zeros(samples, int)
    j0 = np.minimum(fy.astype(int), n - 2) if n > 1 else np.zeros(samples, int)
    ax = fx - i0
    ay = fy - j0
    i1 = np.minimum(i0 + 1, n - 1)
    j1 = np.minimum(j0 + 1, n - 1)
    return (
        loss[i0, j0] * (1 - ax) * (1 - ay)
        + loss[i1, j0] * ax * (1 - ay)
        + loss[i0, j1] * (1 - ax) * ay
        + loss[i1, j1] * ax * ay
    )


def hump_height(profile: np.ndarray) -> float:
    """How far the interior of a path profile rises above its endpoints."""
    profile = np.asarray(profile, dtype=float)
    return float(profile.max() - max(profile[0], profile[-1]))


CHECKPOINT_VERSION = 1


def save_checkpoint(path, policy: PolicyParams, seed: int) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "arch": {
            "kind": policy.arch.kind,
            "obs_dim": policy.arch.obs_dim,
            "action_dim": policy.arch.action_dim,
            "hidden": policy.arch.hidden,
        },
        "theta": [float(v) for v in policy.theta],
        "log_std": [float(v) for v in policy.log_std],
        "seed": int(seed),
    }
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def load_checkpoint(path) -> tuple[PolicyParams, int]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    arch = Arch(**doc["arch"])
    policy = PolicyParams(arch, np.array(doc["theta"]), np.array(doc["log_std"]))
    return policy, int(doc["seed"])
