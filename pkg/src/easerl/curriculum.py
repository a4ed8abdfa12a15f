"""Relax-then-curriculum transfer across homotopy classes.

The transfer recipe: train a relaxed policy (barrier penalty off) from the
source policy, then re-introduce the penalty along a validated schedule,
warm-starting every stage from the previous one.  Schedules either ramp the
penalty weight alpha up to 1 or grow a nested family of barrier subsets up to
the full barrier.  The starting subset can be found automatically by
bisecting the barrier until a piece separates the source and relaxed
trajectories, then inflating it until it touches the relaxed trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envs import RewardSpec, full_reward, mean_rollout, relaxed_reward
from .errors import BudgetExhausted, PreconditionViolated
from .geometry import (
    ConvexPolygon,
    IntervalSet,
    Point2,
    RegionSet,
    bisect,
    contains,
    dilate,
    intersect_clip,
)
from .homotopy import Trajectory, collides, divides
from .rl import (
    ConvergenceBand,
    PolicyParams,
    TrainConfig,
    TrainReport,
    evaluate,
    evaluate_detail,
    init_policy,
    train,
)
from .seeding import derive_seed

PROBE_N = 200


@dataclass(frozen=True)
class CurriculumSchedule:
    """Either a strictly increasing alpha ramp ending at 1, or a nested
    subset family ending at the full barrier."""

    mode: str  # "reward_weight" | "barrier_set"
    alphas: tuple[float, ...] = ()
    subsets: tuple = ()  # RegionSet | IntervalSet per stage

    def __post_init__(self):
        if self.mode not in ("reward_weight", "barrier_set"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "reward_weight" and not self.alphas:
            raise ValueError("reward_weight schedule needs alphas")
        if self.mode == "barrier_set" and not self.subsets:
            raise ValueError("barrier_set schedule needs subsets")

    def stages(self) -> int:
        return len(self.alphas) if self.mode == "reward_weight" else len(self.subsets)

    def reward_spec(self, k: int) -> RewardSpec:
        if self.mode == "reward_weight":
            return RewardSpec("reward_weight", alpha=self.alphas[k])
        return RewardSpec("barrier_set", active=self.subsets[k])


def _region_probe_points(barrier: RegionSet, n: int) -> list[tuple[float, float]]:
    x0, y0, x1, y1 = barrier.bbox()
    mx = 0.05 * max(x1 - x0, y1 - y0, 1.0)
    xs = np.linspace(x0 - mx, x1 + mx, n)
    ys = np.linspace(y0 - mx, y1 + mx, n)
    return [(float(x), float(y)) for x in xs for y in ys]


def _member_mask(region, pts) -> np.ndarray:
    if isinstance(region, IntervalSet):
        return np.array([region.contains_value(v) for v in pts])
    return np.array([contains(region, Point2(x, y)) for x, y in pts])


def validate_schedule(schedule: CurriculumSchedule, barrier, probe_n: int = PROBE_N) -> None:
    """Check the schedule's defining inequalities before any training runs.

    Alpha ramps must be strictly increasing in (0, 1] and end at exactly 1.
    Subset families must be nested and end at the full barrier; both checks
    run pointwise on a probe grid over the barrier's bounding box.
    """
    if schedule.mode == "reward_weight":
        prev = 0.0
        for a in schedule.alphas:
            if not (prev < a <= 1.0):
                raise PreconditionViolated(
                    f"alphas must satisfy 0 < a_1 < ... < a_K = 1, got {schedule.alphas}"
                )
            prev = a
        if schedule.alphas[-1] != 1.0:
            raise PreconditionViolated("final alpha must equal 1")
        return

    if isinstance(barrier, IntervalSet):
        if len(barrier.intervals) != 1:
            raise PreconditionViolated("barrier-set schedules need a single connected barrier")
        lo = min(i[0] for i in barrier.intervals)
        hi = max(i[1] for i in barrier.intervals)
        m = 0.05 * (hi - lo)
        pts = list(np.linspace(lo - m, hi + m, probe_n))
    else:
        if len(barrier.parts) != 1:
            raise PreconditionViolated("barrier-set schedules need a single connected barrier")
        pts = _region_probe_points(barrier, probe_n)

    masks = [_member_mask(s, pts) for s in schedule.subsets]
    for k in range(len(masks) - 1):
        if np.any(masks[k] & ~masks[k + 1]):
            raise PreconditionViolated(f"subset {k} is not contained in subset {k + 1}")
    full = _member_mask(barrier, pts)
    if np.any(masks[-1] != full):
        raise PreconditionViolated("final subset must equal the full barrier")


@dataclass(frozen=True)
class FindSb1Config:
    max_halvings: int = 12
    max_inflations: int = 20
    inflate_radius: float = 0.25


@dataclass(frozen=True)
class FindSb1Result:
    region: RegionSet
    halvings: int
    inflations: int


def find_sb1(
    xi_s: Trajectory,
    xi_relax: Trajectory,
    barrier: RegionSet,
    cfg: FindSb1Config,
    anchor_start: Point2,
    anchor_goal: Point2,
) -> FindSb1Result:
    """Find a starting barrier subset that separates the two trajectories.

    Halve the barrier, at each cut preferring a half whose crossing parities
    already divide xi_s from xi_relax (whether or not xi_relax touches it),
    otherwise descending into a half xi_relax passes through.  Afterwards
    inflate the chosen subset inside the barrier until it touches xi_relax.
    Postconditions (divides and touches) are asserted on every return.
    """
    if len(barrier.parts) != 1:
        raise PreconditionViolated("subset search needs a single connected barrier part")
    if collides(xi_s, barrier):
        raise PreconditionViolated("source trajectory must avoid the barrier")
    if not collides(xi_relax, barrier):
        raise PreconditionViolated("relaxed trajectory must pass through the barrier")

    def as_region(p: ConvexPolygon) -> RegionSet:
        return RegionSet((p,), barrier.penalty)

    def f1(region: RegionSet) -> bool:
        return collides(xi_relax, region)

    def f2(region: RegionSet) -> bool:
        return divides(xi_s, xi_relax, region, anchor_start, anchor_goal)

    part = barrier.parts[0]
    cur = part
    halvings = 0
    found = False
    while halvings < cfg.max_halvings:
        h1, h2 = bisect(cur)
        halvings += 1
        # try the divide test on both halves before descending: a dividing
        # half may sit entirely between the trajectories (inflation brings it
        # into contact later), and descending past it loses it for good
        if f2(as_region(h1)):
            cur = h1
            found = True
            break
        if f2(as_region(h2)):
            cur = h2
            found = True
            break
        if f1(as_region(h1)):
            cur = h1
            continue
        if f1(as_region(h2)):
            cur = h2
            continue
        raise BudgetExhausted(
            "neither half touches the relaxed trajectory nor divides the pair"
        )
    if not found:
        raise BudgetExhausted(f"no dividing subset within {cfg.max_halvings} halvings")

    inflations = 0
    while not f1(as_region(cur)):
        if inflations >= cfg.max_inflations:
            raise BudgetExhausted(
                f"subset still does not touch the relaxed trajectory after "
                f"{cfg.max_inflations} inflations"
            )
        grown = intersect_clip(dilate(as_region(cur), cfg.inflate_radius), part)
        cur = grown.parts[0]
        inflations += 1

    result = as_region(cur)
    assert f2(result), "returned subset must divide the trajectories"
    assert f1(result), "returned subset must touch the relaxed trajectory"
    return FindSb1Result(result, halvings, inflations)


def auto_barrier_schedule(
    sb1: RegionSet, barrier: RegionSet, stages: int = 3, probe_n: int = 64
) -> CurriculumSchedule:
    """Nested subsets from sb1 to the full barrier by dilate-and-clip."""
    if stages < 1:
        raise ValueError("need at least one stage")
    part = barrier.parts[0]
    pts = _region_probe_points(barrier, probe_n)
    inner = sb1.parts[0]
    reach = 0.0
    for x, y in pts:
        if part.contains_point(x, y):
            reach = max(reach, inner.distance_to_point(x, y))
    subsets: list[RegionSet] = []
    for k in range(1, stages):
        r = reach * k / stages
        subsets.append(intersect_clip(dilate(sb1, r), part) if r > 0 else sb1)
    subsets.append(barrier)
    return CurriculumSchedule("barrier_set", subsets=tuple(subsets))


@dataclass(frozen=True)
class StageBudgets:
    """budget/(K+1) per stage (relax included), remainder to the final stage."""

    relax: int
    stages: tuple[int, ...]

    @staticmethod
    def split(budget: int, n_stages: int) -> "StageBudgets":
        chunks = n_stages + 1
        base = budget // chunks
        rem = budget - base * chunks
        stage_list = [base] * n_stages
        if n_stages:
            stage_list[-1] += rem
        return StageBudgets(base, tuple(stage_list))


@dataclass
class TransferJob:
    """Everything one transfer run needs besides the method name."""

    env: object
    source: PolicyParams | None
    seed: int
    budget: int
    schedule: CurriculumSchedule | None
    relax_band: ConvergenceBand
    stage_band: ConvergenceBand
    final_band: ConvergenceBand
    learning_rate: float = 1e-3
    batch_episodes: int = 10
    eval_every: int = 4096
    eval_episodes: int = 8
    l2sp_coeff: float = 0.01
    find_cfg: FindSb1Config = field(default_factory=FindSb1Config)
    auto_stages: int = 3
    final_eval_episodes: int = 32
    log_std_init: float = -0.7

    def train_cfg(
        self, label: str, budget: int, band: ConvergenceBand, keep_best: bool = False
    ) -> TrainConfig:
        return TrainConfig(
            seed=derive_seed(self.seed, label),
            max_interaction_steps=budget,
            convergence=band,
            learning_rate=self.learning_rate,
            batch_episodes=self.batch_episodes,
            eval_every=self.eval_every,
            eval_episodes=self.eval_episodes,
            keep_best=keep_best,
        )


@dataclass
class TransferReport:
    method: str
    env_name: str
    seed: int
    total_steps: int
    converged: bool
    stage_steps: tuple[int, ...]
    final_return: float
    final_label: str
    # plotting/analysis artifacts, not part of the CSV row
    curve: tuple = ()  # ((cumulative step, mean eval return), ...)
    stage_trajectories: tuple = ()  # ((stage label, Trajectory), ...)
    stage_policies: tuple = ()  # ((stage label, PolicyParams), ...)
    final_policy: PolicyParams | None = None

    def csv_row(self) -> list:
        return [
            self.method,
            self.env_name,
            self.seed,
            self.total_steps,
            int(self.converged),
            ";".join(str(s) for s in self.stage_steps),
            repr(self.final_return),
            self.final_label,
        ]


CSV_HEADER = [
    "method",
    "env",
    "seed",
    "total_steps",
    "converged",
    "stage_steps",
    "final_return",
    "final_label",
]


def relax_stage(job: TransferJob, budget: int) -> TrainReport:
    """Train from the source policy with the barrier penalty removed."""
    if job.source is None:
        raise PreconditionViolated("relax stage needs a source policy")
    cfg = job.train_cfg("relax", budget, job.relax_band)
    return train(job.env, relaxed_reward(job.env), job.source, cfg)


def relax_until_crossing(
    job: TransferJob, budget: int, chunk_steps: int = 8192
) -> TrainReport:
    """Relax-stage variant whose stopping rule also demands a crossing.

    The relaxed optimum is nearly flat between through and around paths, so
    plain band convergence can stop while the mean trajectory still skirts
    the barrier, leaving the subset search without the through trajectory it
    needs.  Train in chunks instead and stop at the first checkpoint whose
    evaluation mean is inside the band and whose mean path crosses the
    barrier.  Reports converged only when such a checkpoint was found.
    """
    if job.source is None:
        raise PreconditionViolated("relax stage needs a source policy")
    spec = relaxed_reward(job.env)
    policy = job.source
    steps = 0
    curve: list[tuple[int, float]] = []
    crossed = False
    chunk = 0
    while steps < budget:
        chunk_budget = min(chunk_steps, budget - steps)
        cfg = TrainConfig(
            seed=derive_seed(job.seed, "relax", chunk),
            max_interaction_steps=chunk_budget,
            convergence=ConvergenceBand(math.inf, 1.0, 1),
            learning_rate=job.learning_rate,
            batch_episodes=job.batch_episodes,
            eval_every=chunk_budget + 1,
            eval_episodes=job.eval_episodes,
        )
        report = train(job.env, spec, policy, cfg)
        if report.interaction_steps == 0:
            break  # remaining budget is smaller than one batch
        policy = report.params
        steps += report.interaction_steps
        mean, _, _ = evaluate(
            job.env, spec, policy, job.eval_episodes, derive_seed(job.seed, "relax-eval", chunk)
        )
        curve.append((steps, mean))
        chunk += 1
        in_band = abs(mean - job.relax_band.center) <= job.relax_band.half_width
        if in_band and collides(mean_rollout(job.env, policy, spec), job.env.barrier):
            crossed = True
            break
    return TrainReport(policy, steps, tuple(curve), crossed)


def run_curriculum(
    job: TransferJob, schedule: CurriculumSchedule, start: PolicyParams, budgets: tuple[int, ...]
) -> tuple[list[TrainReport], PolicyParams]:
    """Train stage k from stage k-1's policy until its band is reached.

    A stage that exhausts its budget slice hands its best-evaluated
    checkpoint to the next stage (the overall run then counts as not
    converged); aborting instead would discard the remaining stages of an
    otherwise well-defined schedule.
    """
    validate_schedule(schedule, job.env.barrier)
    reports: list[TrainReport] = []
    policy = start
    n = schedule.stages()
    for k in range(n):
        band = job.final_band if k == n - 1 else job.stage_band
        cfg = job.train_cfg(f"stage-{k}", budgets[k], band, keep_best=True)
        report = train(job.env, schedule.reward_spec(k), policy, cfg)
        reports.append(report)
        policy = report.params
    return reports, policy


def _accumulate_curve(reports) -> tuple:
    curve = []
    offset = 0
    for r in reports:
        curve.extend((offset + s, v) for s, v in r.return_curve)
        offset += r.interaction_steps
    return tuple(curve)


def _stage_snapshots(job: TransferJob, labeled_reports) -> tuple:
    spec = relaxed_reward(job.env)
    return tuple(
        (label, mean_rollout(job.env, r.params, spec)) for label, r in labeled_reports
    )


def _final_summary(job: TransferJob, policy: PolicyParams) -> tuple[float, str]:
    detail = evaluate_detail(
        job.env,
        full_reward(job.env),
        policy,
        job.final_eval_episodes,
        derive_seed(job.seed, "final-eval"),
    )
    hist = detail["histogram"]
    label = max(sorted(hist), key=lambda k: hist[k]) if hist else ""
    return detail["mean"], label


def ease_in_ease_out(job: TransferJob, mode: str = "reward_weight") -> TransferReport:
    """Relax stage, then the curriculum; failure of any stage fails the run."""
    schedule = job.schedule
    if schedule is not None and schedule.mode != mode:
        raise PreconditionViolated(
            f"schedule mode {schedule.mode!r} does not match requested {mode!r}"
        )
    if schedule is None and mode == "reward_weight":
        raise PreconditionViolated("reward-weight transfer needs an explicit alpha schedule")
    if mode == "barrier_set" and not isinstance(job.env.barrier, RegionSet):
        raise PreconditionViolated("barrier-set transfer needs a polygonal barrier")
    if mode == "barrier_set" and len(job.env.barrier.parts) != 1:
        raise PreconditionViolated("barrier-set transfer needs a single connected barrier")

    n_stages = schedule.stages() if schedule is not None else job.auto_stages
    budgets = StageBudgets.split(job.budget, n_stages)
    method = "ease_reward" if mode == "reward_weight" else "ease_barrier"

    if schedule is None:
        # the subset search needs a relaxed trajectory that actually crosses
        relax_report = relax_until_crossing(job, budgets.relax)
    else:
        relax_report = relax_stage(job, budgets.relax)
    labeled = [("relax", relax_report)]
    policy = relax_report.params
    converged = relax_report.converged

    if converged:
        if schedule is None:
            xi_s = mean_rollout(job.env, job.source, relaxed_reward(job.env))
            xi_relax = mean_rollout(job.env, policy, relaxed_reward(job.env))
            a_start, a_goal = job.env.anchors()
            sb1 = find_sb1(xi_s, xi_relax, job.env.barrier, job.find_cfg, a_start, a_goal)
            schedule = auto_barrier_schedule(sb1.region, job.env.barrier, job.auto_stages)
        reports, policy = run_curriculum(job, schedule, policy, budgets.stages)
        converged = all(r.converged for r in reports)
        labeled += [(f"stage-{k}", r) for k, r in enumerate(reports)]

    steps = tuple(r.interaction_steps for _, r in labeled)
    ret, label = _final_summary(job, policy)
    return TransferReport(
        method,
        job.env.name,
        job.seed,
        sum(steps),
        converged,
        steps,
        ret,
        label,
        curve=_accumulate_curve([r for _, r in labeled]),
        stage_trajectories=_stage_snapshots(job, labeled),
        stage_policies=tuple((label, r.params) for label, r in labeled),
        final_policy=policy,
    )


def baseline_transfer(job: TransferJob, method: str) -> TransferReport:
    """naive / l2sp fine-tuning from the source policy, or training from a
    fresh random initialization, all under the final target reward."""
    if method not in ("naive", "l2sp", "random"):
        raise ValueError(f"unknown baseline {method!r}")
    if method == "random":
        init = init_policy(job.source.arch, derive_seed(job.seed, "random-init"),
                           log_std_init=job.log_std_init)
        l2sp = None
    else:
        if job.source is None:
            raise PreconditionViolated(f"{method} needs a source policy")
        init = job.source
        l2sp = (job.l2sp_coeff, job.source.flat()) if method == "l2sp" else None
    cfg = job.train_cfg(method, job.budget, job.final_band)
    report = train(job.env, full_reward(job.env), init, cfg, l2sp=l2sp)
    ret, label = _final_summary(job, report.params)
    labeled = [("final", report)]
    return TransferReport(
        method,
        job.env.name,
        job.seed,
        report.interaction_steps,
        report.converged,
        (report.interaction_steps,),
        ret,
        label,
        curve=_accumulate_curve([report]),
        stage_trajectories=_stage_snapshots(job, labeled),
        stage_policies=tuple((label, r.params) for label, r in labeled),
        final_policy=report.params,
    )


def run_transfer(job: TransferJob, method: str) -> TransferReport:
    """Dispatch one (method, job) run."""
    if method == "ease_reward":
        return ease_in_ease_out(job, "reward_weight")
    if method == "ease_barrier":
        return ease_in_ease_out(job, "barrier_set")
    return baseline_transfer(job, method)
