"""Paired policy evaluation: seeded trials in the base world and in the
region-observable world.

Every trial index owns counter-based random streams (transition,
observation, start state), shared verbatim between its base-world and
oracle-world runs: with a full-region system the two runs then produce
identical trajectories, and in general the reward difference is a
common-random-numbers estimate of the oracle's value added.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import belief_update, point_belief
from .regions import approx_action

_SUB_TRANSITION, _SUB_OBSERVATION, _SUB_START = range(3)


@dataclass
class TrialConfig:
    goal_states: frozenset
    declare_action: int
    max_steps: int = 100
    seed: int = 0
    start_dist: np.ndarray = None  # None means uniform

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        self.goal_states = frozenset(int(s) for s in self.goal_states)
        if self.start_dist is not None:
            p = np.asarray(self.start_dist, dtype=np.float64)
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("start_dist is not a distribution")
            self.start_dist = p


@dataclass
class TrialResult:
    start_state: int
    steps: int
    declared: bool
    reward: float


@dataclass
class CampaignStats:
    trials: int
    mean_m: float
    mean_m_prime: float
    difference: float
    stderr_m: float
    stderr_m_prime: float


def _stream(seed, trial, sub):
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(trial * 4 + sub)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sample(rng, probs):
    """Inverse-CDF draw; identical uniforms on identical rows give
    identical samples, which the paired-trial invariants rely on."""
    u = rng.random()
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def _draw_start(cfg, trial, num_states):
    rng = _stream(cfg.seed, trial, _SUB_START)
    p = cfg.start_dist
    if p is None:
        p = np.full(num_states, 1.0 / num_states)
    return _sample(rng, p)


def run_trial_m(model, rop, sets, cfg, start, trial=0):
    """One trial in the base world: the agent sees only its own observations
    and follows the approximate policy from an informed initial belief."""
    trans = _stream(cfg.seed, trial, _SUB_TRANSITION)
    obs = _stream(cfg.seed, trial, _SUB_OBSERVATION)
    s = int(start)
    belief = point_belief(model.num_states, s)
    n = 0
    while True:
        a = approx_action(rop, sets, belief)
        if a == cfg.declare_action:
            reward = model.discount ** n if s in cfg.goal_states else 0.0
            return TrialResult(start_state=int(start), steps=n,
                               declared=True, reward=reward)
        if n == cfg.max_steps:
            return TrialResult(start_state=int(start), steps=n,
                               declared=False, reward=0.0)
        s1 = _sample(trans, model.transition[a, s])
        o = _sample(obs, model.observation[a, s, s1])
        belief = belief_update(model, belief, a, o)
        s = s1
        n += 1


def run_trial_m_prime(rop, sets, cfg, start, trial=0):
    """One trial in the region-observable world: the same sampled dynamics,
    but each observation is paired with the oracle's region and the belief
    follows the transformed kernel."""
    model = rop.base
    trans = _stream(cfg.seed, trial, _SUB_TRANSITION)
    obs = _stream(cfg.seed, trial, _SUB_OBSERVATION)
    s = int(start)
    belief = point_belief(model.num_states, s)
    n = 0
    while True:
        a = approx_action(rop, sets, belief)
        if a == cfg.declare_action:
            reward = model.discount ** n if s in cfg.goal_states else 0.0
            return TrialResult(start_state=int(start), steps=n,
                               declared=True, reward=reward)
        if n == cfg.max_steps:
            return TrialResult(start_state=int(start), steps=n,
                               declared=False, reward=0.0)
        s1 = _sample(trans, model.transition[a, s])
        o = _sample(obs, model.observation[a, s, s1])
        region = rop.oracle_region(s1, o, s, a)
        belief = rop.transformed_belief_update(belief, a, (o, region))
        s = s1
        n += 1


def run_campaign(model, rop, sets, cfg, n_trials, jobs=1):
    """n_trials paired trials; returns (stats, base results, oracle results).

    Start states and random streams are shared within each pair, and
    aggregation runs in trial order, so results are bit-reproducible for a
    given seed regardless of the worker count.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")

    def one(i):
        start = _draw_start(cfg, i, model.num_states)
        rm = run_trial_m(model, rop, sets, cfg, start, trial=i)
        rp = run_trial_m_prime(rop, sets, cfg, start, trial=i)
        return rm, rp

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            paired = list(pool.map(one, range(n_trials)))
    else:
        paired = [one(i) for i in range(n_trials)]
    results_m = [p[0] for p in paired]
    results_p = [p[1] for p in paired]
    rm = np.array([r.reward for r in results_m])
    rp = np.array([r.reward for r in results_p])
    stats = CampaignStats(
        trials=n_trials,
        mean_m=float(rm.mean()),
        mean_m_prime=float(rp.mean()),
        difference=float(rp.mean()) - float(rm.mean()),
        stderr_m=float(rm.std(ddof=1) / np.sqrt(n_trials)) if n_trials > 1 else 0.0,
        stderr_m_prime=float(rp.std(ddof=1) / np.sqrt(n_trials)) if n_trials > 1 else 0.0,
    )
    return stats, results_m, results_p


def campaign_csv(stats, results_m, results_p):
    """Per-trial rows for both worlds plus one summary row."""
    lines = ["trial,world,start_state,steps,declared,reward"]
    for i, (rm, rp) in enumerate(zip(results_m, results_p)):
        for world, r in (("M", rm), ("Mprime", rp)):
            lines.append(f"{i},{world},{r.start_state},{r.steps},"
                         f"{int(r.declared)},{r.reward!r}")
    lines.append(f"summary,difference,,,,{stats.difference!r}")
    return "\n".join(lines) + "\n"
