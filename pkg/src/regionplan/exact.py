"""Exact value iteration via incremental pruning, plus brute-force oracles.

dp_update is the production path: per-action Q-sets, pruning after every
cross sum, one final purge over the action union. exhaustive_update
(Monahan-style enumeration) and the policy-tree evaluator exist so tests
can check the production path against code that shares none of its pruning
logic.
"""

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .model import joint_matrix
from .pruning import (StateValueVector, SENTINEL_ACTION, cross_sum,
                      domination_margin, full_region, purge, purge_region,
                      stack_values)


class IterationCapError(RuntimeError):
    pass


@dataclass
class SolveReport:
    vectors: list
    iterations: int
    residual: float
    loss_bound: float
    set_sizes: list = field(default_factory=list)
    iteration_seconds: list = field(default_factory=list)


def q_set(model, prev, a, o):
    """Back-projected vector set for one (action, observation) pair.

    Maps each alpha of the previous covering to
    s -> discount * sum_s1 alpha(s1) P(s1, o | s, a).
    """
    P = joint_matrix(model, a, o)
    mat = stack_values(prev)
    if mat.size == 0:
        return []
    back = model.discount * (P @ mat.T).T
    return [StateValueVector(row, SENTINEL_ACTION) for row in back]


def incr_pruning(sets, region):
    """Fold a list of vector sets with a purge after every cross sum.

    Cross-summing a single vector onto a parsimonious set keeps it
    parsimonious, so those purges are skipped; they would return their
    input unchanged.
    """
    if not sets:
        raise ValueError("incr_pruning needs at least one vector set")
    # a one-vector set is parsimonious in any region already
    w = sets[0] if len(sets[0]) == 1 else purge_region(sets[0], region)
    for s_i in sets[1:]:
        if len(s_i) == 1:
            w = cross_sum(w, s_i)
        else:
            w = purge_region(cross_sum(w, s_i), region)
    return w


def dp_update(model, prev):
    """One dynamic-programming update of a parsimonious covering."""
    region = full_region(model.num_states)
    combined = []
    for a in range(model.num_actions):
        qs = [q_set(model, prev, a, o) for o in range(model.num_observations)]
        w_a = incr_pruning(qs, region)
        rvec = [StateValueVector(model.reward[:, a], a)]
        combined.extend(cross_sum(rvec, w_a))
    return purge_region(combined, region)


def exhaustive_candidates(model, prev, cap=2_000_000):
    """Every vector of the unpruned update, one per (action, obs -> alpha) choice."""
    n = len(prev)
    no = model.num_observations
    count = model.num_actions * n ** no
    if count > cap:
        raise IterationCapError(
            f"exhaustive enumeration of {count} candidates exceeds cap {cap}")
    out = []
    for a in range(model.num_actions):
        qmats = [stack_values(q_set(model, prev, a, o)) for o in range(no)]
        idx = np.zeros(no, dtype=int)
        while True:
            vec = model.reward[:, a].copy()
            for o in range(no):
                vec += qmats[o][idx[o]]
            out.append(StateValueVector(vec, a))
            pos = no - 1
            while pos >= 0:
                idx[pos] += 1
                if idx[pos] < n:
                    break
                idx[pos] = 0
                pos -= 1
            if pos < 0:
                break
    return out


def exhaustive_update(model, prev, cap=2_000_000):
    """Monahan-style oracle: enumerate all candidates, purge once."""
    return purge(exhaustive_candidates(model, prev, cap), model.num_states)


def policy_tree_value(model, tree, s):
    """Expected discounted reward of following a policy tree from state s.

    A tree is (action, children) with children either None for the last
    step or a tuple of subtrees indexed by observation.
    """
    a, children = tree
    v = model.reward[s, a]
    if children is None:
        return float(v)
    for o in range(model.num_observations):
        sub = np.array([policy_tree_value(model, children[o], s1)
                        for s1 in range(model.num_states)])
        v += model.discount * float(
            sub @ (model.transition[a, s] * model.observation[a, s, :, o]))
    return float(v)


def enumerate_policy_trees(model, depth):
    """All policy trees of the given depth, paired with their value vectors.

    Values are built bottom-up so the per-tree work is a single
    back-projection; the recursive policy_tree_value stays the slow
    reference definition.
    """
    if depth < 1:
        raise ValueError("policy trees have depth >= 1")
    na, no = model.num_actions, model.num_observations
    level = [((a, None), model.reward[:, a].copy()) for a in range(na)]
    mats = [[joint_matrix(model, a, o) for o in range(no)] for a in range(na)]
    for _ in range(depth - 1):
        nxt = []
        for a in range(na):
            for choice in itertools.product(range(len(level)), repeat=no):
                vec = model.reward[:, a].copy()
                for o in range(no):
                    vec += model.discount * (mats[a][o] @ level[choice[o]][1])
                tree = (a, tuple(level[c][0] for c in choice))
                nxt.append((tree, vec))
        level = nxt
    return level


def bellman_residual(curr, prev):
    """max over beliefs of |curr(b) - prev(b)|, certified by witness LPs."""
    region = full_region(curr[0].values.shape[0] if curr
                         else prev[0].values.shape[0])
    gap = 0.0
    for alpha in curr:
        m, _ = domination_margin(alpha, prev, region)
        gap = max(gap, m)
    for alpha in prev:
        m, _ = domination_margin(alpha, curr, region)
        gap = max(gap, m)
    return gap


def solve_pomdp(model, eps, max_iterations=10000):
    """Value iteration to a Bellman residual of at most eps."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    ns = model.num_states
    prev = [StateValueVector(np.zeros(ns), SENTINEL_ACTION)]
    sizes = []
    seconds = []
    for t in range(1, max_iterations + 1):
        t0 = time.perf_counter()
        curr = dp_update(model, prev)
        residual = bellman_residual(curr, prev)
        seconds.append(time.perf_counter() - t0)
        sizes.append(len(curr))
        if residual <= eps:
            g = model.discount
            return SolveReport(vectors=curr, iterations=t, residual=residual,
                               loss_bound=2.0 * residual * g / (1.0 - g),
                               set_sizes=sizes, iteration_seconds=seconds)
        prev = curr
    raise IterationCapError(
        f"no convergence to residual {eps} within {max_iterations} updates")


def greedy_action(model, sol, b):
    """One-step lookahead action against a solved vector set.

    Observations that cannot occur under (b, a) are skipped; their weight in
    the expectation is zero and the posterior is undefined. Ties go to the
    lowest action index.
    """
    b = np.asarray(b, dtype=np.float64)
    smat = stack_values(sol)
    vals = np.empty(model.num_actions)
    for a in range(model.num_actions):
        total = float(b @ model.reward[:, a])
        for o in range(model.num_observations):
            unnorm = b @ joint_matrix(model, a, o)
            mass = unnorm.sum()
            if mass <= 0.0:
                continue
            if smat.size:
                # induced value is positively homogeneous, so the posterior
                # never needs normalizing: mass * V(u / mass) = max alpha.u
                total += model.discount * float((smat @ unnorm).max())
        vals[a] = total
    return int(np.argmax(vals))
