"""Alpha-vector sets and the LP-based pruning machinery.

A state value vector assigns a real to every state and carries the first
action of the conditional plan it summarizes; a set of them induces a
piecewise-linear belief-space function as the max of the dot products.
purge_region computes a parsimonious regional covering with Lark's
algorithm: pointwise dominance first, then one witness LP per survivor.
"""

import numpy as np

from .lp import LinearProgram, solve_lp

SENTINEL_ACTION = -1  # tag for interior vectors that never reach a policy

# slack absorbing witness-LP arithmetic noise: margins this close to the
# threshold are treated as ties, so duplicate vectors do not survive purges
MARGIN_TOL = 1e-9


class StateValueVector:
    __slots__ = ("values", "action")

    def __init__(self, values, action=SENTINEL_ACTION):
        v = np.asarray(values, dtype=np.float64)
        self.values = v
        self.action = int(action)

    def __repr__(self):
        return f"StateValueVector({self.values.tolist()}, action={self.action})"


def full_region(num_states):
    return np.arange(num_states)


def _members(region):
    return np.asarray(region, dtype=np.intp)


def stack_values(vectors):
    """(n, S) matrix of the vectors' values; (0, 0) when empty."""
    if not vectors:
        return np.zeros((0, 0))
    return np.vstack([v.values for v in vectors])


def induced_value(vectors, b):
    """max over the set of vector . belief; 0 for the empty set."""
    if not vectors:
        return 0.0
    return float((stack_values(vectors) @ np.asarray(b, dtype=np.float64)).max())


def cross_sum(w, x):
    """All pairwise sums; action tags come from the left operand."""
    return [StateValueVector(wv.values + xv.values, wv.action)
            for wv in w for xv in x]


def uniform_belief(num_states, region):
    members = _members(region)
    b = np.zeros(num_states)
    b[members] = 1.0 / members.size
    return b


def domination_margin(alpha, w, region):
    """max over beliefs in B_region of alpha.b - W(b), with an optimal witness.

    This is the optimum of the witness LP; dominate() thresholds it at eps
    and bellman_residual uses the raw value. For empty w the max is attained
    at the best corner of the region.
    """
    members = _members(region)
    avals = alpha.values[members]
    if not w:
        i = int(np.argmax(avals))
        b = np.zeros(alpha.values.shape[0])
        b[members[i]] = 1.0
        return float(avals[i]), b
    wmat = stack_values(w)[:, members]
    k = members.size
    # variables: x (free), b(s) for s in region
    cons = []
    for row in avals - wmat:
        coeffs = np.concatenate(([-1.0], row))
        cons.append((coeffs, ">=", 0.0))
    cons.append((np.concatenate(([0.0], np.ones(k))), "=", 1.0))
    lower = np.zeros(k + 1)
    lower[0] = -np.inf
    obj = np.zeros(k + 1)
    obj[0] = 1.0
    sol = solve_lp(LinearProgram(obj, cons, lower))
    if sol.status != "optimal":
        # the LP is always feasible and bounded; anything else is numeric
        from .lp import LpNumericalError
        raise LpNumericalError(f"witness LP ended with status {sol.status}")
    b = np.zeros(alpha.values.shape[0])
    bvals = np.maximum(sol.assignment[1:], 0.0)
    b[members] = bvals / bvals.sum()
    return float(sol.optimum), b


def dominate(alpha, w, region, eps=0.0):
    """Witness belief in B_region where alpha beats the set by more than eps.

    Returns None when no such belief exists. For empty w any belief in the
    region qualifies; the uniform one keeps the choice deterministic.
    """
    if not w:
        return uniform_belief(alpha.values.shape[0], region)
    margin, b = domination_margin(alpha, w, region)
    if margin > eps + MARGIN_TOL:
        return b
    return None


def best(b, w, region):
    """Vector of w maximizing the restricted dot product with b.

    Ties break toward the lexicographically largest restriction to the
    region's states in ascending index order; exact duplicates keep their
    first occurrence.
    """
    if not w:
        raise ValueError("best() on an empty vector set")
    members = _members(region)
    bvals = np.asarray(b, dtype=np.float64)[members]
    scores = stack_values(w)[:, members] @ bvals
    top = scores.max()
    tied = [v for v, sc in zip(w, scores) if sc == top]
    return max(tied, key=lambda v: tuple(v.values[members]))


def pointwise_purge(w, region):
    """Minimal subset whose members pointwise-dominate everything in w on region.

    Scan order decides among equally valid minimal subsets: a candidate is
    dropped if a kept vector already dominates it (so exact duplicates keep
    the first copy), and kept vectors dominated by the newcomer are evicted.
    """
    if not w:
        return []
    members = _members(region)
    vals = stack_values(w)[:, members]
    kept_idx = []
    kept_vals = np.empty((0, members.size))
    for i in range(len(w)):
        row = vals[i]
        if kept_idx and np.any(np.all(kept_vals >= row, axis=1)):
            continue
        if kept_idx:
            alive = ~np.all(row >= kept_vals, axis=1)
            if not alive.all():
                kept_idx = [k for k, a in zip(kept_idx, alive) if a]
                kept_vals = kept_vals[alive]
        kept_idx.append(i)
        kept_vals = np.vstack([kept_vals, row])
    return [w[i] for i in kept_idx]


def purge_region(w, region):
    """Parsimonious covering of w in the region (Lark's algorithm).

    Pointwise-dominated vectors go first; each survivor then either produces
    a witness belief, in which case the best vector at that witness moves to
    the output, or is discarded. The candidate bookkeeping below is just a
    flat-array version of best() over the not-yet-processed vectors.
    """
    cands = pointwise_purge(w, region)
    if len(cands) <= 1:
        # dominate() on an empty output set returns a belief unconditionally,
        # so a lone survivor is always kept
        return cands
    members = _members(region)
    vals = stack_values(cands)[:, members]
    active = np.ones(len(cands), dtype=bool)
    nact = len(cands)
    head = 0
    out = []
    while nact:
        while not active[head]:
            head += 1
        alpha = cands[head]
        b = dominate(alpha, out, region, 0.0)
        if b is None:
            active[head] = False
            nact -= 1
            continue
        scores = vals @ b[members]
        scores[~active] = -np.inf
        tie = np.flatnonzero(scores == scores.max())
        pick = int(tie[0])
        for j in tie[1:]:
            if tuple(vals[j]) > tuple(vals[pick]):
                pick = int(j)
        active[pick] = False
        nact -= 1
        out.append(cands[pick])
    return out


def purge(w, num_states=None):
    """Parsimonious covering over the full state space."""
    if num_states is None:
        if not w:
            return []
        num_states = w[0].values.shape[0]
    return purge_region(w, full_region(num_states))
