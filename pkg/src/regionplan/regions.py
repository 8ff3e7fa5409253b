"""Region systems, the region-observable transformed model, and its solver.

The transformed model replaces observations o by pairs z = (o, R): alongside
its own sensor reading the agent hears, from an oracle who knows the true
state, a region containing that state. The oracle picks, among containing
regions, the one best supported by the joint next-state/observation
probability from the previous step, earliest in system order on ties. All
oracle choices and the per-(action, region) feasible-observation sets depend
only on the model, so they are computed once and cached.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exact import IterationCapError, incr_pruning
from .model import Pomdp, ZeroProbabilityObservationError
from .pruning import (StateValueVector, SENTINEL_ACTION, cross_sum, dominate,
                      purge_region, stack_values)


class RegionSystemError(ValueError):
    pass


class RegionSystem:
    """Ordered cover of the state space; no region contains another.

    The list order is the predetermined ordering that breaks oracle ties.
    """

    def __init__(self, regions, num_states):
        self.num_states = int(num_states)
        self.regions = [tuple(sorted({int(s) for s in r})) for r in regions]
        if not self.regions:
            raise RegionSystemError("region system is empty")
        covered = set()
        for i, r in enumerate(self.regions):
            if not r:
                raise RegionSystemError(f"region {i} is empty")
            if r[0] < 0 or r[-1] >= self.num_states:
                raise RegionSystemError(f"region {i} has out-of-range states")
            covered.update(r)
        if covered != set(range(self.num_states)):
            missing = sorted(set(range(self.num_states)) - covered)
            raise RegionSystemError(f"states {missing} not covered by any region")
        sets = [frozenset(r) for r in self.regions]
        for i, ri in enumerate(sets):
            for j, rj in enumerate(sets):
                if i != j and ri <= rj:
                    raise RegionSystemError(
                        f"region {i} {self.regions[i]} is a subset of "
                        f"region {j} {self.regions[j]}")
        self._containing = [[] for _ in range(self.num_states)]
        for i, r in enumerate(self.regions):
            for s in r:
                self._containing[s].append(i)
        self._containing = [np.array(c, dtype=np.intp) for c in self._containing]

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    def __getitem__(self, i):
        return self.regions[i]

    def containing(self, s):
        """Indices of the regions containing state s, in system order."""
        return self._containing[s]

    def index_of(self, region):
        key = tuple(sorted({int(s) for s in region}))
        try:
            return self.regions.index(key)
        except ValueError:
            return None


def ideal_step(model):
    """Boolean (S, S) relation: s1 is an argmax next state of some action at s."""
    T = model.transition
    rel = np.zeros((model.num_states, model.num_states), dtype=bool)
    for a in range(model.num_actions):
        rowmax = T[a].max(axis=1)
        rel |= T[a] == rowmax[:, None]
    return rel


def radius_k_regions(model, k):
    """Radius-k region system: per-state ideal-reachability balls, then
    subset regions removed in ascending center order (first copy of equal
    balls survives)."""
    if k < 0:
        raise ValueError("radius must be non-negative")
    ns = model.num_states
    step = ideal_step(model).astype(np.int64)
    reach = np.eye(ns, dtype=np.int64)
    for _ in range(k):
        reach = ((reach + reach @ step) > 0).astype(np.int64)
    balls = [frozenset(np.flatnonzero(reach[s]).tolist()) for s in range(ns)]
    alive = [True] * ns
    for i in range(ns):
        for j in range(ns):
            if j == i or not alive[j]:
                continue
            if balls[i] < balls[j] or (balls[i] == balls[j] and j < i):
                alive[i] = False
                break
    kept = [sorted(balls[i]) for i in range(ns) if alive[i]]
    return RegionSystem(kept, ns)


def degree_of_support(f, region):
    """Fraction of a non-negative state function's mass inside the region."""
    f = np.asarray(f, dtype=np.float64)
    total = f.sum()
    if total <= 0.0:
        raise ValueError("degree of support of a zero-mass function is undefined")
    members = np.asarray(region, dtype=np.intp)
    return float(f[members].sum() / total)


class _ZGroup:
    """Feasible observations of one (action, region) pair that share a
    reported region, with their joint-probability kernels."""
    __slots__ = ("rplus", "obs", "kern", "ksum")

    def __init__(self, rplus, obs, kern):
        self.rplus = rplus
        self.obs = obs          # (m,) observation indices, ascending
        self.kern = kern        # (m, |R|, |R+|); P(s+, (o, rplus) | s, a)
        self.ksum = kern.sum(axis=0)


class _StepOp:
    """Flattened transformed one-step kernel of one action, for fast
    belief-space sweeps: entry e contributes val[e] * b[col[e]] to the
    (z, s+) pair pair_of_entry[e]."""
    __slots__ = ("ent_col", "ent_val", "ent_pair", "npairs", "groups")

    def __init__(self, ent_col, ent_val, ent_pair, npairs, groups):
        self.ent_col = ent_col
        self.ent_val = ent_val
        self.ent_pair = ent_pair
        self.npairs = npairs
        self.groups = groups


class _OpGroup:
    __slots__ = ("rplus", "nz", "width", "row", "col", "pair_idx", "obs")

    def __init__(self, rplus, nz, width, row, col, pair_idx, obs):
        self.rplus = rplus
        self.nz = nz
        self.width = width
        self.row = row
        self.col = col
        self.pair_idx = pair_idx
        self.obs = obs


class Ropomdp:
    """A POMDP paired with a region system: the region-observable model."""

    def __init__(self, base, regions):
        if not isinstance(regions, RegionSystem):
            regions = RegionSystem(regions, base.num_states)
        if regions.num_states != base.num_states:
            raise RegionSystemError("region system and model disagree on |S|")
        self.base = base
        self.regions = regions
        self.members = [np.array(r, dtype=np.intp) for r in regions]
        self._pos_in_region = [
            {int(s): i for i, s in enumerate(r)} for r in regions]
        self._oracle = {}
        self._zcache = {}
        self._step_ops = {}

    # -- oracle ------------------------------------------------------------

    def _oracle_table(self, a, s_prev):
        """(reach, G): reachable next states under (s_prev, a) and, for each
        of them and every observation, the region the oracle reports."""
        key = (a, s_prev)
        hit = self._oracle.get(key)
        if hit is not None:
            return hit
        T, Z = self.base.transition, self.base.observation
        reach = np.flatnonzero(T[a, s_prev] > 0.0)
        joint = T[a, s_prev, :, None] * Z[a, s_prev]  # (S, O)
        nreg = len(self.regions)
        supp = np.zeros((nreg, joint.shape[1]))
        for i, mem in enumerate(self.members):
            supp[i] = joint[mem].sum(axis=0)
        G = np.empty((reach.size, joint.shape[1]), dtype=np.intp)
        for i, sp in enumerate(reach):
            cand = self.regions.containing(int(sp))
            # argmax keeps the first maximizer, i.e. the earliest region
            G[i] = cand[np.argmax(supp[cand], axis=0)]
        out = (reach, G)
        self._oracle[key] = out
        return out

    def oracle_region(self, s_true, o, s_prev, a_prev):
        """Region index the oracle reports for the true state s_true."""
        reach, G = self._oracle_table(a_prev, s_prev)
        hit = np.flatnonzero(reach == s_true)
        if hit.size:
            return int(G[hit[0], o])
        # unreachable query: evaluate the selection rule directly
        T, Z = self.base.transition, self.base.observation
        joint = T[a_prev, s_prev, :, None] * Z[a_prev, s_prev]
        cand = self.regions.containing(int(s_true))
        scores = np.array([joint[self.members[c], o].sum() for c in cand])
        return int(cand[int(np.argmax(scores))])

    def transformed_obs_prob(self, s_next, a, s_prev, z):
        """P(z | s_next, a, s_prev) for z = (observation, region index)."""
        o, rplus = z
        base = self.base.observation[a, s_prev, s_next, o]
        if self.oracle_region(s_next, o, s_prev, a) != rplus:
            return 0.0
        return float(base)

    # -- per-(action, region) feasible observations ------------------------

    def _zgroups(self, a, r_idx):
        key = (a, r_idx)
        hit = self._zcache.get(key)
        if hit is not None:
            return hit
        T, Z = self.base.transition, self.base.observation
        mem = self.members[r_idx]
        no = self.base.num_observations
        # kernels[(o, rplus)][s_loc, sp_loc]
        kernels = {}
        for s_loc, s in enumerate(mem):
            reach, G = self._oracle_table(a, int(s))
            vals = T[a, s, reach][:, None] * Z[a, s, reach, :]  # (reach, O)
            nz = np.argwhere(vals > 0.0)
            for i, o in nz:
                sp = int(reach[i])
                rp = int(G[i, o])
                k = kernels.get((int(o), rp))
                if k is None:
                    k = np.zeros((mem.size, self.members[rp].size))
                    kernels[(int(o), rp)] = k
                k[s_loc, self._pos_in_region[rp][sp]] = vals[i, o]
        by_rplus = {}
        for (o, rp), k in kernels.items():
            by_rplus.setdefault(rp, []).append((o, k))
        groups = []
        for rp in sorted(by_rplus):
            items = sorted(by_rplus[rp], key=lambda t: t[0])
            obs = np.array([o for o, _ in items], dtype=np.intp)
            kern = np.stack([k for _, k in items])
            groups.append(_ZGroup(rp, obs, kern))
        self._zcache[key] = groups
        return groups

    def feasible_observations(self, a, region):
        """All z = (o, region index) receivable next when the state is in
        the given region and action a is taken, sorted by (o, region)."""
        r_idx = self.regions.index_of(region)
        if r_idx is not None:
            groups = self._zgroups(a, r_idx)
            zs = [(int(o), g.rplus) for g in groups for o in g.obs]
            return sorted(zs)
        # ad-hoc region, same scan without the cache
        T, Z = self.base.transition, self.base.observation
        zs = set()
        for s in region:
            reach, G = self._oracle_table(a, int(s))
            vals = T[a, s, reach][:, None] * Z[a, s, reach, :]
            for i, o in np.argwhere(vals > 0.0):
                zs.add((int(o), int(G[i, o])))
        return sorted(zs)

    # -- fast transformed one-step operator --------------------------------

    def _step_op(self, a):
        op = self._step_ops.get(a)
        if op is not None:
            return op
        T, Z = self.base.transition, self.base.observation
        ns = self.base.num_states
        entries = []  # (o, rplus, sp, s, val)
        for s in range(ns):
            reach, G = self._oracle_table(a, s)
            vals = T[a, s, reach][:, None] * Z[a, s, reach, :]
            for i, o in np.argwhere(vals > 0.0):
                entries.append((int(o), int(G[i, o]), int(reach[i]), s,
                                vals[i, o]))
        entries.sort(key=lambda e: e[:4])
        z_ids = {}
        pair_ids = {}
        ent_col = np.empty(len(entries), dtype=np.intp)
        ent_val = np.empty(len(entries))
        ent_pair = np.empty(len(entries), dtype=np.intp)
        pair_meta = []  # (z, rplus, sp) per pair
        for e_i, (o, rp, sp, s, val) in enumerate(entries):
            z = z_ids.setdefault((o, rp), len(z_ids))
            p = pair_ids.get((z, sp))
            if p is None:
                p = len(pair_ids)
                pair_ids[(z, sp)] = p
                pair_meta.append((z, o, rp, sp))
            ent_col[e_i] = s
            ent_val[e_i] = val
            ent_pair[e_i] = p
        # group z by reported region for batched value lookups
        z_list = sorted(z_ids, key=lambda k: z_ids[k])
        by_rp = {}
        for (o, rp), z in z_ids.items():
            by_rp.setdefault(rp, []).append(z)
        groups = []
        for rp in sorted(by_rp):
            zrows = {z: i for i, z in enumerate(sorted(by_rp[rp]))}
            rows, cols, pidx, obs = [], [], [], [0] * len(zrows)
            for p, (z, o, rp2, sp) in enumerate(pair_meta):
                if rp2 != rp:
                    continue
                rows.append(zrows[z])
                cols.append(self._pos_in_region[rp][sp])
                pidx.append(p)
                obs[zrows[z]] = o
            groups.append(_OpGroup(
                rp, len(zrows), self.members[rp].size,
                np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp),
                np.array(pidx, dtype=np.intp), np.array(obs, dtype=np.intp)))
        op = _StepOp(ent_col, ent_val, ent_pair, len(pair_ids), groups)
        self._step_ops[a] = op
        return op

    def transformed_belief_update(self, b, a, z):
        """Bayes update under the transformed kernel after observing z."""
        o, rplus = z
        T, Z = self.base.transition, self.base.observation
        u = np.zeros(self.base.num_states)
        for s in np.flatnonzero(np.asarray(b) > 0.0):
            reach, G = self._oracle_table(a, int(s))
            mask = G[:, o] == rplus
            if mask.any():
                sel = reach[mask]
                u[sel] += b[s] * T[a, s, sel] * Z[a, s, sel, o]
        norm = u.sum()
        if norm <= 0.0:
            raise ZeroProbabilityObservationError(
                f"transformed observation {z} has probability 0 here")
        return u / norm


def regional_q_set(rop, prev, a, z, region):
    """Back-projected vectors for one transformed observation, zero outside
    the region being updated."""
    o, rplus = z
    members = np.asarray(region, dtype=np.intp)
    T, Z = rop.base.transition, rop.base.observation
    ns = rop.base.num_states
    rows = np.zeros((members.size, ns))
    for loc, s in enumerate(members):
        reach, G = rop._oracle_table(a, int(s))
        mask = G[:, o] == rplus
        sel = reach[mask]
        rows[loc, sel] = T[a, s, sel] * Z[a, s, sel, o]
    out = []
    for v in prev:
        beta = np.zeros(ns)
        beta[members] = rop.base.discount * (rows @ v.values)
        out.append(StateValueVector(beta, SENTINEL_ACTION))
    return out


class RegionalValueSets:
    """One vector set per region: the representation of the restricted
    optimal value function."""

    def __init__(self, system, sets):
        if len(sets) != len(system):
            raise ValueError("one vector set per region required")
        self.system = system
        self.sets = list(sets)
        self._mats = [None] * len(sets)
        self._restricted = [None] * len(sets)

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, r):
        return self.sets[r]

    def matrix(self, r):
        m = self._mats[r]
        if m is None:
            m = stack_values(self.sets[r])
            self._mats[r] = m
        return m

    def restricted(self, r):
        """matrix(r) narrowed to the region's own member states."""
        m = self._restricted[r]
        if m is None:
            members = np.asarray(self.system[r], dtype=np.intp)
            m = self.matrix(r)[:, members]
            self._restricted[r] = m
        return m

    def value(self, r, b):
        """Induced value of region r's set at belief b."""
        m = self.matrix(r)
        if m.size == 0:
            return 0.0
        return float((m @ np.asarray(b, dtype=np.float64)).max())

    @classmethod
    def zeros(cls, system):
        ns = system.num_states
        return cls(system, [[StateValueVector(np.zeros(ns), SENTINEL_ACTION)]
                            for _ in range(len(system))])


def ropomdp_update(rop, r_idx, prev, reward_shift=0.0):
    """One restricted dynamic-programming update of region r_idx.

    Feasible observations whose regional Q-set is a single vector are
    pre-combined into one summed set (the cross sum is commutative and
    associative), so only sets with real branching reach the pruning loop.
    """
    members = rop.members[r_idx]
    ns = rop.base.num_states
    gamma = rop.base.discount
    combined = []
    for a in range(rop.base.num_actions):
        single = None
        big = []
        for g in rop._zgroups(a, r_idx):
            pm = prev.restricted(g.rplus)
            if pm.shape[0] == 1:
                contrib = gamma * (g.ksum @ pm[0])
                single = contrib if single is None else single + contrib
            else:
                for i, o in enumerate(g.obs):
                    B = gamma * (pm @ g.kern[i].T)  # (n_prev, |R|)
                    vecs = []
                    for row in B:
                        beta = np.zeros(ns)
                        beta[members] = row
                        vecs.append(StateValueVector(beta, SENTINEL_ACTION))
                    big.append((int(o), g.rplus, vecs))
        big.sort(key=lambda t: (t[0], t[1]))
        sets_list = []
        if single is not None:
            beta = np.zeros(ns)
            beta[members] = single
            sets_list.append([StateValueVector(beta, SENTINEL_ACTION)])
        sets_list.extend(vecs for _, _, vecs in big)
        if not sets_list:
            sets_list = [[StateValueVector(np.zeros(ns), SENTINEL_ACTION)]]
        w_a = incr_pruning(sets_list, members)
        rvec = [StateValueVector(rop.base.reward[:, a] + reward_shift, a)]
        combined.extend(cross_sum(rvec, w_a))
    return purge_region(combined, members)


def ropomdp_stop(curr, prev, eps, rewards_nonnegative=False):
    """Whether the restricted Bellman residual is at most eps.

    A corner sweep runs first: a gap above eps at a corner of some B_R
    already certifies "no" (the witness LP optimum can only be larger).
    Corners fully decide singleton regions; larger regions that pass fall
    through to the witness LPs. With non-negative rewards the value function
    grows with t, so checking previous vectors against the current sets is
    vacuous and skipped.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    system = curr.system
    if prev.system is not system and prev.system.regions != system.regions:
        raise ValueError("current and previous sets use different regions")
    for r in range(len(system)):
        cmax = curr.restricted(r).max(axis=0)
        pmax = prev.restricted(r).max(axis=0)
        if (cmax - pmax).max() > eps:
            return False
        if not rewards_nonnegative and (pmax - cmax).max() > eps:
            return False
    for r in range(len(system)):
        mem = system[r]
        if len(mem) == 1:
            continue  # B_R is a single corner, already decided above
        for alpha in curr[r]:
            if dominate(alpha, prev[r], mem, eps) is not None:
                return False
        if not rewards_nonnegative:
            for alpha in prev[r]:
                if dominate(alpha, curr[r], mem, eps) is not None:
                    return False
    return True


@dataclass
class RegionalSolveReport:
    sets: "RegionalValueSets"
    iterations: int
    eps: float
    reward_shift: float
    set_sizes: list = field(default_factory=list)
    iteration_seconds: list = field(default_factory=list)


def solve_ropomdp(rop, eps, max_iterations=10000, jobs=1):
    """Restricted value iteration until the restricted residual is <= eps.

    Negative rewards are shifted up by c = -min r before iterating (the
    optimal policy is unchanged and the one-sided stopping test applies);
    the reported vectors are shifted back by c / (1 - discount).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    system = rop.regions
    shift = max(0.0, -float(rop.base.reward.min()))
    prev = RegionalValueSets.zeros(system)
    sizes = []
    seconds = []
    pool = None
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        pool = ThreadPoolExecutor(max_workers=jobs)
    try:
        for t in range(1, max_iterations + 1):
            t0 = time.perf_counter()
            if pool is None:
                new_sets = [ropomdp_update(rop, r, prev, shift)
                            for r in range(len(system))]
            else:
                new_sets = list(pool.map(
                    lambda r: ropomdp_update(rop, r, prev, shift),
                    range(len(system))))
            curr = RegionalValueSets(system, new_sets)
            sizes.append(sum(len(s) for s in new_sets))
            seconds.append(time.perf_counter() - t0)
            if ropomdp_stop(curr, prev, eps, rewards_nonnegative=True):
                if shift > 0.0:
                    c = shift / (1.0 - rop.base.discount)
                    unshifted = [[StateValueVector(v.values - c, v.action)
                                  for v in s] for s in curr.sets]
                    curr = RegionalValueSets(system, unshifted)
                return RegionalSolveReport(
                    sets=curr, iterations=t, eps=eps, reward_shift=shift,
                    set_sizes=sizes, iteration_seconds=seconds)
            prev = curr
    finally:
        if pool is not None:
            pool.shutdown()
    raise IterationCapError(
        f"no convergence to restricted residual {eps} within "
        f"{max_iterations} updates")


def approx_action(rop, sets, b):
    """Greedy action of the radius-k approximate policy at any belief.

    One-step lookahead through the transformed kernel against the regional
    value sets; beliefs confined to a region reproduce the policy of the
    region-observable model itself. Ties go to the lowest action index.
    """
    b = np.asarray(b, dtype=np.float64)
    base = rop.base
    gamma = base.discount
    best_val = -np.inf
    best_a = 0
    for a in range(base.num_actions):
        op = rop._step_op(a)
        y = np.bincount(op.ent_pair, weights=op.ent_val * b[op.ent_col],
                        minlength=op.npairs)
        fut = 0.0
        for g in op.groups:
            B = np.zeros((g.nz, g.width))
            B[g.row, g.col] = y[g.pair_idx]
            amat = sets.matrix(g.rplus)
            if amat.size == 0:
                continue
            dots = amat[:, rop.members[g.rplus]] @ B.T
            # homogeneity: mass * U(u / mass) = max alpha.u, and zero-mass
            # observations contribute exactly 0
            fut += float(dots.max(axis=0).sum())
        val = float(b @ base.reward[:, a]) + gamma * fut
        if val > best_val:
            best_val = val
            best_a = a
    return best_a
