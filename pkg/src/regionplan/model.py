"""Finite POMDP model container and the elementary belief-space operations.

The observation kernel is indexed by the previous state as well as the
action and next state, so the same table shape serves both ordinary models
(rows replicated over the previous state) and transformed region-observable
models, whose observations genuinely depend on where the agent came from.
"""

import numpy as np

PROB_TOL = 1e-9  # absolute tolerance for all normalization checks


class ModelValidationError(ValueError):
    pass


class ZeroProbabilityObservationError(ValueError):
    """Raised when a belief update conditions on an impossible observation."""


class Pomdp:
    """A finite POMDP.

    transition[a, s, s1]      P(s1 | s, a)
    observation[a, s, s1, o]  P(o | s1, a, s)   (s is the previous state)
    reward[s, a]              immediate reward
    discount                  in [0, 1)
    """

    def __init__(self, transition, observation, reward, discount,
                 state_names=None, action_names=None, observation_names=None,
                 start=None):
        self.transition = np.asarray(transition, dtype=np.float64)
        self.observation = np.asarray(observation, dtype=np.float64)
        self.reward = np.asarray(reward, dtype=np.float64)
        self.discount = float(discount)
        self.state_names = list(state_names) if state_names is not None else None
        self.action_names = list(action_names) if action_names is not None else None
        self.observation_names = (list(observation_names)
                                  if observation_names is not None else None)
        self.start = None if start is None else np.asarray(start, dtype=np.float64)

    @property
    def num_actions(self):
        return self.transition.shape[0]

    @property
    def num_states(self):
        return self.transition.shape[1]

    @property
    def num_observations(self):
        return self.observation.shape[3]

    def state_name(self, s):
        return self.state_names[s] if self.state_names else str(s)

    def action_name(self, a):
        return self.action_names[a] if self.action_names else str(a)

    def observation_name(self, o):
        return self.observation_names[o] if self.observation_names else str(o)


def validate(model):
    """Check all Pomdp invariants; raise ModelValidationError on the first violation.

    The error message names the offending table, its index, and the residual
    mass so bad input files can be fixed by hand.
    """
    T, Z, r = model.transition, model.observation, model.reward
    if T.ndim != 3 or T.shape[1] != T.shape[2]:
        raise ModelValidationError(f"transition table has shape {T.shape}, "
                                   "expected (actions, states, states)")
    na, ns = T.shape[0], T.shape[1]
    if Z.ndim != 4 or Z.shape[0] != na or Z.shape[1] != ns or Z.shape[2] != ns:
        raise ModelValidationError(f"observation table has shape {Z.shape}, "
                                   f"expected ({na}, {ns}, {ns}, observations)")
    if r.shape != (ns, na):
        raise ModelValidationError(f"reward table has shape {r.shape}, "
                                   f"expected ({ns}, {na})")
    if not (0.0 <= model.discount < 1.0):
        raise ModelValidationError(f"discount {model.discount} outside [0, 1)")
    if np.any(T < 0.0) or np.any(T > 1.0):
        a, s, s1 = np.argwhere((T < 0.0) | (T > 1.0))[0]
        raise ModelValidationError(
            f"transition probability T[a={a}][s={s}][s'={s1}] = {T[a, s, s1]} "
            "outside [0, 1]")
    if np.any(Z < 0.0) or np.any(Z > 1.0):
        a, sp, s1, o = np.argwhere((Z < 0.0) | (Z > 1.0))[0]
        raise ModelValidationError(
            f"observation probability O[a={a}][s-={sp}][s'={s1}][o={o}] = "
            f"{Z[a, sp, s1, o]} outside [0, 1]")
    trow = T.sum(axis=2)
    bad = np.argwhere(np.abs(trow - 1.0) > PROB_TOL)
    if bad.size:
        a, s = bad[0]
        raise ModelValidationError(
            f"transition row (a={a}, s={s}) sums to {trow[a, s]!r} "
            f"(residual {trow[a, s] - 1.0:.3e})")
    orow = Z.sum(axis=3)
    bad = np.argwhere(np.abs(orow - 1.0) > PROB_TOL)
    if bad.size:
        a, sp, s1 = bad[0]
        raise ModelValidationError(
            f"observation row (a={a}, s-={sp}, s'={s1}) sums to "
            f"{orow[a, sp, s1]!r} (residual {orow[a, sp, s1] - 1.0:.3e})")
    if model.start is not None:
        if model.start.shape != (ns,):
            raise ModelValidationError(f"start vector has length "
                                       f"{model.start.shape}, expected {ns}")
        validate_belief(model.start)


def validate_belief(b):
    b = np.asarray(b, dtype=np.float64)
    if np.any(b < 0.0):
        raise ModelValidationError(f"belief has negative entry {b.min()!r}")
    if abs(b.sum() - 1.0) > PROB_TOL:
        raise ModelValidationError(f"belief sums to {b.sum()!r}")
    return b


def point_belief(num_states, s):
    b = np.zeros(num_states)
    b[s] = 1.0
    return b


def joint_prob(model, s, a, s_next, o):
    """P(s_next, o | s, a) = P(s_next | s, a) P(o | s_next, a, s)."""
    return model.transition[a, s, s_next] * model.observation[a, s, s_next, o]


def joint_matrix(model, a, o):
    """(S, S) matrix J[s, s1] = P(s1, o | s, a)."""
    return model.transition[a] * model.observation[a, :, :, o]


def belief_update(model, b, a, o):
    """Bayes update of a belief after taking action a and observing o.

    Raises ZeroProbabilityObservationError when o has probability zero under
    (b, a), since the posterior is undefined there.
    """
    b = np.asarray(b, dtype=np.float64)
    unnorm = b @ joint_matrix(model, a, o)
    norm = unnorm.sum()
    if norm <= 0.0:
        raise ZeroProbabilityObservationError(
            f"observation {o} has probability 0 under the given belief and "
            f"action {a}")
    return unnorm / norm


def expected_reward(model, b, a):
    """Immediate expected reward of action a in belief b."""
    return float(np.dot(b, model.reward[:, a]))


def observation_prob(model, b, a, o):
    """Probability of observing o after taking action a in belief b."""
    b = np.asarray(b, dtype=np.float64)
    return float((b @ joint_matrix(model, a, o)).sum())
