"""Plain-text grammars for POMDP models and solver outputs.

Both formats are line oriented, '#' starts a comment, and numbers are
written as shortest round-trip decimals so parse(serialize(x)) reproduces
every float bit for bit. The observation grammar carries the previous-state
index that transformed region-observable kernels need; `*` in that slot is
the usual shorthand for models whose sensors ignore it.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import Pomdp, validate


class ParseError(ValueError):
    def __init__(self, message, line=None, col=None):
        loc = ""
        if line is not None:
            loc = f"line {line}"
            if col is not None:
                loc += f", col {col}"
            loc = f" ({loc})"
        super().__init__(f"{message}{loc}")
        self.line = line
        self.col = col


def _fmt(x):
    return repr(float(x))


def _logical_lines(text):
    """(line_no, tokens) with comments stripped and ':' split out."""
    out = []
    for i, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        toks = body.replace(":", " : ").split()
        if toks:
            out.append((i, toks))
    return out


class _NameTable:
    def __init__(self, kind):
        self.kind = kind
        self.count = None
        self.names = None

    def define(self, toks, line):
        if self.count is not None:
            raise ParseError(f"duplicate '{self.kind}:' line", line)
        if len(toks) == 1:
            try:
                self.count = int(toks[0])
            except ValueError:
                self.count = None
            if self.count is not None:
                if self.count <= 0:
                    raise ParseError(f"{self.kind} count must be positive", line)
                return
        for t in toks:
            try:
                int(t)
                raise ParseError(
                    f"{self.kind} name {t!r} looks like an index", line)
            except ValueError:
                pass
        if len(set(toks)) != len(toks):
            raise ParseError(f"duplicate {self.kind} names", line)
        self.names = list(toks)
        self.count = len(toks)

    def resolve(self, tok, line):
        if self.count is None:
            raise ParseError(f"'{self.kind}:' must appear before tables", line)
        try:
            i = int(tok)
            if not 0 <= i < self.count:
                raise ParseError(
                    f"{self.kind} index {i} out of range 0..{self.count - 1}",
                    line)
            return i
        except ValueError:
            pass
        if self.names and tok in self.names:
            return self.names.index(tok)
        raise ParseError(f"unknown {self.kind} {tok!r}", line)


def _floats(toks, n, line, what):
    if len(toks) != n:
        raise ParseError(f"{what} needs {n} numbers, got {len(toks)}", line)
    try:
        return [float(t) for t in toks]
    except ValueError as e:
        raise ParseError(f"bad number in {what}: {e}", line)


def parse_model(text):
    """Parse the model grammar into a validated Pomdp."""
    lines = _logical_lines(text)
    states = _NameTable("states")
    actions = _NameTable("actions")
    observations = _NameTable("observations")
    discount = None
    start = None
    T = Z = R = None
    pos = 0

    def dims_ready(line):
        nonlocal T, Z, R
        for tab in (states, actions, observations):
            if tab.count is None:
                raise ParseError(
                    f"'{tab.kind}:' must appear before tables", line)
        if T is None:
            T = np.zeros((actions.count, states.count, states.count))
            Z = np.zeros((actions.count, states.count, states.count,
                          observations.count))
            R = np.zeros((states.count, actions.count))

    def next_row(n, what):
        nonlocal pos
        if pos >= len(lines):
            raise ParseError(f"unexpected end of file, expected {what}",
                             lines[-1][0] if lines else 1)
        line, toks = lines[pos]
        pos += 1
        return _floats(toks, n, line, what)

    while pos < len(lines):
        line, toks = lines[pos]
        pos += 1
        head = toks[0]
        rest = toks[1:]
        if rest and rest[0] == ":":
            rest = rest[1:]
        if head == "discount":
            if discount is not None:
                raise ParseError("duplicate 'discount:' line", line)
            discount = _floats(rest, 1, line, "discount")[0]
        elif head in ("states", "actions", "observations"):
            {"states": states, "actions": actions,
             "observations": observations}[head].define(rest, line)
        elif head == "start":
            dims_ready(line)
            start = np.array(_floats(rest, states.count, line, "start row"))
        elif head == "T":
            dims_ready(line)
            parts = _split_on_colons(rest, line)
            a = actions.resolve(parts[0][0], line) if parts and parts[0] \
                else _bad(line, "T needs an action")
            if len(parts) == 1:
                for s in range(states.count):
                    T[a, s] = next_row(states.count, f"T row for state {s}")
            elif len(parts) == 2:
                _expect_single(parts[0], line, "T action")
                s = states.resolve(parts[1][0], line)
                _expect_single(parts[1], line, "T state")
                T[a, s] = next_row(states.count, "T row")
            elif len(parts) == 3:
                s = states.resolve(parts[1][0], line)
                tail = parts[2]
                if len(tail) != 2:
                    raise ParseError("T entry needs \"s' p\"", line)
                s1 = states.resolve(tail[0], line)
                T[a, s, s1] = _floats(tail[1:], 1, line, "T entry")[0]
            else:
                raise ParseError("malformed T line", line)
        elif head == "O":
            dims_ready(line)
            parts = _split_on_colons(rest, line)
            if len(parts) != 3:
                raise ParseError("O lines are 'O: <a> : <s-|*> : <s\\'>'", line)
            a = actions.resolve(parts[0][0], line)
            s1_part = parts[2]
            inline = s1_part[1:]
            s1 = states.resolve(s1_part[0], line)
            row = (_floats(inline, observations.count, line, "O row")
                   if inline else next_row(observations.count, "O row"))
            if parts[1][0] == "*":
                Z[a, :, s1, :] = row
            else:
                sp = states.resolve(parts[1][0], line)
                Z[a, sp, s1, :] = row
        elif head == "R":
            dims_ready(line)
            parts = _split_on_colons(rest, line)
            if len(parts) != 2 or len(parts[1]) != 2:
                raise ParseError("R lines are 'R: <a> : <s> <value>'", line)
            a = actions.resolve(parts[0][0], line)
            s = states.resolve(parts[1][0], line)
            R[s, a] = _floats(parts[1][1:], 1, line, "R value")[0]
        else:
            raise ParseError(f"unknown directive {head!r}", line)

    if discount is None:
        raise ParseError("missing 'discount:' line", 1)
    dims_ready(lines[-1][0] if lines else 1)
    model = Pomdp(T, Z, R, discount,
                  state_names=states.names, action_names=actions.names,
                  observation_names=observations.names, start=start)
    validate(model)
    return model


def _split_on_colons(toks, line):
    parts = [[]]
    for t in toks:
        if t == ":":
            parts.append([])
        else:
            parts[-1].append(t)
    if any(not p for p in parts):
        raise ParseError("empty field between colons", line)
    return parts


def _expect_single(part, line, what):
    if len(part) != 1:
        raise ParseError(f"{what} must be a single token", line)


def _bad(line, msg):
    raise ParseError(msg, line)


def serialize_model(model):
    """Emit the model grammar; parse_model(serialize_model(m)) == m."""
    out = []
    out.append(f"discount: {_fmt(model.discount)}")
    for kind, names, count in (
            ("states", model.state_names, model.num_states),
            ("actions", model.action_names, model.num_actions),
            ("observations", model.observation_names, model.num_observations)):
        out.append(f"{kind}: " + (" ".join(names) if names else str(count)))
    out.append("")
    for a in range(model.num_actions):
        out.append(f"T: {a}")
        for s in range(model.num_states):
            out.append(" ".join(_fmt(x) for x in model.transition[a, s]))
    out.append("")
    Z = model.observation
    replicated = bool(np.all(Z == Z[:, :1, :, :]))
    for a in range(model.num_actions):
        for s1 in range(model.num_states):
            if replicated:
                out.append(f"O: {a} : * : {s1}")
                out.append(" ".join(_fmt(x) for x in Z[a, 0, s1]))
            else:
                for sp in range(model.num_states):
                    out.append(f"O: {a} : {sp} : {s1}")
                    out.append(" ".join(_fmt(x) for x in Z[a, sp, s1]))
    out.append("")
    for s in range(model.num_states):
        for a in range(model.num_actions):
            if model.reward[s, a] != 0.0:
                out.append(f"R: {a} : {s} {_fmt(model.reward[s, a])}")
    if model.start is not None:
        out.append("start: " + " ".join(_fmt(x) for x in model.start))
    return "\n".join(out) + "\n"


@dataclass
class SolutionDocument:
    """Serialized solver output: per-region vector sets plus run metadata."""
    discount: float
    num_states: int
    horizon: int
    residual: float
    regions: list                      # list of sorted member lists
    vectors: list                      # per region: list of (action, values)
    shift: float = 0.0

    def __post_init__(self):
        for r, vs in zip(self.regions, self.vectors):
            for _, vals in vs:
                if len(vals) != self.num_states:
                    raise ValueError("vector length differs from state count")
        if len(self.regions) != len(self.vectors):
            raise ValueError("one vector list per region required")


def write_solution(doc):
    out = [
        f"discount: {_fmt(doc.discount)}",
        f"states: {doc.num_states}",
        f"horizon: {doc.horizon}",
        f"residual: {_fmt(doc.residual)}",
    ]
    if doc.shift != 0.0:
        out.append(f"shift: {_fmt(doc.shift)}")
    out.append(f"regions: {len(doc.regions)}")
    for i, members in enumerate(doc.regions):
        out.append(f"region: {i} : " + " ".join(str(s) for s in members))
    for i, vecs in enumerate(doc.vectors):
        for action, vals in vecs:
            out.append(f"vector: {i} : {action} : "
                       + " ".join(_fmt(x) for x in vals))
    return "\n".join(out) + "\n"


def read_solution(text):
    lines = _logical_lines(text)
    fields = {}
    regions = {}
    vectors = []
    nregions = None
    for line, toks in lines:
        head = toks[0]
        rest = toks[1:]
        if rest and rest[0] == ":":
            rest = rest[1:]
        if head in ("discount", "residual", "shift"):
            fields[head] = _floats(rest, 1, line, head)[0]
        elif head in ("states", "horizon", "regions"):
            try:
                fields[head] = int(rest[0])
            except (ValueError, IndexError):
                raise ParseError(f"bad integer for {head}", line)
            if head == "regions":
                nregions = fields[head]
        elif head == "region":
            parts = _split_on_colons(rest, line)
            if len(parts) != 2:
                raise ParseError("region lines are 'region: <id> : <members>'",
                                 line)
            try:
                rid = int(parts[0][0])
                members = sorted(int(t) for t in parts[1])
            except ValueError:
                raise ParseError("region ids and members are integers", line)
            regions[rid] = members
        elif head == "vector":
            parts = _split_on_colons(rest, line)
            if len(parts) != 3:
                raise ParseError(
                    "vector lines are 'vector: <region> : <action> : <values>'",
                    line)
            try:
                rid = int(parts[0][0])
                action = int(parts[1][0])
            except ValueError:
                raise ParseError("region and action ids are integers", line)
            if "states" not in fields:
                raise ParseError("'states:' must precede vectors", line)
            vals = np.array(_floats(parts[2], fields["states"], line,
                                    "vector values"))
            vectors.append((line, rid, action, vals))
        else:
            raise ParseError(f"unknown directive {head!r}", line)
    for key in ("discount", "states", "horizon", "residual", "regions"):
        if key not in fields:
            raise ParseError(f"missing '{key}:' line", 1)
    if nregions != len(regions) or set(regions) != set(range(nregions)):
        raise ParseError("region ids must be 0..regions-1", 1)
    vecs_by_region = [[] for _ in range(nregions)]
    for line, rid, action, vals in vectors:
        if not 0 <= rid < nregions:
            raise ParseError(f"vector names unknown region {rid}", line)
        vecs_by_region[rid].append((action, vals))
    return SolutionDocument(
        discount=fields["discount"], num_states=fields["states"],
        horizon=fields["horizon"], residual=fields["residual"],
        regions=[regions[i] for i in range(nregions)],
        vectors=vecs_by_region, shift=fields.get("shift", 0.0))
