"""Grid-world robot navigation POMDPs with the tabulated office sensor and
actuator models.

A maze is a grid of corridor cells, room cells, and blocked cells; each
non-blocked cell becomes four states, one per facing. The robot senses
doorway/wall/open/undetermined in front, left, and right independently, and
moves with the standard or noisy outcome tables. Motion into a blocked cell
folds onto staying in place.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import Pomdp

NORTH, EAST, SOUTH, WEST = range(4)
ORIENT_NAMES = ("north", "east", "south", "west")
DELTAS = {NORTH: (-1, 0), EAST: (0, 1), SOUTH: (1, 0), WEST: (0, -1)}

ACTIONS = ("move-forward", "turn-left", "turn-right", "declare-goal")
FORWARD, LEFT, RIGHT, DECLARE = range(4)

READINGS = ("wall", "open", "doorway", "undetermined")

# outcome masses (no-change, move, double-move)
FORWARD_OUTCOMES = {"standard": (0.11, 0.88, 0.01), "noisy": (0.2, 0.7, 0.1)}
TURN_OUTCOMES = {"standard": (0.05, 0.9, 0.05), "noisy": (0.15, 0.7, 0.15)}

# per-direction reading distribution given the actual case, in the order
# (wall, open, doorway, undetermined)
OBSERVATION_ROWS = {
    ("standard", "wall"): (0.90, 0.04, 0.04, 0.02),
    ("noisy", "wall"): (0.70, 0.19, 0.09, 0.02),
    ("standard", "open"): (0.02, 0.90, 0.06, 0.02),
    ("noisy", "open"): (0.19, 0.70, 0.09, 0.02),
    ("standard", "doorway"): (0.15, 0.15, 0.69, 0.01),
    ("noisy", "doorway"): (0.15, 0.15, 0.69, 0.01),
}


class LayoutError(ValueError):
    pass


@dataclass
class MazeLayout:
    grid: list            # list of equal-length strings over {#, ., R, G}
    goal_cell: tuple
    goal_orientation: int
    cells: list = field(init=False)          # non-blocked cells, row-major
    cell_index: dict = field(init=False)
    wall_segments: set = field(init=False)    # (cell, outward delta)
    doorway_segments: set = field(init=False)  # frozenset({cell_a, cell_b})

    def __post_init__(self):
        if not self.grid or any(len(row) != len(self.grid[0])
                                for row in self.grid):
            raise LayoutError("grid rows must be non-empty and equal length")
        for row in self.grid:
            bad = set(row) - set("#.RG")
            if bad:
                raise LayoutError(f"unknown map characters {sorted(bad)}")
        if sum(row.count("G") for row in self.grid) != 1:
            raise LayoutError("exactly one goal cell required")
        gr, gc = self.goal_cell
        if self.grid[gr][gc] == "#":
            raise LayoutError("goal cell is blocked")
        if not 0 <= self.goal_orientation < 4:
            raise LayoutError("goal orientation must be 0..3")
        self.cells = [(r, c) for r in range(len(self.grid))
                      for c in range(len(self.grid[0]))
                      if self.grid[r][c] != "#"]
        self.cell_index = {cell: i for i, cell in enumerate(self.cells)}
        self._check_connected()
        self.wall_segments = set()
        self.doorway_segments = set()
        for cell in self.cells:
            for d in range(4):
                nb = self.neighbor(cell, d)
                if nb is None:
                    self.wall_segments.add((cell, DELTAS[d]))
                elif self.is_room(cell) != self.is_room(nb):
                    self.doorway_segments.add(frozenset((cell, nb)))

    def _check_connected(self):
        if not self.cells:
            raise LayoutError("no open cells")
        seen = {self.cells[0]}
        frontier = [self.cells[0]]
        while frontier:
            cell = frontier.pop()
            for d in range(4):
                nb = self.neighbor(cell, d)
                if nb is not None and nb not in seen:
                    seen.add(nb)
                    frontier.append(nb)
        if len(seen) != len(self.cells):
            raise LayoutError("open cells are not connected")

    def neighbor(self, cell, direction):
        """Adjacent non-blocked cell in the direction, or None at a wall."""
        r, c = cell
        dr, dc = DELTAS[direction]
        r2, c2 = r + dr, c + dc
        if not (0 <= r2 < len(self.grid) and 0 <= c2 < len(self.grid[0])):
            return None
        if self.grid[r2][c2] == "#":
            return None
        return (r2, c2)

    def is_room(self, cell):
        return self.grid[cell[0]][cell[1]] == "R"

    def actual_case(self, cell, direction):
        nb = self.neighbor(cell, direction)
        if nb is None:
            return "wall"
        if self.is_room(cell) != self.is_room(nb):
            return "doorway"
        return "open"


def parse_map(text):
    """Read a map file: a `facing: <direction>` header, then the grid."""
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    lines = [ln for ln in lines if ln.strip()]
    if not lines or not lines[0].lower().startswith("facing:"):
        raise LayoutError("map file must start with 'facing: <direction>'")
    word = lines[0].split(":", 1)[1].strip().lower()
    if word not in ORIENT_NAMES:
        raise LayoutError(f"unknown facing {word!r}")
    grid = lines[1:]
    goals = [(r, c) for r, row in enumerate(grid)
             for c, ch in enumerate(row) if ch == "G"]
    if len(goals) != 1:
        raise LayoutError("exactly one goal cell required")
    return MazeLayout(grid=grid, goal_cell=goals[0],
                      goal_orientation=ORIENT_NAMES.index(word))


def build_office_pomdp(layout, flavor="standard", gamma=0.99):
    """Office-navigation POMDP over the layout with the given model flavor."""
    if flavor not in ("standard", "noisy"):
        raise LayoutError(f"unknown flavor {flavor!r}")
    nc = len(layout.cells)
    ns = nc * 4
    no = 64

    def state(cell, d):
        return layout.cell_index[cell] * 4 + d

    T = np.zeros((4, ns, ns))
    p_n, p_f, p_ff = FORWARD_OUTCOMES[flavor]
    t_n, t_t, t_tt = TURN_OUTCOMES[flavor]
    for cell in layout.cells:
        for d in range(4):
            s = state(cell, d)
            # forward: either step blocked folds the outcome onto no-change
            stay = p_n
            one = layout.neighbor(cell, d)
            if one is None:
                stay += p_f + p_ff
            else:
                T[FORWARD, s, state(one, d)] += p_f
                two = layout.neighbor(one, d)
                if two is None:
                    stay += p_ff
                else:
                    T[FORWARD, s, state(two, d)] += p_ff
            T[FORWARD, s, s] += stay
            T[LEFT, s, s] += t_n
            T[LEFT, s, state(cell, (d + 3) % 4)] += t_t
            T[LEFT, s, state(cell, (d + 2) % 4)] += t_tt
            T[RIGHT, s, s] += t_n
            T[RIGHT, s, state(cell, (d + 1) % 4)] += t_t
            T[RIGHT, s, state(cell, (d + 2) % 4)] += t_tt
            T[DECLARE, s, s] = 1.0

    obs_rows = np.zeros((ns, no))
    for cell in layout.cells:
        for d in range(4):
            front = OBSERVATION_ROWS[(flavor, layout.actual_case(cell, d))]
            left = OBSERVATION_ROWS[(flavor, layout.actual_case(cell, (d + 3) % 4))]
            right = OBSERVATION_ROWS[(flavor, layout.actual_case(cell, (d + 1) % 4))]
            row = np.einsum("i,j,k->ijk", front, left, right).reshape(no)
            obs_rows[state(cell, d)] = row
    # readings are independent of the action and the previous state; the
    # broadcast view replicates rows without materializing (A, S, S, O)
    Z = np.broadcast_to(obs_rows[None, None, :, :], (4, ns, ns, no))

    reward = np.zeros((ns, 4))
    goal_state = state(layout.goal_cell, layout.goal_orientation)
    reward[goal_state, DECLARE] = 1.0

    state_names = [f"{r},{c}:{ORIENT_NAMES[d]}"
                   for (r, c) in layout.cells for d in range(4)]
    obs_names = ["".join((READINGS[f][0], READINGS[l][0], READINGS[rt][0]))
                 for f in range(4) for l in range(4) for rt in range(4)]
    return Pomdp(T, Z, reward, gamma,
                 state_names=state_names,
                 action_names=list(ACTIONS),
                 observation_names=obs_names)


def goal_state_index(layout):
    return layout.cell_index[layout.goal_cell] * 4 + layout.goal_orientation


MINI_A_MAP = """\
facing: east
G....
.###.
R###.
.....
"""

MINI_B_MAP = """\
facing: south
R...R
.#G#.
"""


def builtin_layouts():
    """Hand-designed small mazes: mini-A has an asymmetric loop with one
    room; mini-B is mirror symmetric around a goal flanked by blocked
    cells, with look-alike rooms at both ends."""
    return {"mini-A": parse_map(MINI_A_MAP), "mini-B": parse_map(MINI_B_MAP)}
