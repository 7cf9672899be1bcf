"""Built-in benchmark problems: tiger, a small maze and GRID-10x10."""

from __future__ import annotations

import numpy as np

from .model import PomdpModel, point_belief

# (row, col) offsets; row 0 is the northern edge
_MOVES = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}
_SIDES = ("N", "E", "S", "W")


def tiger(listen_accuracy: float = 0.85) -> PomdpModel:
    states = ("tiger-left", "tiger-right")
    actions = ("listen", "open-left", "open-right")
    observations = ("hear-left", "hear-right")
    T = np.empty((3, 2, 2))
    T[0] = np.eye(2)
    T[1] = T[2] = 0.5
    R = np.array([[-1.0, -10.0, 6.0],
                  [-1.0, 6.0, -10.0]])
    row = np.array([[listen_accuracy, 1 - listen_accuracy],
                    [1 - listen_accuracy, listen_accuracy]])
    O = np.broadcast_to(row, (3, 2, 2))
    return PomdpModel(states, actions, observations, T, R, O, 1.0, [0.5, 0.5])


def _wall_pattern(cells: set, cell) -> str:
    r, c = cell
    walls = [side for side in _SIDES
             if (r + _MOVES[side][0], c + _MOVES[side][1]) not in cells]
    return "".join(walls) or "open"


def _grid_model(cells: list, start, goal, outcomes) -> PomdpModel:
    """Shared construction for wall-observing grid worlds.

    ``outcomes(cell, action)`` yields ``(probability, next_cell)`` pairs.
    The goal is absorbing; entering it pays 1.
    """
    index = {c: i for i, c in enumerate(cells)}
    cellset = set(cells)
    actions = tuple(_MOVES)
    nS, nA = len(cells), len(actions)
    T = np.zeros((nA, nS, nS))
    for a, name in enumerate(actions):
        for cell in cells:
            s = index[cell]
            if cell == goal:
                T[a, s, s] = 1.0
                continue
            for p, nxt in outcomes(cell, name):
                T[a, s, index[nxt]] += p
    g = index[goal]
    R = T[:, :, g].T.copy()
    R[g, :] = 0.0

    patterns = [_wall_pattern(cellset, c) for c in cells]
    observations = tuple(dict.fromkeys(sorted(patterns, key=_pattern_order)))
    O1 = np.zeros((nS, len(observations)))
    for s, pat in enumerate(patterns):
        O1[s, observations.index(pat)] = 1.0
    O = np.broadcast_to(O1, (nA, nS, len(observations)))
    states = tuple(f"r{r}c{c}" for r, c in cells)
    return PomdpModel(states, actions, tuple(f"walls-{p}" for p in observations),
                      T, R, O, 1.0, point_belief(nS, index[start]))


def _pattern_order(pattern: str):
    return (0 if pattern == "open" else len(pattern), pattern)


def _step(cells: set, cell, direction):
    dr, dc = _MOVES[direction]
    nxt = (cell[0] + dr, cell[1] + dc)
    return nxt if nxt in cells else cell


# Maze layout: 3 rows x 4 columns with the cell at row 1, column 1 blocked.
# Positions below are (row, col) with row 0 to the north.
MAZE_ROWS, MAZE_COLS = 3, 4
MAZE_BLOCKED = (1, 1)
MAZE_START = (2, 0)
MAZE_GOAL = (0, 3)


def hz_maze() -> PomdpModel:
    """Small maze where every move goes 1 or 2 cells with probability 0.5 each.

    If the first cell is blocked the agent stays; if only the second one is
    blocked the two-cell outcome stops on the first cell. Observations are the
    wall patterns around a cell.
    """
    cells = [(r, c) for r in range(MAZE_ROWS) for c in range(MAZE_COLS) if (r, c) != MAZE_BLOCKED]
    cellset = set(cells)

    def outcomes(cell, direction):
        one = _step(cellset, cell, direction)
        two = _step(cellset, one, direction) if one != cell else cell
        return [(0.5, one), (0.5, two)]

    return _grid_model(cells, MAZE_START, MAZE_GOAL, outcomes)


GRID_SIZE = 10
GRID_START = (5, 5)
GRID_GOAL = (0, 0)


def grid10x10() -> PomdpModel:
    """Empty 10x10 room, goal in the north-west corner, start near the middle.

    N/S succeed with 0.9 and slip west/east with 0.05 each; E/W succeed with
    0.8 and slip north/south with 0.1 each. Slips into a wall leave the agent
    in place.
    """
    cells = [(r, c) for r in range(GRID_SIZE) for c in range(GRID_SIZE)]
    cellset = set(cells)
    noise = {"N": [(0.9, "N"), (0.05, "W"), (0.05, "E")],
             "S": [(0.9, "S"), (0.05, "W"), (0.05, "E")],
             "E": [(0.8, "E"), (0.1, "N"), (0.1, "S")],
             "W": [(0.8, "W"), (0.1, "N"), (0.1, "S")]}

    def outcomes(cell, direction):
        return [(p, _step(cellset, cell, d)) for p, d in noise[direction]]

    return _grid_model(cells, GRID_START, GRID_GOAL, outcomes)


PROBLEMS = {"tiger": tiger, "hz_maze": hz_maze, "grid10x10": grid10x10}


def get_problem(name: str) -> PomdpModel:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
