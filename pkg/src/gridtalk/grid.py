"""Gridworld mechanics: scenes, movement with obstacles and traps, relational
and trap queries, and the weighted shortest-path solve-length oracle.

Coordinates are (x, y) with x growing rightward and y growing upward, so
"up" adds one to y. The square is the movable piece, the circle is the goal.
Obstacles block movement entirely; traps hold the square in place for the
next two movement attempts after it enters one.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, NamedTuple

DEFAULT_TURN_LIMIT = 30


class GridError(Exception):
    """Base class for gridworld contract violations."""


class EpisodeOverError(GridError):
    """An action was applied to an episode that already ended."""


class UnsolvableSceneError(GridError):
    """No movement path exists from the square to the circle."""


class Position(NamedTuple):
    x: int
    y: int


class Direction(Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]


_DELTAS = {
    Direction.UP: (0, 1),
    Direction.DOWN: (0, -1),
    Direction.LEFT: (-1, 0),
    Direction.RIGHT: (1, 0),
}


class Relation(Enum):
    ABOVE = "above"
    BELOW = "below"
    LEFT = "left"
    RIGHT = "right"


class MoveOutcome(Enum):
    MOVED = "moved"
    BLOCKED = "blocked"
    STUCK_IN_TRAP = "stuck_in_trap"
    COMPLETED = "completed"


def _as_position(value) -> Position:
    if isinstance(value, Position):
        return value
    x, y = value
    return Position(int(x), int(y))


@dataclass(frozen=True)
class Scene:
    """Immutable description of one gridworld instance.

    Traps are passable (they only delay the square); obstacles are not.
    Entities never overlap: the square, the circle, every obstacle, and every
    trap all sit on distinct cells.
    """

    width: int
    height: int
    square: Position
    circle: Position
    obstacles: frozenset[Position] = frozenset()
    traps: frozenset[Position] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "square", _as_position(self.square))
        object.__setattr__(self, "circle", _as_position(self.circle))
        object.__setattr__(self, "obstacles", frozenset(_as_position(p) for p in self.obstacles))
        object.__setattr__(self, "traps", frozenset(_as_position(p) for p in self.traps))
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.width}x{self.height}")
        for name in ("square", "circle"):
            pos = getattr(self, name)
            if not self.in_bounds(pos):
                raise ValueError(f"{name} at {tuple(pos)} is outside the {self.width}x{self.height} grid")
        for name in ("obstacles", "traps"):
            for pos in getattr(self, name):
                if not self.in_bounds(pos):
                    raise ValueError(f"{name} entry {tuple(pos)} is outside the grid")
        if self.square == self.circle:
            raise ValueError("square and circle overlap")
        if self.obstacles & self.traps:
            cell = next(iter(self.obstacles & self.traps))
            raise ValueError(f"obstacles and traps overlap at {tuple(cell)}")
        for name in ("square", "circle"):
            pos = getattr(self, name)
            if pos in self.obstacles:
                raise ValueError(f"{name} overlaps an obstacle at {tuple(pos)}")
            if pos in self.traps:
                raise ValueError(f"{name} overlaps a trap at {tuple(pos)}")

    def in_bounds(self, pos: Position) -> bool:
        return 0 <= pos.x < self.width and 0 <= pos.y < self.height

    def passable(self, pos: Position) -> bool:
        return self.in_bounds(pos) and pos not in self.obstacles

    def cells(self) -> Iterator[Position]:
        for y in range(self.height):
            for x in range(self.width):
                yield Position(x, y)


@dataclass
class EpisodeState:
    """Mutable per-episode state. Single-owner: not safe to share across
    concurrent writers. ``done`` flips on completion or on reaching the turn
    limit; ``succeeded`` distinguishes the two."""

    scene: Scene
    turn_limit: int = DEFAULT_TURN_LIMIT
    square: Position = field(init=False)
    trap_lock: int = field(default=0, init=False)
    turn: int = field(default=0, init=False)
    done: bool = field(default=False, init=False)

    def __post_init__(self):
        self.square = self.scene.square

    @property
    def succeeded(self) -> bool:
        return self.done and self.square == self.scene.circle

    def consume_turn(self) -> None:
        """Count one agent utterance; ends the episode at the turn limit."""
        self.turn += 1
        if self.turn >= self.turn_limit:
            self.done = True


def apply_move(state: EpisodeState, direction: Direction) -> MoveOutcome:
    """Attempt to move the square one cell; mutates ``state``.

    While trap-locked, every movement attempt fails and consumes one owed
    failure, regardless of direction. Off-grid and obstacle targets block.
    Reaching the circle ends the episode. Every call costs one turn.
    """
    if state.done:
        raise EpisodeOverError("apply_move called on a finished episode")
    if state.trap_lock > 0:
        state.trap_lock -= 1
        outcome = MoveOutcome.STUCK_IN_TRAP
    else:
        dx, dy = direction.delta
        target = Position(state.square.x + dx, state.square.y + dy)
        if not state.scene.passable(target):
            outcome = MoveOutcome.BLOCKED
        elif target == state.scene.circle:
            state.square = target
            state.done = True
            outcome = MoveOutcome.COMPLETED
        else:
            state.square = target
            if target in state.scene.traps:
                state.trap_lock = 2
            outcome = MoveOutcome.MOVED
    state.consume_turn()
    return outcome


def relational_answer(state: EpisodeState, relation: Relation) -> bool:
    """Answer "is the square <relation> the circle?" for the current square.

    Each axis is independent; equal coordinates make both opposing answers
    false.
    """
    sq, ci = state.square, state.scene.circle
    if relation is Relation.ABOVE:
        return sq.y > ci.y
    if relation is Relation.BELOW:
        return sq.y < ci.y
    if relation is Relation.LEFT:
        return sq.x < ci.x
    return sq.x > ci.x


class TrapAnswerKind(Enum):
    NO_TRAPS = "no_traps"
    IN_ONE = "in_one"
    OFFSET = "offset"


@dataclass(frozen=True)
class TrapAnswer:
    """Where the nearest trap sits relative to the square, as signed cell
    offsets (dx right-positive, dy up-positive)."""

    kind: TrapAnswerKind
    dx: int = 0
    dy: int = 0


def nearest_trap_answer(state: EpisodeState) -> TrapAnswer:
    """Locate the trap nearest the square by Manhattan distance.

    Ties break on the smallest (y, x) of the trap cell so the answer is
    deterministic.
    """
    traps = state.scene.traps
    if not traps:
        return TrapAnswer(TrapAnswerKind.NO_TRAPS)
    sq = state.square
    if sq in traps:
        return TrapAnswer(TrapAnswerKind.IN_ONE)
    best = min(traps, key=lambda t: (abs(t.x - sq.x) + abs(t.y - sq.y), t.y, t.x))
    return TrapAnswer(TrapAnswerKind.OFFSET, dx=best.x - sq.x, dy=best.y - sq.y)


def solve_distances(scene: Scene, goal: Position | None = None) -> dict[Position, int]:
    """Minimum movement commands from every reachable cell to ``goal``
    (default: the circle).

    Leaving a trap cell costs 3 commands (two owed failures plus the real
    move); every other departure costs 1. Dijkstra over non-obstacle cells.
    """
    goal = scene.circle if goal is None else _as_position(goal)
    dist: dict[Position, int] = {goal: 0}
    frontier: list[tuple[int, Position]] = [(0, goal)]
    while frontier:
        d, cell = heapq.heappop(frontier)
        if d > dist.get(cell, d):
            continue
        for direction in Direction:
            dx, dy = direction.delta
            # neighbor moves *into* cell, so the edge cost is the neighbor's exit cost
            nb = Position(cell.x - dx, cell.y - dy)
            if not scene.passable(nb) or nb == goal:
                continue
            cand = d + (3 if nb in scene.traps else 1)
            if cand < dist.get(nb, cand + 1):
                dist[nb] = cand
                heapq.heappush(frontier, (cand, nb))
    return dist


def oracle_solve_length(scene: Scene) -> int:
    """Minimum number of movement commands from the square to the circle,
    counting trap lock-in time. Raises ``UnsolvableSceneError`` when no path
    exists."""
    dist = solve_distances(scene).get(scene.square)
    if dist is None:
        raise UnsolvableSceneError(
            f"no path from square {tuple(scene.square)} to circle {tuple(scene.circle)}"
        )
    return dist


def manhattan_distances(scene: Scene) -> dict[Position, int]:
    """Plain Manhattan distance to the circle for every cell; the trap-blind
    alternative metric for approach-reward shaping."""
    ci = scene.circle
    return {cell: abs(cell.x - ci.x) + abs(cell.y - ci.y) for cell in scene.cells()}
