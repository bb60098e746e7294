"""The closed utterance vocabulary and the rules-based simulated user.

Both sides speak fixed templates: the agent has nine utterances (four
relational questions, one trap question, four movement commands) and the
user answers with yes/no confirmations, trap locations, a stuck-in-trap
notice, or the terminal "Complete". ``respond`` is the simulated user: it
evaluates questions against the grid and executes movement commands,
optionally flipping relational answers at a configured noise rate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import (
    Direction,
    EpisodeOverError,
    EpisodeState,
    MoveOutcome,
    Relation,
    TrapAnswerKind,
    apply_move,
    nearest_trap_answer,
    relational_answer,
)


class ParseError(ValueError):
    """A string outside the closed utterance vocabulary."""


class AgentUtterance(Enum):
    """The nine agent actions, in canonical index order (the Q-network's
    output order and the encoding's one-hot order)."""

    ASK_ABOVE = "Is the square above the circle?"
    ASK_BELOW = "Is the square below the circle?"
    ASK_RIGHT = "Is the square to the right of the circle?"
    ASK_LEFT = "Is the square to the left of the circle?"
    ASK_TRAP = "Where is the nearest trap?"
    MOVE_UP = "Move the square up"
    MOVE_DOWN = "Move the square down"
    MOVE_LEFT = "Move the square to the left"
    MOVE_RIGHT = "Move the square to the right"

    @property
    def text(self) -> str:
        return self.value

    @property
    def relation(self) -> Relation | None:
        return _RELATIONS.get(self)

    @property
    def direction(self) -> Direction | None:
        return _DIRECTIONS.get(self)

    @property
    def is_move(self) -> bool:
        return self in _DIRECTIONS

    @property
    def is_question(self) -> bool:
        return self not in _DIRECTIONS

    @property
    def is_trap_question(self) -> bool:
        return self is AgentUtterance.ASK_TRAP

    @property
    def index(self) -> int:
        return _AGENT_INDEX[self]


_RELATIONS = {
    AgentUtterance.ASK_ABOVE: Relation.ABOVE,
    AgentUtterance.ASK_BELOW: Relation.BELOW,
    AgentUtterance.ASK_RIGHT: Relation.RIGHT,
    AgentUtterance.ASK_LEFT: Relation.LEFT,
}

_DIRECTIONS = {
    AgentUtterance.MOVE_UP: Direction.UP,
    AgentUtterance.MOVE_DOWN: Direction.DOWN,
    AgentUtterance.MOVE_LEFT: Direction.LEFT,
    AgentUtterance.MOVE_RIGHT: Direction.RIGHT,
}

AGENT_VOCAB: tuple[AgentUtterance, ...] = tuple(AgentUtterance)
_AGENT_INDEX = {u: i for i, u in enumerate(AGENT_VOCAB)}


class UserKind(Enum):
    YES = "Yes"
    NO = "No"
    COMPLETE = "Complete"
    STUCK_IN_TRAP = "No - you are stuck in a trap"
    NO_TRAPS = "There are no traps in the scene"
    IN_ONE = "You're in one!"
    TRAP_OFFSET = "trap_offset"  # rendered from the offset template


_DIR_WORD = {d: d.value for d in Direction}
_WORD_DIR = {d.value: d for d in Direction}


@dataclass(frozen=True)
class UserUtterance:
    """One simulated-user response. Trap offsets carry one or two components
    of the "It is X moves D1 and Y moves D2" template; everything else is a
    fixed string."""

    kind: UserKind
    x: int | None = None
    d1: Direction | None = None
    y: int | None = None
    d2: Direction | None = None

    def __post_init__(self):
        if self.kind is UserKind.TRAP_OFFSET:
            if self.x is None or self.d1 is None or self.x < 1:
                raise ValueError("trap offset needs a first component with X >= 1")
            if (self.y is None) != (self.d2 is None):
                raise ValueError("second offset component needs both Y and D2")
            if self.y is not None and self.y < 1:
                raise ValueError("second offset component needs Y >= 1")
        elif self.x is not None or self.y is not None or self.d1 is not None or self.d2 is not None:
            raise ValueError(f"{self.kind.name} response takes no offset fields")

    @property
    def text(self) -> str:
        if self.kind is not UserKind.TRAP_OFFSET:
            return self.kind.value
        out = f"It is {self.x} moves {_DIR_WORD[self.d1]}"
        if self.y is not None:
            out += f" and {self.y} moves {_DIR_WORD[self.d2]}"
        return out

    def grid_offsets(self) -> tuple[int, int]:
        """Signed (dx, dy) cell offsets encoded by this response; (0, 0) for
        every non-offset response."""
        if self.kind is not UserKind.TRAP_OFFSET:
            return (0, 0)
        dx = dy = 0
        for count, direction in ((self.x, self.d1), (self.y, self.d2)):
            if count is None:
                continue
            ddx, ddy = direction.delta
            dx += count * ddx
            dy += count * ddy
        return (dx, dy)


def trap_offset_utterance(dx: int, dy: int) -> UserUtterance:
    """Build the offset response for signed cell offsets, horizontal
    component first. At least one offset must be nonzero."""
    if dx == 0 and dy == 0:
        raise ValueError("trap offset cannot be (0, 0); that case is IN_ONE")
    horam = (abs(dx), Direction.RIGHT if dx > 0 else Direction.LEFT) if dx else None
    vert = (abs(dy), Direction.UP if dy > 0 else Direction.DOWN) if dy else None
    first, second = (horam, vert) if horam else (vert, None)
    if first and second:
        return UserUtterance(UserKind.TRAP_OFFSET, x=first[0], d1=first[1], y=second[0], d2=second[1])
    return UserUtterance(UserKind.TRAP_OFFSET, x=first[0], d1=first[1])


YES = UserUtterance(UserKind.YES)
NO = UserUtterance(UserKind.NO)
COMPLETE = UserUtterance(UserKind.COMPLETE)
STUCK_IN_TRAP = UserUtterance(UserKind.STUCK_IN_TRAP)
NO_TRAPS = UserUtterance(UserKind.NO_TRAPS)
IN_ONE = UserUtterance(UserKind.IN_ONE)


def render(utterance: AgentUtterance | UserUtterance) -> str:
    """Canonical surface string for any vocabulary member."""
    return utterance.text


_FIXED_USER = {u.text: u for u in (YES, NO, COMPLETE, STUCK_IN_TRAP, NO_TRAPS, IN_ONE)}
_AGENT_BY_TEXT = {u.text: u for u in AGENT_VOCAB}
_OFFSET_RE = re.compile(
    r"It is (\d+) moves (up|down|left|right)(?: and (\d+) moves (up|down|left|right))?$"
)


def parse(text: str, max_offset: int = 5) -> AgentUtterance | UserUtterance:
    """Inverse of ``render``; rejects anything outside the closed vocabulary.

    ``max_offset`` bounds the X/Y integers of trap-offset responses (5 on the
    default 6x6 grid).
    """
    if text in _AGENT_BY_TEXT:
        return _AGENT_BY_TEXT[text]
    if text in _FIXED_USER:
        return _FIXED_USER[text]
    m = _OFFSET_RE.fullmatch(text)
    if m:
        x, d1, y, d2 = m.groups()
        x = int(x)
        if not 1 <= x <= max_offset:
            raise ParseError(f"offset count {x} outside 1..{max_offset}: {text!r}")
        if y is None:
            return UserUtterance(UserKind.TRAP_OFFSET, x=x, d1=_WORD_DIR[d1])
        y = int(y)
        if not 1 <= y <= max_offset:
            raise ParseError(f"offset count {y} outside 1..{max_offset}: {text!r}")
        return UserUtterance(UserKind.TRAP_OFFSET, x=x, d1=_WORD_DIR[d1], y=y, d2=_WORD_DIR[d2])
    raise ParseError(f"not in the utterance vocabulary: {text!r}")


@dataclass(frozen=True)
class NoiseConfig:
    """Answer-corruption model for the simulated user.

    Only plain yes/no answers are ever flipped; trap answers and the
    Complete/stuck signals stay clean so the conversation cannot
    desynchronize from the grid. Movement flips are off by default.
    """

    relational_flip: float = 0.0
    movement_flip: float = 0.0

    def __post_init__(self):
        for name in ("relational_flip", "movement_flip"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be a probability, got {rate}")


NO_NOISE = NoiseConfig()

_MOVE_RESPONSES = {
    MoveOutcome.MOVED: YES,
    MoveOutcome.BLOCKED: NO,
    MoveOutcome.COMPLETED: COMPLETE,
}


def respond(
    state: EpisodeState,
    utterance: AgentUtterance,
    noise: NoiseConfig = NO_NOISE,
    rng: np.random.Generator | None = None,
    *,
    stuck_as_no: bool = False,
) -> UserUtterance:
    """Simulated-user reply to one agent utterance; mutates ``state``.

    Questions are answered from the grid, movement commands are executed via
    ``apply_move``. Every call consumes one turn. ``stuck_as_no`` collapses
    the stuck-in-trap notice to a plain "No" (the strict table-of-utterances
    reading).
    """
    if state.done:
        raise EpisodeOverError("respond called on a finished episode")
    if (noise.relational_flip > 0 or noise.movement_flip > 0) and rng is None:
        raise ValueError("noisy responses need an rng")

    if utterance.is_move:
        outcome = apply_move(state, utterance.direction)
        if outcome is MoveOutcome.STUCK_IN_TRAP:
            answer = NO if stuck_as_no else STUCK_IN_TRAP
        else:
            answer = _MOVE_RESPONSES[outcome]
        if noise.movement_flip > 0 and answer.kind in (UserKind.YES, UserKind.NO):
            if rng.random() < noise.movement_flip:
                answer = NO if answer is YES else YES
        return answer

    if utterance.is_trap_question:
        trap = nearest_trap_answer(state)
        state.consume_turn()
        if trap.kind is TrapAnswerKind.NO_TRAPS:
            return NO_TRAPS
        if trap.kind is TrapAnswerKind.IN_ONE:
            return IN_ONE
        return trap_offset_utterance(trap.dx, trap.dy)

    truth = relational_answer(state, utterance.relation)
    state.consume_turn()
    if noise.relational_flip > 0 and rng.random() < noise.relational_flip:
        truth = not truth
    return YES if truth else NO


@dataclass
class Transcript:
    """Ordered (agent, user) exchanges for one episode."""

    turns: list[tuple[AgentUtterance, UserUtterance]] = field(default_factory=list)
    outcome: str = "ongoing"  # ongoing | success | failure

    def append(self, agent: AgentUtterance, user: UserUtterance) -> None:
        self.turns.append((agent, user))

    def __len__(self) -> int:
        return len(self.turns)


def episode_record(scene_id: str, transcript: Transcript, reward: float) -> dict:
    """JSON-serializable transcript record (one JSONL line per episode)."""
    return {
        "scene_id": scene_id,
        "turns": [[render(a), render(u)] for a, u in transcript.turns],
        "outcome": transcript.outcome,
        "reward": reward,
    }
