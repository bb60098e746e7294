"""Conversation-state encoding and the Q-network architecture variants.

Each completed turn becomes a fixed 19-wide vector: agent-action one-hot (9)
+ user-response-type one-hot (8, including a None slot used only for padding
rows) + two signed trap-offset numerics scaled by 1/5. The full state is the
turn sequence plus auxiliary features: a one-hot of the current turn number
and the scalar turn/turn_limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dialogue import AGENT_VOCAB, AgentUtterance, UserKind, UserUtterance, render
from .neural import NetworkSpec, QNetwork, ShapeError

RESPONSE_TYPES: tuple[UserKind, ...] = (
    UserKind.YES,
    UserKind.NO,
    UserKind.COMPLETE,
    UserKind.STUCK_IN_TRAP,
    UserKind.NO_TRAPS,
    UserKind.IN_ONE,
    UserKind.TRAP_OFFSET,
)
_RESPONSE_INDEX = {k: i for i, k in enumerate(RESPONSE_TYPES)}
NONE_RESPONSE_SLOT = len(RESPONSE_TYPES)  # padding rows only

N_ACTIONS = len(AGENT_VOCAB)
TURN_WIDTH = N_ACTIONS + len(RESPONSE_TYPES) + 1 + 2  # 9 + 8 + 2 = 19
OFFSET_SCALE = 5.0

# Published constant for the default LSTM agent; guards architecture drift.
DEFAULT_LSTM_PARAM_COUNT = 25_929


@dataclass
class StateEncoding:
    """Encoded conversation prefix: one row per completed turn plus the aux
    turn-counter features."""

    turns: np.ndarray  # (T, TURN_WIDTH)
    aux: np.ndarray  # (turn_limit + 1,)

    def __len__(self) -> int:
        return self.turns.shape[0]


def encode_turn(
    agent: AgentUtterance, user: UserUtterance, dtype=np.float64, table: "EmbeddingTable | None" = None
) -> np.ndarray:
    if table is not None:
        return table.encode_turn(agent, user).astype(dtype)
    row = np.zeros(TURN_WIDTH, dtype=dtype)
    row[agent.index] = 1.0
    row[N_ACTIONS + _RESPONSE_INDEX[user.kind]] = 1.0
    dx, dy = user.grid_offsets()
    row[TURN_WIDTH - 2] = dx / OFFSET_SCALE
    row[TURN_WIDTH - 1] = dy / OFFSET_SCALE
    return row


def padding_row(dtype=np.float64, width: int = TURN_WIDTH) -> np.ndarray:
    """The all-None turn used to pad fixed-width histories (DNN/CNN input)."""
    row = np.zeros(width, dtype=dtype)
    if width == TURN_WIDTH:
        row[N_ACTIONS + NONE_RESPONSE_SLOT] = 1.0
    return row


def encode_state(
    turns: list[tuple[AgentUtterance, UserUtterance]],
    turn_limit: int = 30,
    dtype=np.float64,
    table: "EmbeddingTable | None" = None,
) -> StateEncoding:
    """Deterministic encoding of a transcript prefix.

    The aux one-hot marks the current turn (clamped to the last slot when the
    transcript already fills the limit); the trailing scalar is
    turns/turn_limit.
    """
    if len(turns) > turn_limit:
        raise ValueError(f"transcript has {len(turns)} turns, over the limit {turn_limit}")
    width = TURN_WIDTH if table is None else table.turn_width
    seq = np.zeros((len(turns), width), dtype=dtype)
    for i, (agent, user) in enumerate(turns):
        seq[i] = encode_turn(agent, user, dtype=dtype, table=table)
    aux = np.zeros(turn_limit + 1, dtype=dtype)
    aux[min(len(turns), turn_limit - 1)] = 1.0
    aux[turn_limit] = len(turns) / turn_limit
    return StateEncoding(turns=seq, aux=aux)


def assemble_batch(states: list[StateEncoding], spec: NetworkSpec):
    """Pad a list of encodings into (x, lengths, aux) arrays for the network.

    LSTM input is padded to the longest sequence in the batch (masked by
    lengths); DNN/CNN input is padded to the fixed turn_limit with all-None
    rows.
    """
    if not states:
        raise ShapeError("empty batch")
    dtype = np.float64 if spec.dtype == "f64" else np.float32
    lengths = np.array([len(s) for s in states], dtype=np.int64)
    if spec.arch == "lstm":
        t_pad = max(1, int(lengths.max()))
        x = np.zeros((len(states), t_pad, spec.turn_width), dtype=dtype)
    else:
        t_pad = spec.turn_limit
        x = np.tile(padding_row(dtype, spec.turn_width), (len(states), t_pad, 1))
    aux = np.zeros((len(states), spec.aux_width), dtype=dtype)
    for i, s in enumerate(states):
        n = len(s)
        if n > t_pad:
            raise ShapeError(f"encoding has {n} turns, over the padded length {t_pad}")
        if n:
            x[i, :n, :] = s.turns
        aux[i] = s.aux
    return x, lengths, aux


def network_spec(
    arch: str,
    *,
    actions: int = N_ACTIONS,
    turn_limit: int = 30,
    dtype: str = "f64",
    turn_width: int = TURN_WIDTH,
) -> NetworkSpec:
    """Architecture spec for one of the three agent variants at the standard
    dimensions (LSTM/dense width 64, head 32+32, conv 64/32 with kernel 3 and
    pool 2)."""
    return NetworkSpec(
        arch=arch,
        turn_width=turn_width,
        aux_width=turn_limit + 1,
        actions=actions,
        turn_limit=turn_limit,
        dtype=dtype,
    )


def build_network(arch: str, seed: int = 0, **kwargs) -> QNetwork:
    return QNetwork(network_spec(arch, **kwargs), seed=seed)


def q_values(net: QNetwork, state: StateEncoding) -> np.ndarray:
    """Q-vector over the agent vocabulary for a single encoded state."""
    x, lengths, aux = assemble_batch([state], net.spec)
    q, _ = net.forward(x, lengths, aux)
    return q[0]


def select_action(
    q: np.ndarray,
    epsilon: float,
    rng: np.random.Generator | None = None,
    n_valid: int | None = None,
) -> int:
    """Epsilon-greedy pick: uniform over the first ``n_valid`` actions with
    probability epsilon, else their argmax (lowest index wins ties). With
    epsilon 0 no randomness is consumed."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    q = np.asarray(q)
    n = q.shape[0] if n_valid is None else n_valid
    if q.ndim != 1 or n < 1 or n > q.shape[0]:
        raise ValueError(f"need a non-empty 1-D Q-vector with n_valid <= {q.shape}, got n={n}")
    if epsilon > 0.0:
        if rng is None:
            raise ValueError("epsilon > 0 needs an rng")
        if rng.random() < epsilon:
            return int(rng.integers(0, n))
    return int(np.argmax(q[:n]))


class EmbeddingTable:
    """Optional pluggable turn encoder backed by an utterance -> vector table
    (TSV: utterance text, tab, whitespace-separated floats). A turn encodes
    as the agent vector concatenated with the user vector."""

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise ValueError("empty embedding table")
        widths = {v.shape[0] for v in vectors.values()}
        if len(widths) != 1:
            raise ValueError(f"inconsistent embedding widths: {sorted(widths)}")
        self.vectors = vectors
        self.width = widths.pop()
        self.turn_width = 2 * self.width

    def _lookup(self, text: str) -> np.ndarray:
        try:
            return self.vectors[text]
        except KeyError:
            raise KeyError(f"utterance not in embedding table: {text!r}") from None

    def encode_turn(self, agent: AgentUtterance, user: UserUtterance) -> np.ndarray:
        return np.concatenate([self._lookup(render(agent)), self._lookup(render(user))])


def load_embedding_table(path) -> EmbeddingTable:
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'utterance<TAB>floats'")
            text, _, values = line.partition("\t")
            try:
                vec = np.array([float(v) for v in values.split()], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: bad float: {exc}") from exc
            if vec.size == 0:
                raise ValueError(f"{path}: line {lineno}: empty vector")
            vectors[text] = vec
    return EmbeddingTable(vectors)
