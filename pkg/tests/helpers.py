"""Independent test oracles: exhaustive command-sequence search, flood-fill
reachability, and a naive layer-by-layer network forward. These deliberately
avoid the library's own shortest-path and vectorized-forward code paths."""

from collections import deque

import numpy as np

from gridtalk.grid import Direction, EpisodeState, MoveOutcome, Position, Scene, apply_move


def brute_force_solve_length(scene: Scene, cap: int = 64):
    """Minimum number of movement commands to completion, by breadth-first
    search over (square, trap_lock) states driven through apply_move itself.
    Returns None when no command sequence completes within ``cap`` moves."""
    start = (scene.square, 0)
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        (pos, lock), depth = queue.popleft()
        if depth >= cap:
            continue
        for direction in Direction:
            st = EpisodeState(scene, turn_limit=cap + 4)
            st.square, st.trap_lock = pos, lock
            outcome = apply_move(st, direction)
            if outcome is MoveOutcome.COMPLETED:
                return depth + 1
            key = (st.square, st.trap_lock)
            if key not in seen:
                seen.add(key)
                queue.append((key, depth + 1))
    return None


def flood_fill_solvable(scene: Scene) -> bool:
    """Reachability of the circle from the square through non-obstacle cells
    (traps are passable)."""
    seen = {scene.square}
    queue = deque([scene.square])
    while queue:
        pos = queue.popleft()
        if pos == scene.circle:
            return True
        for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nb = Position(pos.x + dx, pos.y + dy)
            if scene.passable(nb) and nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return False


def _sig(z):
    return 1.0 / (1.0 + np.exp(-z))


def naive_lstm_forward(net, seq: np.ndarray, aux: np.ndarray) -> np.ndarray:
    """Straightforward single-sample re-implementation of the LSTM network's
    forward pass from its parameter arrays (plain loops, textbook formulas)."""
    p = net.params()
    H = net.spec.hidden
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(seq.shape[0]):
        z = seq[t] @ p["enc.lstm.Wx"] + h @ p["enc.lstm.Wh"] + p["enc.lstm.b"]
        i, f, g, o = z[:H], z[H : 2 * H], z[2 * H : 3 * H], z[3 * H :]
        i, f, g, o = _sig(i), _sig(f), np.tanh(g), _sig(o)
        c = f * c + i * g
        h = o * np.tanh(c)
    x = np.concatenate([h, aux])
    for layer in range(3):
        x = x @ p[f"head.{layer}.W"] + p[f"head.{layer}.b"]
        if layer < 2:
            x = np.maximum(x, 0)
    return x


def set_constant_q(net, q_row) -> None:
    """Zero every parameter and pin the final bias so the network outputs the
    same Q-vector for every input."""
    for arr in net.params().values():
        arr[...] = 0.0
    net.params()["head.2.b"][...] = np.asarray(q_row, dtype=net.dtype)
