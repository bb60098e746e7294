"""Double-DQN training loop: experience replay, base and shaped rewards, the
linear epsilon schedule, the staged-difficulty curriculum, and metrics/
checkpoint emission.

The loop is a single logical writer over the network, the replay buffer, and
its RNG streams, so a run is reproducible bit-for-bit from (seed, dataset,
config). Scene sampling, action exploration, replay sampling, answer noise,
and weight init each draw from an independent child stream of the seed.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .agent import (
    N_ACTIONS,
    StateEncoding,
    assemble_batch,
    encode_state,
    load_embedding_table,
    network_spec,
    q_values,
    select_action,
)
from .dialogue import AGENT_VOCAB, NO_NOISE, NoiseConfig, Transcript, respond
from .grid import EpisodeState, MoveOutcome, Scene, manhattan_distances, solve_distances
from .neural import (
    AdamState,
    NonFiniteGradientError,
    QNetwork,
    adam_step,
    clip_global_norm,
    q_regression_loss,
    save_params,
)
from .scenes import DIFFICULTIES, SceneRecord

METRICS_HEADER = (
    "episode", "stage", "epsilon", "reward", "turns", "success",
    "questions", "moves", "trap_questions", "loss_mean",
)

CURRICULUM_STAGES: dict[int, tuple[str, ...]] = {
    1: ("short",),
    2: ("short", "medium"),
    3: ("short", "medium", "long"),
}


class TrainingDivergedError(RuntimeError):
    """Loss or gradients went non-finite; a diagnostic checkpoint is written
    first when an output directory is available."""


@dataclass
class TrainConfig:
    """Training hyperparameters. Defaults are the full-scale setting; desk
    runs shrink episodes/anneal/batch via flags or a config file."""

    episodes: int = 1000
    seed: int = 0
    arch: str = "lstm"
    dtype: str = "f64"
    gamma: float = 0.9
    eps_start: float = 0.2
    eps_end: float = 0.01
    anneal_episodes: int = 1_150_000
    batch_size: int = 512
    replay_capacity: int = 51_200
    learning_rate: float = 1e-4
    turn_limit: int = 30
    reward_mode: str = "base"  # base | shaped
    question_bonus: float = 0.2
    approach_bonus: float = 0.5
    approach_metric: str = "oracle"  # oracle | manhattan
    curriculum: bool = True
    curriculum_threshold: float = 10.0
    curriculum_window: int = 500
    target_sync: int = 1000
    update_cadence: str = "action"  # action | episode
    grad_clip: float = 10.0
    noise: float = 0.0
    stuck_as_no: bool = False
    padded_actions: int | None = None  # widen Q output with inert slots (e.g. 14)
    embedding_table: str | None = None
    checkpoint_every: int = 0  # episodes between checkpoints; 0 = final only
    greedy_probe: bool = False
    probe_window: int = 100
    probe_stop: float | None = None  # early-stop threshold on trailing probe success

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must not exceed eps_start")
        if self.anneal_episodes < 1:
            raise ValueError("anneal_episodes must be positive")
        if self.reward_mode not in ("base", "shaped"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if not (self.question_bonus < 1.0 and self.approach_bonus < 1.0):
            raise ValueError("shaping bonuses must stay below 1 so steps stay net-negative")
        if self.approach_metric not in ("oracle", "manhattan"):
            raise ValueError(f"unknown approach metric {self.approach_metric!r}")
        if self.update_cadence not in ("action", "episode"):
            raise ValueError(f"unknown update cadence {self.update_cadence!r}")
        if self.padded_actions is not None and self.padded_actions < N_ACTIONS:
            raise ValueError(f"padded_actions must be >= {N_ACTIONS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**obj)

    @property
    def action_count(self) -> int:
        return self.padded_actions or N_ACTIONS


@dataclass
class Transition:
    """One replay record: conversation prefix, the action taken, its reward,
    the extended prefix, and whether the episode ended there."""

    state: StateEncoding
    action: int
    reward: float
    next_state: StateEncoding
    terminal: bool


class ReplayBuffer:
    """FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._pos = 0

    def append(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._pos] = item
            self._pos = (self._pos + 1) % self.capacity

    def sample(self, rng: np.random.Generator, k: int) -> list[Transition]:
        if k > len(self._items):
            raise ValueError(f"cannot sample {k} of {len(self._items)} transitions")
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[int(i)] for i in idx]

    def __len__(self) -> int:
        return len(self._items)


def step_reward(
    outcome: MoveOutcome | None,
    turn: int,
    turn_limit: int,
    mode: str = "base",
    *,
    question_bonus: float = 0.2,
    approach_bonus: float = 0.5,
    distances: dict | None = None,
    prev_square=None,
    new_square=None,
) -> float:
    """Reward for one agent action; ``outcome`` is None for questions.

    Base mode: completing action +60, any other action -1, with an extra -30
    when that action exhausts the turn limit without completing. Shaped mode
    adds ``question_bonus`` to questions and ``approach_bonus`` to successful
    moves that strictly reduce the distance map value.
    """
    if outcome is MoveOutcome.COMPLETED:
        reward = 60.0
    else:
        reward = -1.0
        if turn >= turn_limit:
            reward -= 30.0
    if mode == "shaped":
        if outcome is None:
            reward += question_bonus
        elif outcome in (MoveOutcome.MOVED, MoveOutcome.COMPLETED) and distances is not None:
            before = distances.get(prev_square, math.inf)
            after = distances.get(new_square, math.inf)
            if after < before:
                reward += approach_bonus
    return reward


def epsilon_at(episode: int, config: TrainConfig) -> float:
    """Linear anneal from eps_start at episode 0 to eps_end at
    anneal_episodes, constant afterwards.

    Interpolated in exact decimal arithmetic so published schedule points
    (0.2, 0.105, 0.01) come out as their decimal values, not 1-ulp neighbors.
    """
    if episode < 0:
        raise ValueError("episode must be non-negative")
    if episode >= config.anneal_episodes:
        return config.eps_end
    start = Fraction(str(config.eps_start))
    end = Fraction(str(config.eps_end))
    return float(start + (end - start) * Fraction(episode, config.anneal_episodes))


def curriculum_advance(history, stage: int, config: TrainConfig) -> int:
    """Advance one stage when the trailing window of per-episode rewards in
    the current stage is full and its mean strictly exceeds the threshold.
    Never skips or regresses."""
    if stage >= max(CURRICULUM_STAGES):
        return stage
    window = config.curriculum_window
    recent = list(history)[-window:]
    if len(recent) < window:
        return stage
    if sum(recent) / window > config.curriculum_threshold:
        return stage + 1
    return stage


def double_dqn_target(
    reward: float,
    next_state: StateEncoding,
    terminal: bool,
    online: QNetwork,
    target: QNetwork,
    gamma: float,
) -> float:
    """r for terminal transitions, else r + gamma * Q_target(s', argmax_a
    Q_online(s', a))."""
    if terminal:
        return float(reward)
    qo = q_values(online, next_state)
    best = int(np.argmax(qo[:N_ACTIONS]))
    qt = q_values(target, next_state)
    return float(reward + gamma * qt[best])


def batch_targets(
    batch: list[Transition], online: QNetwork, target: QNetwork, gamma: float
) -> np.ndarray:
    """Vectorized double-DQN targets for a replay batch."""
    targets = np.array([t.reward for t in batch], dtype=np.float64)
    live = [i for i, t in enumerate(batch) if not t.terminal]
    if live:
        x, lengths, aux = assemble_batch([batch[i].next_state for i in live], online.spec)
        qo, _ = online.forward(x, lengths, aux)
        qt, _ = target.forward(x, lengths, aux)
        best = np.argmax(qo[:, :N_ACTIONS], axis=1)
        targets[live] += gamma * qt[np.arange(len(live)), best].astype(np.float64)
    return targets


@dataclass
class EpisodeResult:
    success: bool
    reward: float
    turns: int
    questions: int
    moves: int
    trap_questions: int
    transcript: Transcript
    transitions: list[Transition] = field(default_factory=list)


def run_episode(
    net: QNetwork,
    scene: Scene,
    *,
    epsilon: float,
    turn_limit: int | None = None,
    rng: np.random.Generator | None = None,
    noise: NoiseConfig = NO_NOISE,
    noise_rng: np.random.Generator | None = None,
    reward_mode: str = "base",
    question_bonus: float = 0.2,
    approach_bonus: float = 0.5,
    approach_metric: str = "oracle",
    stuck_as_no: bool = False,
    collect_transitions: bool = False,
    table=None,
) -> EpisodeResult:
    """Roll out one episode of the agent conversing with the simulated user.

    The turn limit is baked into the network's aux encoding, so it defaults
    to (and must match) the network spec's.
    """
    if turn_limit is None:
        turn_limit = net.spec.turn_limit
    elif turn_limit != net.spec.turn_limit:
        raise ValueError(
            f"episode turn limit {turn_limit} != network turn limit {net.spec.turn_limit}"
        )
    state = EpisodeState(scene, turn_limit=turn_limit)
    transcript = Transcript()
    dtype = np.float64 if net.spec.dtype == "f64" else np.float32
    enc = encode_state([], turn_limit, dtype=dtype, table=table)
    distances = None
    if reward_mode == "shaped":
        distances = solve_distances(scene) if approach_metric == "oracle" else manhattan_distances(scene)
    total = 0.0
    questions = moves = trap_questions = 0
    transitions: list[Transition] = []

    while not state.done:
        q = q_values(net, enc)
        action = select_action(q, epsilon, rng, n_valid=N_ACTIONS)
        utterance = AGENT_VOCAB[action]
        prev_square = state.square
        user = respond(state, utterance, noise, noise_rng, stuck_as_no=stuck_as_no)
        if utterance.is_move:
            moves += 1
            if state.succeeded:
                outcome = MoveOutcome.COMPLETED
            elif state.square != prev_square:
                outcome = MoveOutcome.MOVED
            else:
                outcome = MoveOutcome.BLOCKED  # covers stuck-in-trap too; same reward
        else:
            questions += 1
            trap_questions += utterance.is_trap_question
            outcome = None
        reward = step_reward(
            outcome,
            state.turn,
            turn_limit,
            reward_mode,
            question_bonus=question_bonus,
            approach_bonus=approach_bonus,
            distances=distances,
            prev_square=prev_square,
            new_square=state.square,
        )
        total += reward
        transcript.append(utterance, user)
        next_enc = encode_state(transcript.turns, turn_limit, dtype=dtype, table=table)
        if collect_transitions:
            transitions.append(Transition(enc, action, reward, next_enc, state.done))
        enc = next_enc

    transcript.outcome = "success" if state.succeeded else "failure"
    return EpisodeResult(
        success=state.succeeded,
        reward=total,
        turns=state.turn,
        questions=questions,
        moves=moves,
        trap_questions=trap_questions,
        transcript=transcript,
        transitions=transitions,
    )


@dataclass
class TrainResult:
    config: TrainConfig
    episodes: list[dict]
    net: QNetwork
    adam: AdamState
    stage_changes: list[tuple[int, int]]
    checkpoint_path: str | None = None
    metrics_path: str | None = None


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in METRICS_HEADER])


def _gather_rng_states(rngs: dict) -> dict:
    return {name: rng.bit_generator.state for name, rng in rngs.items()}


def train(
    records: list[SceneRecord],
    config: TrainConfig,
    *,
    out_dir: str | Path | None = None,
    metrics_path: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> TrainResult:
    """Run the per-episode double-DQN loop over the train split.

    Per episode: sample a scene uniformly from the admitted difficulties,
    roll out epsilon-greedily against the simulated user, push one transition
    per action, and (once the buffer holds a full batch) regress the online
    net toward the double-DQN target after every action, syncing the target
    network every ``target_sync`` gradient steps.
    """
    train_records = [r for r in records if r.split == "train"]
    if not train_records:
        raise ValueError("dataset has no train-split records")
    pools = {d: [r for r in train_records if r.difficulty == d] for d in DIFFICULTIES}
    if config.curriculum:
        missing = [d for d in DIFFICULTIES if not pools[d]]
        if missing:
            raise ValueError(f"curriculum needs every difficulty in the train split; missing {missing}")
    stage_pools = {
        stage: [r for d in admitted for r in pools[d]]
        for stage, admitted in CURRICULUM_STAGES.items()
    }

    table = load_embedding_table(config.embedding_table) if config.embedding_table else None
    turn_width = table.turn_width if table else None
    spec = network_spec(
        config.arch,
        actions=config.action_count,
        turn_limit=config.turn_limit,
        dtype=config.dtype,
        **({"turn_width": turn_width} if turn_width else {}),
    )

    ss = np.random.SeedSequence(config.seed)
    net_seed, scene_seed, action_seed, replay_seed, noise_seed = ss.spawn(5)
    rngs = {
        "scene": np.random.default_rng(scene_seed),
        "action": np.random.default_rng(action_seed),
        "replay": np.random.default_rng(replay_seed),
        "noise": np.random.default_rng(noise_seed),
    }

    episode0 = 0
    adam = AdamState(lr=config.learning_rate)
    if resume_from is not None:
        from .neural import load_params  # local import keeps module load light

        online, loaded_adam, meta = load_params(resume_from, expect_spec=spec)
        if loaded_adam is not None:
            adam = loaded_adam
        episode0 = int(meta["episode"])
        if meta.get("rng_state"):
            for name, saved in meta["rng_state"].items():
                if name in rngs:
                    rngs[name].bit_generator.state = saved
    else:
        online = QNetwork(spec, seed=net_seed)
    target = online.clone()

    noise_cfg = NoiseConfig(relational_flip=config.noise)
    buffer = ReplayBuffer(config.replay_capacity)
    stage = 1 if config.curriculum else max(CURRICULUM_STAGES)
    stage_window: deque = deque(maxlen=config.curriculum_window)
    grad_steps = 0
    episodes_out: list[dict] = []
    stage_changes: list[tuple[int, int]] = []
    probe_history: deque = deque(maxlen=config.probe_window)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if metrics_path is None:
            metrics_path = out_dir / "metrics.csv"

    csv_fh = None
    csv_writer = None
    if metrics_path is not None:
        csv_fh = open(metrics_path, "w", newline="")
        csv_writer = csv.writer(csv_fh, lineterminator="\n")
        csv_writer.writerow(METRICS_HEADER)

    def do_update() -> float:
        nonlocal grad_steps
        batch = buffer.sample(rngs["replay"], config.batch_size)
        targets = batch_targets(batch, online, target, config.gamma)
        x, lengths, aux = assemble_batch([t.state for t in batch], spec)
        actions = np.array([t.action for t in batch], dtype=np.int64)
        loss, grads, _ = q_regression_loss(online, x, lengths, aux, actions, targets)
        if not math.isfinite(loss):
            raise NonFiniteGradientError(f"loss went non-finite ({loss})")
        clip_global_norm(grads, config.grad_clip)
        adam_step(online.params(), grads, adam)
        grad_steps += 1
        if config.target_sync > 0 and grad_steps % config.target_sync == 0:
            target.copy_params_from(online)
        return loss

    def checkpoint(path: Path, episode: int) -> None:
        save_params(online, adam, path, episode=episode, rng_state=_gather_rng_states(rngs))

    try:
        final_episode = episode0
        for episode in range(episode0, episode0 + config.episodes):
            final_episode = episode + 1
            eps = epsilon_at(episode, config)
            pool = stage_pools[stage]
            record = pool[int(rngs["scene"].integers(0, len(pool)))]
            try:
                result = run_episode(
                    online,
                    record.scene,
                    epsilon=eps,
                    turn_limit=config.turn_limit,
                    rng=rngs["action"],
                    noise=noise_cfg,
                    noise_rng=rngs["noise"],
                    reward_mode=config.reward_mode,
                    question_bonus=config.question_bonus,
                    approach_bonus=config.approach_bonus,
                    approach_metric=config.approach_metric,
                    stuck_as_no=config.stuck_as_no,
                    collect_transitions=True,
                    table=table,
                )
                losses = []
                for transition in result.transitions:
                    buffer.append(transition)
                    if config.update_cadence == "action" and len(buffer) >= config.batch_size:
                        losses.append(do_update())
                if config.update_cadence == "episode" and len(buffer) >= config.batch_size:
                    losses.append(do_update())
            except NonFiniteGradientError as exc:
                if out_dir is not None:
                    checkpoint(out_dir / "diverged.ckpt", episode)
                raise TrainingDivergedError(
                    f"training diverged at episode {episode}: {exc}"
                ) from exc

            row = {
                "episode": episode,
                "stage": stage,
                "epsilon": eps,
                "reward": result.reward,
                "turns": result.turns,
                "success": result.success,
                "questions": result.questions,
                "moves": result.moves,
                "trap_questions": result.trap_questions,
                "loss_mean": (sum(losses) / len(losses)) if losses else None,
            }
            if config.greedy_probe:
                probe = run_episode(
                    online,
                    record.scene,
                    epsilon=0.0,
                    turn_limit=config.turn_limit,
                    stuck_as_no=config.stuck_as_no,
                    table=table,
                )
                row["probe_success"] = probe.success
                probe_history.append(probe.success)
            episodes_out.append(row)
            if csv_writer is not None:
                csv_writer.writerow([_fmt(row[k]) for k in METRICS_HEADER])

            stage_window.append(result.reward)
            if config.curriculum:
                new_stage = curriculum_advance(stage_window, stage, config)
                if new_stage != stage:
                    stage_changes.append((episode, new_stage))
                    stage = new_stage
                    stage_window.clear()

            if (
                out_dir is not None
                and config.checkpoint_every > 0
                and (episode + 1 - episode0) % config.checkpoint_every == 0
            ):
                checkpoint(out_dir / f"checkpoint-ep{episode + 1}.ckpt", episode + 1)

            if (
                config.probe_stop is not None
                and len(probe_history) == config.probe_window
                and sum(probe_history) / config.probe_window >= config.probe_stop
            ):
                break
    finally:
        if csv_fh is not None:
            csv_fh.close()

    checkpoint_path = None
    if out_dir is not None:
        checkpoint_path = out_dir / "checkpoint.ckpt"
        checkpoint(checkpoint_path, final_episode)

    return TrainResult(
        config=config,
        episodes=episodes_out,
        net=online,
        adam=adam,
        stage_changes=stage_changes,
        checkpoint_path=str(checkpoint_path) if checkpoint_path else None,
        metrics_path=str(metrics_path) if metrics_path else None,
    )
