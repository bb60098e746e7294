"""Greedy-policy evaluation on held-out scenes and curve utilities.

Evaluation rolls out the network with epsilon 0 against the simulated user,
scores episodes with base rewards, and aggregates success rate, rewards,
turn counts, the action/question mix, and a per-difficulty breakdown. It is
deterministic given the network, the scene list, and the noise seed, and
never mutates either."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dialogue import NoiseConfig
from .neural import QNetwork
from .scenes import DIFFICULTIES, SceneRecord
from .training import EpisodeResult, run_episode


@dataclass
class EvalReport:
    episodes: int
    success_rate: float
    avg_reward: float
    avg_reward_successful: float | None
    avg_turns: float
    fraction_moves: float
    fraction_questions: float
    fraction_trap_questions: float
    per_difficulty: dict[str, dict]
    noise: float
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(
    net: QNetwork,
    records: list[SceneRecord],
    *,
    noise: float = 0.0,
    seed: int = 0,
    turn_limit: int | None = None,
    stuck_as_no: bool = False,
    table=None,
    transcripts_out: list | None = None,
    results_out: list | None = None,
) -> EvalReport:
    """One greedy episode per scene. Pass ``transcripts_out`` to also collect
    (scene_id, transcript, reward) triples for a JSONL dump, or
    ``results_out`` for (record, EpisodeResult) pairs."""
    if not records:
        raise ValueError("no scenes to evaluate")
    noise_cfg = NoiseConfig(relational_flip=noise)
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(9,)))
    results: list[tuple[SceneRecord, EpisodeResult]] = []
    for record in records:
        result = run_episode(
            net,
            record.scene,
            epsilon=0.0,
            turn_limit=turn_limit,
            noise=noise_cfg,
            noise_rng=noise_rng,
            stuck_as_no=stuck_as_no,
            table=table,
        )
        results.append((record, result))
        if transcripts_out is not None:
            transcripts_out.append((record.id, result.transcript, result.reward))
        if results_out is not None:
            results_out.append((record, result))

    n = len(results)
    rewards = [r.reward for _, r in results]
    successes = [r for _, r in results if r.success]
    questions = sum(r.questions for _, r in results)
    moves = sum(r.moves for _, r in results)
    trap_questions = sum(r.trap_questions for _, r in results)
    utterances = questions + moves

    per_difficulty = {}
    for difficulty in DIFFICULTIES:
        group = [r for rec, r in results if rec.difficulty == difficulty]
        if not group:
            continue
        per_difficulty[difficulty] = {
            "episodes": len(group),
            "success_rate": sum(r.success for r in group) / len(group),
            "avg_reward": sum(r.reward for r in group) / len(group),
        }

    return EvalReport(
        episodes=n,
        success_rate=len(successes) / n,
        avg_reward=sum(rewards) / n,
        avg_reward_successful=(sum(r.reward for r in successes) / len(successes)) if successes else None,
        avg_turns=sum(r.turns for _, r in results) / n,
        fraction_moves=moves / utterances if utterances else 0.0,
        fraction_questions=questions / utterances if utterances else 0.0,
        fraction_trap_questions=trap_questions / questions if questions else 0.0,
        per_difficulty=per_difficulty,
        noise=noise,
        seed=seed,
    )


_MEAN_FIELDS = (
    "success_rate", "avg_reward", "avg_turns",
    "fraction_moves", "fraction_questions", "fraction_trap_questions",
)


def mean_report(reports: list[EvalReport]) -> dict:
    """Field-wise mean over runs (the paper-style average of repeated
    hold-out tests)."""
    if not reports:
        raise ValueError("nothing to average")
    out = {"runs": len(reports), "episodes": reports[0].episodes}
    for name in _MEAN_FIELDS:
        out[name] = sum(getattr(r, name) for r in reports) / len(reports)
    with_success = [r.avg_reward_successful for r in reports if r.avg_reward_successful is not None]
    out["avg_reward_successful"] = sum(with_success) / len(with_success) if with_success else None
    return out


def best_report(reports: list[EvalReport]) -> dict:
    """The single run with the highest success rate."""
    best = max(reports, key=lambda r: r.success_rate)
    return best.to_dict()


def episode_rows(results: list) -> list[dict]:
    """Per-episode rows in the trainer's metrics-CSV schema (greedy rollouts:
    epsilon 0, all difficulties admitted, no loss)."""
    rows = []
    for index, (record, result) in enumerate(results):
        rows.append(
            {
                "episode": index,
                "stage": 3,
                "epsilon": 0.0,
                "reward": result.reward,
                "turns": result.turns,
                "success": result.success,
                "questions": result.questions,
                "moves": result.moves,
                "trap_questions": result.trap_questions,
                "loss_mean": None,
            }
        )
    return rows


def moving_average(series, window: int) -> np.ndarray:
    """Trailing mean, emitted only once the window is full (output length
    len(series) - window + 1)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    arr = np.asarray(series, dtype=np.float64)
    if arr.size < window:
        return np.empty(0, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(arr)])
    return (csum[window:] - csum[:-window]) / window
