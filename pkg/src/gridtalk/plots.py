"""Figure rendering for the report paths: training curves from a metrics CSV
and a summary figure for an evaluation report, written as PNG files next to
the delimited outputs."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import moving_average

_SAVEFIG = {"dpi": 120, "metadata": {"Software": None}}


def read_metrics_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "episode": int(row["episode"]),
                    "stage": int(row["stage"]),
                    "epsilon": float(row["epsilon"]),
                    "reward": float(row["reward"]),
                    "turns": int(row["turns"]),
                    "success": bool(int(row["success"])),
                    "questions": int(row["questions"]),
                    "moves": int(row["moves"]),
                    "trap_questions": int(row["trap_questions"]),
                    "loss_mean": float(row["loss_mean"]) if row["loss_mean"] else None,
                }
            )
    return rows


def plot_training_curves(rows: list[dict], out_path: str | Path, window: int = 500) -> Path:
    """Moving-average success rate and reward over episodes, with dashed
    markers where the curriculum admitted a new difficulty."""
    out_path = Path(out_path)
    episodes = [r["episode"] for r in rows]
    window = max(1, min(window, len(rows)))
    succ = moving_average([1.0 if r["success"] else 0.0 for r in rows], window)
    rew = moving_average([r["reward"] for r in rows], window)
    xs = episodes[window - 1 :]
    stage_starts = [r["episode"] for prev, r in zip(rows, rows[1:]) if r["stage"] != prev["stage"]]

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(xs, succ, color="tab:blue")
    ax1.set_ylabel(f"success rate ({window}-ep mean)")
    ax1.set_ylim(-0.02, 1.02)
    ax2.plot(xs, rew, color="tab:orange")
    ax2.set_ylabel(f"reward ({window}-ep mean)")
    ax2.set_xlabel("episode")
    for ax in (ax1, ax2):
        for x in stage_starts:
            ax.axvline(x, color="black", linestyle="--", linewidth=0.8)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)
    return out_path


def plot_eval_report(report: dict, out_path: str | Path) -> Path:
    """Per-difficulty success bars plus the overall action/question mix."""
    out_path = Path(out_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.5))

    per_difficulty = report.get("per_difficulty", {})
    names = list(per_difficulty)
    rates = [per_difficulty[d]["success_rate"] for d in names]
    ax1.bar(names, rates, color="tab:blue")
    ax1.axhline(report["success_rate"], color="black", linestyle="--", linewidth=0.8,
                label=f"overall {report['success_rate']:.2f}")
    ax1.set_ylim(0, 1.05)
    ax1.set_ylabel("success rate")
    ax1.legend(fontsize=8)

    mix = [report["fraction_moves"], report["fraction_questions"]]
    ax2.bar(["moves", "questions"], mix, color=["tab:orange", "tab:green"])
    ax2.set_ylim(0, 1.05)
    ax2.set_ylabel("fraction of utterances")
    trap_share = report["fraction_trap_questions"]
    ax2.set_title(f"trap share of questions: {trap_share:.2f}", fontsize=9)

    fig.tight_layout()
    fig.savefig(out_path, **_SAVEFIG)
    plt.close(fig)
    return out_path
