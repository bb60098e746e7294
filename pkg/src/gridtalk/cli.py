"""Command-line entry point wiring all modules together.

Subcommands: gen-data, train, eval, oracle, play-local, serve. Every run
that produces files also writes a manifest (full config, seed, version)
beside them, so any artifact can be regenerated exactly. GRIDTALK_SEED
overrides the default seed when a --seed flag is omitted. Exit codes:
0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import write_json
from .scenes import (
    GenConfig,
    build_dataset,
    read_scenes,
    write_scenes,
)


class UsageError(ValueError):
    pass


def _default_seed() -> int:
    env = os.environ.get("GRIDTALK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"GRIDTALK_SEED must be an integer, got {env!r}") from exc
    return 0


def _resolve_seed(value: int | None) -> int:
    return _default_seed() if value is None else value


def _manifest(command: str, seed: int, params: dict) -> dict:
    return {"command": command, "version": __version__, "seed": seed, "params": params}


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        w, _, h = text.lower().partition("x")
        return int(w), int(h)
    except ValueError as exc:
        raise UsageError(f"--grid expects WxH (e.g. 6x6), got {text!r}") from exc


def cmd_gen_data(args) -> int:
    seed = _resolve_seed(args.seed)
    width, height = _parse_grid(args.grid)
    config = GenConfig(
        width=width, height=height, max_obstacles=args.max_obstacles, max_traps=args.max_traps
    )
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.count < 10:
        raise UsageError("--count must be at least 10")
    records, manifest = build_dataset(args.count, seed, config)
    out = Path(args.out)
    write_scenes(records, out)
    payload = _manifest("gen-data", seed, {"count": args.count, "out": str(out)})
    payload["dataset"] = manifest.to_dict()
    write_json(out.with_suffix(out.suffix + ".manifest.json"), payload)
    print(f"wrote {len(records)} scenes to {out}")
    for split, count in manifest.split_counts.items():
        print(f"  {split}: {count}")
    for difficulty, count in manifest.difficulty_counts.items():
        print(f"  {difficulty}: {count}")
    return 0


def _load_train_config(args):
    from .training import TrainConfig

    base = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    overrides = {
        "arch": args.arch,
        "episodes": args.episodes,
        "seed": args.seed,
        "curriculum": {"on": True, "off": False}.get(args.curriculum),
        "reward_mode": args.reward,
        "dtype": args.dtype,
        "noise": args.noise,
    }
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    if "seed" not in base or base["seed"] is None:
        base["seed"] = _default_seed()
    try:
        return TrainConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad training config: {exc}") from exc


def cmd_train(args) -> int:
    from .training import train

    config = _load_train_config(args)
    records = read_scenes(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "manifest.json", _manifest("train", config.seed, config.to_dict()))
    result = train(records, config, out_dir=out_dir, resume_from=args.resume)
    if args.figures and result.episodes:
        from .plots import plot_training_curves

        plot_training_curves(result.episodes, out_dir / "curves.png")
    n = len(result.episodes)
    successes = sum(1 for r in result.episodes if r["success"])
    print(f"trained {n} episodes ({config.arch}); success rate {successes / n:.3f}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {result.metrics_path}")
    return 0


def cmd_eval(args) -> int:
    from .evaluation import best_report, evaluate, mean_report
    from .neural import load_params

    net, _, _ = load_params(args.checkpoint)
    if args.arch is not None and net.spec.arch != args.arch:
        raise UsageError(f"checkpoint is a {net.spec.arch} network, not {args.arch}")
    records = [r for r in read_scenes(args.data) if r.split == args.split]
    if not records:
        raise UsageError(f"no scenes in split {args.split!r}")
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise UsageError(f"--seeds expects comma-separated integers, got {args.seeds!r}") from exc
    if not seeds:
        raise UsageError("--seeds is empty")

    reports = []
    transcripts = [] if args.transcripts else None
    results = [] if args.episodes_csv else None
    for seed in seeds:
        reports.append(
            evaluate(
                net,
                records,
                noise=args.noise,
                seed=seed,
                turn_limit=net.spec.turn_limit,
                transcripts_out=transcripts,
                results_out=results,
            )
        )
    payload = {
        "split": args.split,
        "noise": args.noise,
        "runs": [r.to_dict() for r in reports],
        "mean": mean_report(reports),
        "best": best_report(reports),
    }
    out = Path(args.out)
    write_json(out, payload)
    write_json(
        out.with_suffix(out.suffix + ".manifest.json"),
        _manifest(
            "eval",
            seeds[0],
            {
                "checkpoint": args.checkpoint,
                "data": args.data,
                "split": args.split,
                "noise": args.noise,
                "seeds": seeds,
            },
        ),
    )
    if args.transcripts:
        from .dialogue import episode_record

        lines = [json.dumps(episode_record(sid, t, rew)) for sid, t, rew in transcripts]
        Path(args.transcripts).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    if args.episodes_csv:
        from .evaluation import episode_rows
        from .training import write_metrics_csv

        write_metrics_csv(episode_rows(results), args.episodes_csv)
    if args.figures:
        from .plots import plot_eval_report

        plot_eval_report(payload["mean"] | {"per_difficulty": reports[0].per_difficulty}, out.with_suffix(".png"))
    mean = payload["mean"]
    print(f"evaluated {mean['episodes']} scenes x {len(seeds)} run(s) on split {args.split}")
    print(f"  success rate: {mean['success_rate']:.3f}")
    print(f"  avg reward:   {mean['avg_reward']:.2f}")
    return 0


def _optimal_moves(record) -> list[str]:
    """One optimal command sequence, replaying the distance map greedily and
    repeating a command while trap-locked."""
    from .dialogue import AgentUtterance
    from .grid import Direction, EpisodeState, apply_move, solve_distances

    scene = record.scene
    dist = solve_distances(scene)
    state = EpisodeState(scene, turn_limit=10 * (record.solve_length + 4))
    commands = []
    move_text = {
        Direction.UP: AgentUtterance.MOVE_UP.text,
        Direction.DOWN: AgentUtterance.MOVE_DOWN.text,
        Direction.LEFT: AgentUtterance.MOVE_LEFT.text,
        Direction.RIGHT: AgentUtterance.MOVE_RIGHT.text,
    }
    while not state.succeeded:
        if state.trap_lock > 0:
            direction = commands[-1][0]
        else:
            candidates = []
            for direction in Direction:
                dx, dy = direction.delta
                target = type(state.square)(state.square.x + dx, state.square.y + dy)
                if state.scene.passable(target) and target in dist:
                    candidates.append((dist[target], direction))
            candidates.sort(key=lambda c: (c[0], c[1].value))
            direction = candidates[0][1]
        commands.append((direction, move_text[direction]))
        apply_move(state, direction)
    return [text for _, text in commands]


def cmd_oracle(args) -> int:
    records = read_scenes(args.data)
    matches = [r for r in records if r.id == args.scene_id]
    if not matches:
        raise UsageError(f"scene id {args.scene_id!r} not in {args.data}")
    record = matches[0]
    moves = _optimal_moves(record)
    print(f"scene {record.id}: solve length {record.solve_length} ({record.difficulty})")
    for i, text in enumerate(moves, start=1):
        print(f"  {i}. {text}")
    return 0


def _scene_ascii(record) -> str:
    scene = record.scene
    rows = []
    for y in reversed(range(scene.height)):
        cells = []
        for x in range(scene.width):
            pos = (x, y)
            if pos == tuple(scene.square):
                cells.append("S")
            elif pos == tuple(scene.circle):
                cells.append("C")
            elif pos in {tuple(p) for p in scene.obstacles}:
                cells.append("#")
            elif pos in {tuple(p) for p in scene.traps}:
                cells.append("T")
            else:
                cells.append(".")
        rows.append(" ".join(cells))
    return "\n".join(rows)


def cmd_play_local(args) -> int:
    from .dialogue import AGENT_VOCAB, render, respond
    from .grid import EpisodeState, MoveOutcome
    from .training import step_reward

    records = read_scenes(args.data)
    if args.scene_id is not None:
        matches = [r for r in records if r.id == args.scene_id]
        if not matches:
            raise UsageError(f"scene id {args.scene_id!r} not in {args.data}")
        record = matches[0]
    else:
        rng = np.random.default_rng(_resolve_seed(args.seed))
        record = records[int(rng.integers(0, len(records)))]

    state = EpisodeState(record.scene, turn_limit=args.turn_limit)
    total = 0.0
    print(f"scene {record.id}: the grid is hidden; reach the circle within {args.turn_limit} turns.")
    print("choices:")
    for i, utterance in enumerate(AGENT_VOCAB):
        print(f"  [{i}] {render(utterance)}")
    while not state.done:
        sys.stdout.write("> ")
        sys.stdout.flush()
        line = sys.stdin.readline()
        if not line:
            print("\nabandoned")
            return 1
        line = line.strip()
        if not line:
            continue
        try:
            index = int(line)
            if not 0 <= index < len(AGENT_VOCAB):
                raise ValueError
        except ValueError:
            print(f"enter an index 0..{len(AGENT_VOCAB) - 1}")
            continue
        utterance = AGENT_VOCAB[index]
        prev_square = state.square
        user = respond(state, utterance)
        if utterance.is_move:
            if state.succeeded:
                outcome = MoveOutcome.COMPLETED
            elif state.square != prev_square:
                outcome = MoveOutcome.MOVED
            else:
                outcome = MoveOutcome.BLOCKED
        else:
            outcome = None
        delta = step_reward(outcome, state.turn, args.turn_limit)
        total += delta
        print(f"[turn {state.turn}] {render(user)}   (reward {delta:+g}, total {total:g})")
    print(f"outcome: {'success' if state.succeeded else 'failure'}")
    print(f"total reward: {total:g} over {state.turn} turns")
    print("scene reveal:")
    print(_scene_ascii(record))
    print(f"oracle solve length: {record.solve_length}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        args.data,
        args.store_dir,
        ttl_seconds=args.ttl,
        static_dir=args.static_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridtalk", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridtalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a scene dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", default="6x6")
    p.add_argument("--max-obstacles", type=int, default=10)
    p.add_argument("--max-traps", type=int, default=10)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train an agent")
    p.add_argument("--data", required=True)
    p.add_argument("--config", default=None, help="JSON file of TrainConfig fields")
    p.add_argument("--arch", choices=["lstm", "dnn", "cnn"], default=None)
    p.add_argument("--curriculum", choices=["on", "off"], default=None)
    p.add_argument("--reward", choices=["base", "shaped"], default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dtype", choices=["f32", "f64"], default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_train, figures=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "test", "validation"], default="test")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seeds", default="0", help="comma-separated noise seeds, one run each")
    p.add_argument("--arch", choices=["lstm", "dnn", "cnn"], default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--transcripts", default=None, help="optional per-episode JSONL dump")
    p.add_argument("--episodes-csv", default=None, help="optional per-episode CSV (metrics schema)")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_eval, figures=True)

    p = sub.add_parser("oracle", help="solve length and one optimal move sequence")
    p.add_argument("--data", required=True)
    p.add_argument("--scene-id", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("play-local", help="play one blind episode in the terminal")
    p.add_argument("--data", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--scene-id", default=None)
    group.add_argument("--random", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--turn-limit", type=int, default=30)
    p.set_defaults(func=cmd_play_local)

    p = sub.add_parser("serve", help="run the human-baseline play service")
    p.add_argument("--data", required=True)
    p.add_argument("--store-dir", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ttl", type=float, default=3600.0)
    p.add_argument("--static-dir", default=None, help="built console assets to serve at /")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
