"""Scene generation, solvability filtering, dedup, splitting, and the JSONL
scene-file format.

Generation is a pure function of (seed, config): scene index i draws from an
independent child stream keyed by i, so a dataset can be regenerated (or
generated in parallel) byte-for-byte. Unsolvable scenes and exact duplicates
are discarded and replaced until the requested count is retained, then the
retained scenes are shuffled and split 80/10/10 by largest remainder.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import atomic_write_text
from .grid import Position, Scene, UnsolvableSceneError, oracle_solve_length

SPLIT_RATIOS = (("train", 0.8), ("test", 0.1), ("validation", 0.1))
SPLITS = tuple(name for name, _ in SPLIT_RATIOS)
DIFFICULTIES = ("short", "medium", "long")


class SceneFileError(ValueError):
    """A scene file line that fails structural or invariant checks."""


class GenerationError(RuntimeError):
    """Retry budget exhausted while looking for solvable unique scenes."""


@dataclass(frozen=True)
class GenConfig:
    """Knobs for random scene generation (defaults are the 6x6 / 0..10 / 0..10
    setting)."""

    width: int = 6
    height: int = 6
    max_obstacles: int = 10
    max_traps: int = 10

    def validate(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError("grid must be at least 2x2")
        capacity = self.width * self.height
        if self.max_obstacles < 0 or self.max_traps < 0:
            raise ValueError("entity maxima must be non-negative")
        if self.max_obstacles + self.max_traps + 2 > capacity:
            raise ValueError(
                f"up to {self.max_obstacles} obstacles + {self.max_traps} traps + 2 shapes "
                f"cannot fit on a {self.width}x{self.height} grid"
            )


def difficulty_of(solve_length: int) -> str:
    """Partition label from oracle solve length: <4 short, 4..5 medium,
    >5 long."""
    if solve_length < 4:
        return "short"
    if solve_length <= 5:
        return "medium"
    return "long"


@dataclass
class SceneRecord:
    id: str
    scene: Scene
    solve_length: int
    difficulty: str
    split: str


@dataclass
class DatasetManifest:
    seed: int
    requested: int
    generator_version: str
    config: GenConfig
    split_counts: dict[str, int]
    difficulty_counts: dict[str, int]
    discarded_unsolvable: int = 0
    discarded_duplicates: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["config"] = asdict(self.config)
        return out


def generate_scene(rng: np.random.Generator, config: GenConfig = GenConfig()) -> Scene:
    """Draw one scene: obstacle and trap counts uniform on 0..max, then all
    entity cells uniform without replacement. May be unsolvable; callers
    filter."""
    config.validate()
    n_obstacles = int(rng.integers(0, config.max_obstacles + 1))
    n_traps = int(rng.integers(0, config.max_traps + 1))
    total = n_obstacles + n_traps + 2
    cells = rng.choice(config.width * config.height, size=total, replace=False)
    positions = [Position(int(c) % config.width, int(c) // config.width) for c in cells]
    return Scene(
        width=config.width,
        height=config.height,
        obstacles=frozenset(positions[:n_obstacles]),
        traps=frozenset(positions[n_obstacles : n_obstacles + n_traps]),
        square=positions[-2],
        circle=positions[-1],
    )


def _scene_key(scene: Scene) -> tuple:
    return (scene.width, scene.height, scene.square, scene.circle, scene.obstacles, scene.traps)


def _scene_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0, index)))


def split_sizes(n: int) -> dict[str, int]:
    """Largest-remainder 80/10/10 apportionment; remainder ties go to the
    earlier split in (train, test, validation) order."""
    quotas = [(name, n * ratio) for name, ratio in SPLIT_RATIOS]
    sizes = {name: int(q) for name, q in quotas}
    leftover = n - sum(sizes.values())
    by_remainder = sorted(
        range(len(quotas)), key=lambda i: (-(quotas[i][1] - int(quotas[i][1])), i)
    )
    for i in by_remainder[:leftover]:
        sizes[quotas[i][0]] += 1
    return sizes


def build_dataset(
    n: int,
    seed: int,
    config: GenConfig = GenConfig(),
    *,
    retry_factor: int = 200,
) -> tuple[list[SceneRecord], DatasetManifest]:
    """Generate exactly ``n`` unique solvable scenes with solve lengths,
    difficulties, and split labels."""
    if n < 10:
        raise ValueError("dataset needs at least 10 scenes to split")
    config.validate()
    seen: set[tuple] = set()
    kept: list[tuple[Scene, int]] = []
    unsolvable = duplicates = 0
    budget = max(10_000, retry_factor * n)
    index = 0
    while len(kept) < n:
        if index >= budget:
            raise GenerationError(
                f"gave up after {index} draws with only {len(kept)}/{n} scenes retained "
                f"({unsolvable} unsolvable, {duplicates} duplicates); loosen the config"
            )
        scene = generate_scene(_scene_rng(seed, index), config)
        index += 1
        try:
            length = oracle_solve_length(scene)
        except UnsolvableSceneError:
            unsolvable += 1
            continue
        key = _scene_key(scene)
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        kept.append((scene, length))

    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    order = shuffle_rng.permutation(n)
    sizes = split_sizes(n)
    split_of = []
    for name in SPLITS:
        split_of.extend([name] * sizes[name])

    records = []
    for rank, orig in enumerate(order):
        scene, length = kept[int(orig)]
        records.append(
            SceneRecord(
                id=f"s{seed}-{int(orig):06d}",
                scene=scene,
                solve_length=length,
                difficulty=difficulty_of(length),
                split=split_of[rank],
            )
        )

    manifest = DatasetManifest(
        seed=seed,
        requested=n,
        generator_version=__version__,
        config=config,
        split_counts={s: sum(1 for r in records if r.split == s) for s in SPLITS},
        difficulty_counts={d: sum(1 for r in records if r.difficulty == d) for d in DIFFICULTIES},
        discarded_unsolvable=unsolvable,
        discarded_duplicates=duplicates,
    )
    return records, manifest


def _sorted_coords(cells) -> list[list[int]]:
    return [[p.x, p.y] for p in sorted(cells, key=lambda p: (p.y, p.x))]


def record_to_obj(record: SceneRecord) -> dict:
    """Canonical JSON object for one record (fixed key order, coordinate
    lists sorted by (y, x)), so files are byte-stable per seed."""
    s = record.scene
    return {
        "id": record.id,
        "w": s.width,
        "h": s.height,
        "square": [s.square.x, s.square.y],
        "circle": [s.circle.x, s.circle.y],
        "obstacles": _sorted_coords(s.obstacles),
        "traps": _sorted_coords(s.traps),
        "solve_length": record.solve_length,
        "difficulty": record.difficulty,
        "split": record.split,
    }


_REQUIRED_FIELDS = (
    "id", "w", "h", "square", "circle", "obstacles", "traps",
    "solve_length", "difficulty", "split",
)


def record_from_obj(obj: dict, *, lineno: int = 0, strict: bool = False) -> SceneRecord:
    where = f"line {lineno}" if lineno else "record"
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            raise SceneFileError(f"{where}: missing field {name!r}")
    try:
        scene = Scene(
            width=obj["w"],
            height=obj["h"],
            square=tuple(obj["square"]),
            circle=tuple(obj["circle"]),
            obstacles=frozenset(tuple(p) for p in obj["obstacles"]),
            traps=frozenset(tuple(p) for p in obj["traps"]),
        )
    except (ValueError, TypeError) as exc:
        raise SceneFileError(f"{where}: invalid scene: {exc}") from exc
    solve_length = obj["solve_length"]
    if not isinstance(solve_length, int) or solve_length < 1:
        raise SceneFileError(f"{where}: field 'solve_length' must be a positive integer")
    if obj["split"] not in SPLITS:
        raise SceneFileError(f"{where}: field 'split' has unknown value {obj['split']!r}")
    if obj["difficulty"] != difficulty_of(solve_length):
        raise SceneFileError(
            f"{where}: field 'difficulty' is {obj['difficulty']!r} but solve_length "
            f"{solve_length} implies {difficulty_of(solve_length)!r}"
        )
    if strict:
        try:
            actual = oracle_solve_length(scene)
        except UnsolvableSceneError as exc:
            raise SceneFileError(f"{where}: scene is unsolvable") from exc
        if actual != solve_length:
            raise SceneFileError(
                f"{where}: field 'solve_length' is {solve_length} but the oracle says {actual}"
            )
    return SceneRecord(
        id=str(obj["id"]),
        scene=scene,
        solve_length=solve_length,
        difficulty=obj["difficulty"],
        split=obj["split"],
    )


def scenes_to_text(records: list[SceneRecord]) -> str:
    return "".join(json.dumps(record_to_obj(r), separators=(", ", ": ")) + "\n" for r in records)


def write_scenes(records: list[SceneRecord], path: str | Path) -> None:
    atomic_write_text(path, scenes_to_text(records))


def read_scenes(path: str | Path, *, strict: bool = False) -> list[SceneRecord]:
    """Load a scene file, enforcing every scene invariant; ``strict`` also
    recomputes solve lengths against the oracle."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SceneFileError(f"line {lineno}: not valid JSON: {exc}") from exc
            records.append(record_from_obj(obj, lineno=lineno, strict=strict))
    return records
