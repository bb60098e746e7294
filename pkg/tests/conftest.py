import numpy as np
import pytest

from gridtalk.grid import Scene
from gridtalk.scenes import SceneRecord, difficulty_of
from gridtalk.grid import oracle_solve_length


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One visible pass/fail line per acceptance criterion."""
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        print(f"\n[ACCEPTANCE] {item.name.removeprefix('test_')}: {status}")


@pytest.fixture
def example_scene() -> Scene:
    """The worked 6x6 example: square (4,5), circle (2,3), six obstacles,
    six traps."""
    return Scene(
        width=6,
        height=6,
        square=(4, 5),
        circle=(2, 3),
        obstacles=[(5, 4), (3, 4), (2, 5), (1, 3), (0, 0), (0, 3)],
        traps=[(1, 0), (5, 1), (3, 2), (2, 4), (1, 5), (3, 5)],
    )


def make_record(scene: Scene, id: str = "r0", split: str = "train") -> SceneRecord:
    length = oracle_solve_length(scene)
    return SceneRecord(
        id=id, scene=scene, solve_length=length, difficulty=difficulty_of(length), split=split
    )


@pytest.fixture
def straight_line_scene() -> Scene:
    """Empty 6x6, square (0,0), circle (0,3): solve length 3."""
    return Scene(width=6, height=6, square=(0, 0), circle=(0, 3))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
