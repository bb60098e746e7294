import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridtalk.dialogue import (
    AGENT_VOCAB,
    AgentUtterance,
    NoiseConfig,
    ParseError,
    Transcript,
    UserKind,
    UserUtterance,
    episode_record,
    parse,
    render,
    respond,
    trap_offset_utterance,
)
from gridtalk.grid import Direction, EpisodeOverError, EpisodeState, Scene


TABLE_STRINGS = [
    "Is the square above the circle?",
    "Is the square below the circle?",
    "Is the square to the right of the circle?",
    "Is the square to the left of the circle?",
    "Where is the nearest trap?",
    "Move the square up",
    "Move the square down",
    "Move the square to the left",
    "Move the square to the right",
]


def test_vocabulary_is_the_canonical_nine():
    assert [render(u) for u in AGENT_VOCAB] == TABLE_STRINGS
    assert len({render(u) for u in AGENT_VOCAB}) == 9


def test_move_left_surface_form():
    assert render(AgentUtterance.MOVE_LEFT) == "Move the square to the left"


def test_trap_offset_render_template():
    u = UserUtterance(UserKind.TRAP_OFFSET, x=2, d1=Direction.UP, y=3, d2=Direction.RIGHT)
    assert render(u) == "It is 2 moves up and 3 moves right"
    single = UserUtterance(UserKind.TRAP_OFFSET, x=4, d1=Direction.DOWN)
    assert render(single) == "It is 4 moves down"


def test_trap_offset_from_grid_offsets():
    assert render(trap_offset_utterance(-1, 0)) == "It is 1 moves left"
    assert render(trap_offset_utterance(2, -3)) == "It is 2 moves right and 3 moves down"
    assert render(trap_offset_utterance(0, 5)) == "It is 5 moves up"
    with pytest.raises(ValueError):
        trap_offset_utterance(0, 0)


def test_grid_offsets_round_trip():
    for dx in range(-5, 6):
        for dy in range(-5, 6):
            if dx == 0 and dy == 0:
                continue
            u = trap_offset_utterance(dx, dy)
            assert u.grid_offsets() == (dx, dy)


def test_parse_round_trip_agent():
    for u in AGENT_VOCAB:
        assert parse(render(u)) is u


def test_parse_round_trip_user():
    samples = [
        UserUtterance(UserKind.YES),
        UserUtterance(UserKind.NO),
        UserUtterance(UserKind.COMPLETE),
        UserUtterance(UserKind.STUCK_IN_TRAP),
        UserUtterance(UserKind.NO_TRAPS),
        UserUtterance(UserKind.IN_ONE),
        trap_offset_utterance(3, -2),
        trap_offset_utterance(-5, 0),
    ]
    for u in samples:
        assert parse(render(u)) == u


def test_parse_rejects_outside_vocabulary():
    for text in ("hello", "Move the square left", "It is 0 moves up", "It is 6 moves up",
                 "is the square above the circle?", ""):
        with pytest.raises(ParseError):
            parse(text)


def test_respond_example_conversation(example_scene):
    state = EpisodeState(example_scene)
    assert render(respond(state, AgentUtterance.ASK_ABOVE)) == "Yes"
    assert render(respond(state, AgentUtterance.MOVE_DOWN)) == "Yes"
    assert state.turn == 2


def test_respond_complete_on_final_move():
    state = EpisodeState(Scene(6, 6, square=(3, 3), circle=(2, 3)))
    assert render(respond(state, AgentUtterance.MOVE_LEFT)) == "Complete"
    assert state.succeeded


def test_respond_trap_question(example_scene):
    state = EpisodeState(example_scene)
    assert render(respond(state, AgentUtterance.ASK_TRAP)) == "It is 1 moves left"


def test_respond_no_traps():
    state = EpisodeState(Scene(6, 6, square=(0, 0), circle=(3, 3)))
    assert respond(state, AgentUtterance.ASK_TRAP).kind is UserKind.NO_TRAPS


def test_respond_in_one_and_stuck():
    scene = Scene(6, 6, square=(0, 0), circle=(3, 3), traps=[(0, 1)])
    state = EpisodeState(scene)
    respond(state, AgentUtterance.MOVE_UP)
    assert respond(state, AgentUtterance.ASK_TRAP).kind is UserKind.IN_ONE
    stuck = respond(state, AgentUtterance.MOVE_UP)
    assert stuck.kind is UserKind.STUCK_IN_TRAP
    assert render(stuck) == "No - you are stuck in a trap"


def test_stuck_as_no_flag():
    scene = Scene(6, 6, square=(0, 0), circle=(3, 3), traps=[(0, 1)])
    state = EpisodeState(scene)
    respond(state, AgentUtterance.MOVE_UP, stuck_as_no=True)
    assert respond(state, AgentUtterance.MOVE_UP, stuck_as_no=True).kind is UserKind.NO


def test_respond_on_terminal_state_raises():
    state = EpisodeState(Scene(6, 6, square=(3, 3), circle=(2, 3)))
    respond(state, AgentUtterance.MOVE_LEFT)
    with pytest.raises(EpisodeOverError):
        respond(state, AgentUtterance.ASK_ABOVE)


def test_every_turn_counts(example_scene):
    state = EpisodeState(example_scene, turn_limit=3)
    respond(state, AgentUtterance.ASK_ABOVE)
    respond(state, AgentUtterance.ASK_TRAP)
    respond(state, AgentUtterance.ASK_BELOW)
    assert state.done and state.turn == 3


def test_respond_deterministic_without_noise(example_scene):
    answers = []
    for _ in range(2):
        state = EpisodeState(example_scene)
        answers.append([render(respond(state, AgentUtterance.ASK_ABOVE)) for _ in range(5)])
    assert answers[0] == answers[1]


def test_noise_requires_rng(example_scene):
    state = EpisodeState(example_scene)
    with pytest.raises(ValueError):
        respond(state, AgentUtterance.ASK_ABOVE, NoiseConfig(relational_flip=0.5))


def test_noise_flip_rate(example_scene):
    noise = NoiseConfig(relational_flip=0.1)
    rng = np.random.default_rng(2024)
    flips = 0
    n = 10_000
    for _ in range(n):
        state = EpisodeState(example_scene)
        answer = respond(state, AgentUtterance.ASK_ABOVE, noise, rng)
        flips += answer.kind is UserKind.NO  # truth is Yes
    assert abs(flips / n - 0.1) <= 0.01


def test_noise_never_touches_trap_or_complete_answers():
    noise = NoiseConfig(relational_flip=1.0)
    rng = np.random.default_rng(5)
    state = EpisodeState(Scene(6, 6, square=(3, 3), circle=(2, 3), traps=[(5, 5)]))
    assert respond(state, AgentUtterance.ASK_TRAP, noise, rng).kind is UserKind.TRAP_OFFSET
    assert respond(state, AgentUtterance.MOVE_LEFT, noise, rng).kind is UserKind.COMPLETE


def test_movement_flip_optional():
    noise = NoiseConfig(movement_flip=1.0)
    rng = np.random.default_rng(5)
    state = EpisodeState(Scene(6, 6, square=(3, 3), circle=(0, 0)))
    assert respond(state, AgentUtterance.MOVE_LEFT, noise, rng).kind is UserKind.NO


@st.composite
def agent_actions(draw):
    return draw(st.lists(st.sampled_from(list(AGENT_VOCAB)), min_size=1, max_size=40))


@given(agent_actions(), st.integers(0, 2**31 - 1))
@settings(max_examples=50, deadline=None)
def test_complete_is_final_and_unique(actions, seed):
    rng = np.random.default_rng(seed)
    from gridtalk.scenes import GenConfig, generate_scene

    scene = generate_scene(rng, GenConfig(5, 5, 3, 3))
    state = EpisodeState(scene, turn_limit=30)
    transcript = Transcript()
    for action in actions:
        if state.done:
            break
        user = respond(state, action)
        transcript.append(action, user)
        # closed vocabulary: everything emitted parses back to itself
        assert parse(render(user)) == user
    completes = [u for _, u in transcript.turns if u.kind is UserKind.COMPLETE]
    if state.succeeded:
        assert len(completes) == 1
        assert transcript.turns[-1][1].kind is UserKind.COMPLETE
    else:
        assert not completes


def test_episode_record_schema(example_scene):
    state = EpisodeState(example_scene)
    transcript = Transcript()
    user = respond(state, AgentUtterance.ASK_ABOVE)
    transcript.append(AgentUtterance.ASK_ABOVE, user)
    transcript.outcome = "failure"
    record = episode_record("scene-1", transcript, -60.0)
    assert record == {
        "scene_id": "scene-1",
        "turns": [["Is the square above the circle?", "Yes"]],
        "outcome": "failure",
        "reward": -60.0,
    }
