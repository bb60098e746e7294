import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridtalk.agent import (
    DEFAULT_LSTM_PARAM_COUNT,
    N_ACTIONS,
    NONE_RESPONSE_SLOT,
    TURN_WIDTH,
    assemble_batch,
    build_network,
    encode_state,
    encode_turn,
    load_embedding_table,
    network_spec,
    padding_row,
    q_values,
    select_action,
)
from gridtalk.dialogue import (
    AGENT_VOCAB,
    AgentUtterance,
    UserKind,
    UserUtterance,
    render,
    trap_offset_utterance,
)
from gridtalk.neural import QNetwork

YES = UserUtterance(UserKind.YES)
NO = UserUtterance(UserKind.NO)


def test_turn_width_is_nineteen():
    assert TURN_WIDTH == 19
    assert N_ACTIONS == 9


def test_encode_empty_transcript():
    enc = encode_state([], turn_limit=30)
    assert enc.turns.shape == (0, 19)
    assert enc.aux.shape == (31,)
    assert enc.aux[0] == 1.0
    assert enc.aux[30] == 0.0
    assert enc.aux.sum() == 1.0


def test_encode_single_relational_turn():
    enc = encode_state([(AgentUtterance.ASK_ABOVE, YES)], turn_limit=30)
    row = enc.turns[0]
    assert row[AgentUtterance.ASK_ABOVE.index] == 1.0
    assert np.count_nonzero(row) == 2  # one agent slot + one response slot
    assert row[17] == 0.0 and row[18] == 0.0
    assert enc.aux[1] == 1.0
    assert enc.aux[30] == pytest.approx(1 / 30)


def test_encode_trap_offset_numerics():
    # "It is 1 moves left" -> dx = -1, dy = 0 -> numerics (-0.2, 0.0)
    user = trap_offset_utterance(-1, 0)
    row = encode_turn(AgentUtterance.ASK_TRAP, user)
    assert row[17] == pytest.approx(-0.2)
    assert row[18] == 0.0
    two_part = encode_turn(AgentUtterance.ASK_TRAP, trap_offset_utterance(2, -3))
    assert two_part[17] == pytest.approx(0.4)
    assert two_part[18] == pytest.approx(-0.6)


def test_encode_rejects_over_length():
    turns = [(AgentUtterance.ASK_ABOVE, YES)] * 31
    with pytest.raises(ValueError, match="over the limit"):
        encode_state(turns, turn_limit=30)


def test_full_transcript_clamps_aux_one_hot():
    turns = [(AgentUtterance.ASK_ABOVE, YES)] * 30
    enc = encode_state(turns, turn_limit=30)
    assert enc.aux[29] == 1.0
    assert enc.aux[30] == 1.0  # scalar turn fraction


def test_padding_row_sets_none_slot():
    row = padding_row()
    assert row[N_ACTIONS + NONE_RESPONSE_SLOT] == 1.0
    assert np.count_nonzero(row) == 1


def test_assemble_batch_padding():
    spec = network_spec("dnn")
    encs = [encode_state([(AgentUtterance.MOVE_UP, YES)], 30), encode_state([], 30)]
    x, lengths, aux = assemble_batch(encs, spec)
    assert x.shape == (2, 30, 19)
    assert lengths.tolist() == [1, 0]
    # rows past the real turns are all-None padding
    assert np.array_equal(x[0, 1], padding_row())
    assert np.array_equal(x[1, 0], padding_row())
    lstm_x, _, _ = assemble_batch(encs, network_spec("lstm"))
    assert lstm_x.shape == (2, 1, 19)


def test_q_values_zero_net_and_determinism():
    net = build_network("lstm", seed=4)
    enc = encode_state([(AgentUtterance.ASK_ABOVE, YES)], 30)
    q1 = q_values(net, enc)
    q2 = q_values(net, enc)
    assert q1.shape == (9,)
    assert np.array_equal(q1, q2)
    for arr in net.params().values():
        arr[...] = 0.0
    assert np.array_equal(q_values(net, enc), np.zeros(9))


def test_param_count_constants():
    assert build_network("lstm").param_count() == DEFAULT_LSTM_PARAM_COUNT == 25_929
    assert build_network("dnn").param_count() == 40_969
    assert build_network("cnn").param_count() == 18_409


def test_q_width_matches_vocab_for_every_variant():
    enc = encode_state([(AgentUtterance.ASK_ABOVE, YES)], 30)
    for arch in ("lstm", "dnn", "cnn"):
        assert q_values(build_network(arch, seed=2), enc).shape == (N_ACTIONS,)


def test_history_order_changes_lstm_output():
    net = build_network("lstm", seed=11)
    a = [(AgentUtterance.ASK_ABOVE, YES), (AgentUtterance.MOVE_UP, NO)]
    b = list(reversed(a))
    qa = q_values(net, encode_state(a, 30))
    qb = q_values(net, encode_state(b, 30))
    assert not np.allclose(qa, qb)


def test_select_action_greedy_and_ties():
    assert select_action(np.array([1.0, 9.0, 3.0, 0.0]), 0.0) == 1
    assert select_action(np.array([5.0, 5.0, 0.0]), 0.0) == 0


def test_select_action_rescaling_invariance():
    q = np.array([0.1, 2.0, -1.0, 1.9])
    assert select_action(q, 0.0) == select_action(q * 7.5, 0.0)


def test_select_action_epsilon_one_uniform():
    rng = np.random.default_rng(31)
    q = np.zeros(9)
    counts = np.zeros(9, dtype=int)
    n = 100_000
    for _ in range(n):
        counts[select_action(q, 1.0, rng)] += 1
    freq = counts / n
    assert np.all(np.abs(freq - 1 / 9) <= 0.02)


def test_select_action_errors():
    with pytest.raises(ValueError):
        select_action(np.array([]), 0.0)
    with pytest.raises(ValueError):
        select_action(np.array([1.0]), 1.5)
    with pytest.raises(ValueError):
        select_action(np.array([1.0, 2.0]), 0.5)  # rng required


def test_select_action_restricted_to_valid_slots():
    rng = np.random.default_rng(3)
    q = np.array([0.0, 1.0, 99.0])
    assert select_action(q, 0.0, n_valid=2) == 1
    for _ in range(50):
        assert select_action(q, 1.0, rng, n_valid=2) < 2


def test_padded_action_architecture():
    net = build_network("lstm", actions=14)
    enc = encode_state([], 30)
    assert q_values(net, enc).shape == (14,)


_UTTS = st.sampled_from(list(AGENT_VOCAB))
_RESPONSES = st.one_of(
    st.sampled_from([UserUtterance(k) for k in (UserKind.YES, UserKind.NO, UserKind.NO_TRAPS, UserKind.IN_ONE, UserKind.STUCK_IN_TRAP)]),
    st.builds(
        trap_offset_utterance,
        st.integers(-5, 5),
        st.integers(-5, 5),
    ).filter(lambda u: True),
)


@st.composite
def transcripts(draw):
    n = draw(st.integers(0, 8))
    out = []
    for _ in range(n):
        agent = draw(_UTTS)
        dx = draw(st.integers(-5, 5))
        dy = draw(st.integers(-5, 5))
        if dx == 0 and dy == 0:
            user = draw(st.sampled_from([YES, NO]))
        elif draw(st.booleans()):
            user = trap_offset_utterance(dx, dy)
        else:
            user = draw(st.sampled_from([YES, NO]))
        out.append((agent, user))
    return out


@given(transcripts(), transcripts())
@settings(max_examples=80, deadline=None)
def test_encoding_injective(a, b):
    ea, eb = encode_state(a, 30), encode_state(b, 30)
    if a != b:
        assert ea.turns.shape != eb.turns.shape or not np.array_equal(ea.turns, eb.turns)
    else:
        assert np.array_equal(ea.turns, eb.turns) and np.array_equal(ea.aux, eb.aux)


def test_embedding_table(tmp_path):
    lines = []
    for u in AGENT_VOCAB:
        lines.append(f"{render(u)}\t1.0 0.0 {u.index}.0")
    lines.append("Yes\t0.0 1.0 0.5")
    path = tmp_path / "emb.tsv"
    path.write_text("\n".join(lines) + "\n")
    table = load_embedding_table(path)
    assert table.width == 3 and table.turn_width == 6
    enc = encode_state([(AgentUtterance.ASK_ABOVE, YES)], 30, table=table)
    assert enc.turns.shape == (1, 6)
    assert enc.turns[0].tolist() == [1.0, 0.0, 0.0, 0.0, 1.0, 0.5]
    with pytest.raises(KeyError, match="No"):
        encode_state([(AgentUtterance.ASK_ABOVE, NO)], 30, table=table)
    # a network built at the table's width accepts the encoding
    net = QNetwork(network_spec("lstm", turn_width=6), seed=0)
    x, lengths, aux = assemble_batch([enc], net.spec)
    q, _ = net.forward(x, lengths, aux)
    assert q.shape == (1, 9)


def test_embedding_table_errors(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("no tab here\n")
    with pytest.raises(ValueError, match="TAB"):
        load_embedding_table(path)
    path.write_text("Yes\t1.0\nNo\t1.0 2.0\n")
    with pytest.raises(ValueError, match="widths"):
        load_embedding_table(path)
