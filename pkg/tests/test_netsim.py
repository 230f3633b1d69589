import json

import numpy as np
import pytest

from qdbcast.netsim import (
    AuthenticationError,
    DeadlockError,
    FlagMsg,
    IndexSet,
    Network,
    OwnershipError,
    ProofSet,
    ProtocolMessage,
    QutritTransfer,
    RoundError,
    SlotLedger,
    Transcript,
    ValueBit,
)
from qdbcast.players import BOTTOM, Player
from qdbcast.sources import OracleSource, Preparation

S, R0, R1 = Player.S, Player.R0, Player.R1


def silent(ep):
    return []


def test_value_bit_delivered_next_boundary_with_sender():
    net = Network()
    delivered = net.run_round({S: lambda ep: [ep.message(R0, ValueBit(0))], R0: silent, R1: silent})
    (msg,) = delivered[R0]
    assert msg.sender == S and msg.payload == ValueBit(0) and msg.round == 1
    assert delivered[R1] == []


def test_spoofed_sender_rejected():
    net = Network()
    spoof = lambda ep: [ProtocolMessage(S, R1, ep.round, ValueBit(1))]
    with pytest.raises(AuthenticationError):
        net.run_round({R0: spoof})


def test_out_of_round_send_rejected():
    net = Network()
    with pytest.raises(RoundError):
        net.run_round({S: lambda ep: [ProtocolMessage(S, R0, ep.round + 1, ValueBit(1))]})
    with pytest.raises(RoundError):
        net.endpoints[S].send(ProtocolMessage(S, R0, net.round, ValueBit(1)))


def test_failing_to_commit_is_a_deadlock():
    net = Network()
    with pytest.raises(DeadlockError):
        net.run_round({S: silent, R0: lambda ep: None})


def test_self_message_rejected():
    with pytest.raises(Exception):
        ProtocolMessage(S, S, 1, ValueBit(0))


def test_empty_round():
    net = Network()
    assert all(v == [] for v in net.run_round({S: silent, R0: silent, R1: silent}).values())
    assert len(net.transcript) == 0


def test_flag_exchange_same_round():
    net = Network()
    d = net.run_round({
        R0: lambda ep: [ep.message(R1, FlagMsg(1))],
        R1: lambda ep: [ep.message(R0, FlagMsg(BOTTOM))],
    })
    assert d[R1][0].round == d[R0][0].round == 1


def test_non_rushing_cannot_see_current_round():
    net = Network()
    seen = {}

    def r1(ep):
        seen["inbox"] = ep.received(ep.round)
        with pytest.raises(RoundError):
            ep.peek()
        return []

    net.run_round({R0: lambda ep: [ep.message(R1, FlagMsg(0))], R1: r1})
    assert seen["inbox"] == []


def test_rushing_player_peeks_only_its_own_messages():
    net = Network(rushing=[R1])
    seen = {}

    def r1(ep):
        seen["peek"] = ep.peek()
        return [ep.message(R0, FlagMsg(1 - ep.peek()[0].payload.flag))]

    d = net.run_round({
        R1: r1,
        R0: lambda ep: [ep.message(R1, FlagMsg(0)), ep.message(S, FlagMsg(0))],
        S: silent,
    })
    assert [m.receiver for m in seen["peek"]] == [R1]
    assert d[R0][0].payload == FlagMsg(1)


def test_transcript_length_equals_sends_and_authentic():
    net = Network()
    for _ in range(3):
        net.run_round({
            S: lambda ep: [ep.message(R0, ValueBit(1)), ep.message(R1, ValueBit(1))],
            R0: lambda ep: [ep.message(R1, FlagMsg(1))],
            R1: silent,
        })
    assert len(net.transcript) == 9
    rounds = [m.round for m in net.transcript.messages]
    assert rounds == sorted(rounds)


def test_qutrit_transfer_moves_ownership():
    ledger = SlotLedger(4)
    net = Network(ledger=ledger)
    net.run_round({R1: lambda ep: [ep.message(S, QutritTransfer((0, 1, 2, 3), 0))]})
    assert ledger.owned_by(S, 0).tolist() == [0, 1, 2, 3]
    src = OracleSource(Preparation.aharonov(), ledger, np.random.default_rng(0))
    with pytest.raises(OwnershipError):
        src.measure_z(R1, [0], 0)
    src.measure_z(S, [0], 0)
    with pytest.raises(OwnershipError):
        src.measure_z(S, [0], 0)


def test_cannot_transfer_what_you_do_not_own():
    ledger = SlotLedger(2)
    net = Network(ledger=ledger)
    with pytest.raises(OwnershipError):
        net.run_round({S: lambda ep: [ep.message(R0, QutritTransfer((0,), 0))]})


def test_jsonl_round_trip(tmp_path):
    net = Network()
    net.run_round({
        S: lambda ep: [ep.message(R0, ValueBit(1)), ep.message(R0, IndexSet((5, 2)))],
        R1: lambda ep: [ep.message(R0, FlagMsg(BOTTOM)), ep.message(S, ProofSet([3, 1]))],
    })
    path = tmp_path / "t.jsonl"
    net.transcript.write(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4
    rec = json.loads(lines[1])
    assert set(rec) == {"round", "sender", "receiver", "payload_type", "payload"}
    assert rec["payload"] == {"indices": [2, 5]}
    assert Transcript.read_messages(path) == net.transcript.messages


def test_digest_is_deterministic():
    def run():
        net = Network()
        net.run_round({S: lambda ep: [ep.message(R1, ValueBit(0))]})
        net.transcript.record_measurement(S, "x", np.array([0, 1, 2]))
        return net.transcript.digest()

    assert run() == run()
