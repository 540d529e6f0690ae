"""Instance format parsing, degree validation, and stream helpers."""
import numpy as np
import pytest

from oec.stream import (
    DegreeExceeded,
    DegreeLedger,
    DuplicateNeighbor,
    HeaderError,
    IdOutOfRange,
    Instance,
    InstanceHeader,
    MalformedRecord,
    OnlineArrival,
    StreamError,
    degree_profile,
    dump_instance,
    iter_edges,
    load_instance,
    parse_instance,
    realized_max_degree,
    save_instance,
    validate_arrival,
    validate_instance,
)

GOOD = """\
{"n_offline": 3, "delta": 2}
{"neighbors": [0, 2]}
{"neighbors": [1]}
"""


def test_parse_round_trip():
    inst = parse_instance(GOOD.splitlines())
    assert inst.header == InstanceHeader(n_offline=3, delta=2)
    assert [a.neighbors for a in inst.arrivals] == [(0, 2), (1,)]
    assert inst.m == 3
    assert inst.n_online == 2
    assert dump_instance(inst) == GOOD


def test_save_load_round_trip(tmp_path):
    inst = parse_instance(GOOD.splitlines())
    path = tmp_path / "inst.jsonl"
    save_instance(inst, path)
    again = load_instance(path)
    assert again.header == inst.header
    assert again.arrivals == inst.arrivals


def test_blank_lines_ignored():
    inst = parse_instance(["", GOOD.splitlines()[0], "   ", '{"neighbors": [1]}'])
    assert inst.n_online == 1


def test_parse_errors_carry_line_numbers():
    with pytest.raises(MalformedRecord, match="line 2"):
        parse_instance(['{"n_offline": 3, "delta": 2}', "{broken"])
    with pytest.raises(MalformedRecord, match="line 2"):
        parse_instance(['{"n_offline": 3, "delta": 2}', '{"wrong": 1}'])
    with pytest.raises(MalformedRecord, match="no neighbors"):
        parse_instance(['{"n_offline": 3, "delta": 2}', '{"neighbors": []}'])
    with pytest.raises(HeaderError):
        parse_instance(['{"neighbors": [0]}'])
    with pytest.raises(HeaderError):
        parse_instance([])
    with pytest.raises(MalformedRecord, match="not an integer"):
        parse_instance(['{"n_offline": 3, "delta": 2}', '{"neighbors": [true]}'])


def test_parse_id_checks():
    with pytest.raises(IdOutOfRange):
        parse_instance(['{"n_offline": 3, "delta": 2}', '{"neighbors": [3]}'])
    with pytest.raises(DuplicateNeighbor):
        parse_instance(['{"n_offline": 3, "delta": 2}', '{"neighbors": [1, 1]}'])


def test_header_domain():
    with pytest.raises(HeaderError):
        InstanceHeader(n_offline=0, delta=1)
    with pytest.raises(HeaderError):
        InstanceHeader(n_offline=3, delta=0)
    with pytest.raises(HeaderError):
        InstanceHeader(n_offline=3, delta=4)


def test_validate_strict_offline_degree():
    header = InstanceHeader(n_offline=2, delta=1)
    ledger = DegreeLedger.fresh(2)
    validate_arrival(header, ledger, OnlineArrival((0,)))
    with pytest.raises(DegreeExceeded) as err:
        validate_arrival(header, ledger, OnlineArrival((0,)))
    assert err.value.side == "offline"
    assert ledger.arrivals_seen == 1  # the rejected arrival is not admitted


def test_validate_strict_online_degree():
    header = InstanceHeader(n_offline=5, delta=2)
    ledger = DegreeLedger.fresh(5)
    with pytest.raises(DegreeExceeded) as err:
        validate_arrival(header, ledger, OnlineArrival((0, 1, 2)))
    assert err.value.side == "online"


def test_validate_permissive_drops_offenders():
    header = InstanceHeader(n_offline=3, delta=1)
    ledger = DegreeLedger.fresh(3)
    validate_arrival(header, ledger, OnlineArrival((0,)))
    _, admitted = validate_arrival(
        header, ledger, OnlineArrival((0, 1, 7)), permissive=True
    )
    assert admitted.neighbors == (1,)
    # saturating everything leaves later arrivals empty but admitted
    validate_arrival(header, ledger, OnlineArrival((2,)))
    _, admitted = validate_arrival(header, ledger, OnlineArrival((2,)), permissive=True)
    assert admitted.neighbors == ()
    assert ledger.arrivals_seen == 4


def test_validate_instance_and_profile():
    inst = parse_instance(GOOD.splitlines())
    ledger = validate_instance(inst)
    assert ledger.offline_degree.tolist() == [1, 1, 1]
    assert degree_profile(ledger) == {1: 3}
    assert ledger.remaining(inst.header.delta).tolist() == [1, 1, 1]


def test_validate_instance_budget():
    inst = parse_instance(GOOD.splitlines())
    with pytest.raises(StreamError, match="budget"):
        validate_instance(inst, arrival_budget=1)


def test_realized_max_degree():
    inst = parse_instance(GOOD.splitlines())
    assert realized_max_degree(inst) == 2
    empty = Instance(header=InstanceHeader(n_offline=4, delta=2))
    assert realized_max_degree(empty) == 0
    # online side can dominate
    star = Instance(
        header=InstanceHeader(n_offline=4, delta=3),
        arrivals=[OnlineArrival((0, 1, 2))],
    )
    assert realized_max_degree(star) == 3


def test_iter_edges_order():
    inst = parse_instance(GOOD.splitlines())
    assert list(iter_edges(inst.arrivals)) == [(0, 0, 0), (0, 1, 2), (1, 0, 1)]


def test_degree_profile_counts_zero_degree_nodes():
    ledger = DegreeLedger(offline_degree=np.array([0, 0, 2, 1]))
    assert degree_profile(ledger) == {0: 2, 1: 1, 2: 1}
