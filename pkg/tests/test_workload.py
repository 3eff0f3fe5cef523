import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from msfactory.exceptions import EmptySchedule, SchemaViolation, VersionMismatch
from msfactory.workload import (
    TLoadDistribution,
    from_schedule,
    generate_gse_like,
    generate_ising_like,
    load,
    parse,
    reference_workload,
    save,
    stats,
)

schedules = st.lists(st.integers(0, 60), min_size=1, max_size=200)


def test_from_schedule_examples():
    assert from_schedule([0, 0, 3, 3, 1]).histogram == {0: 2, 1: 1, 3: 2}
    assert from_schedule([5]).histogram == {5: 1}
    with pytest.raises(EmptySchedule):
        from_schedule([])
    with pytest.raises(ValueError):
        from_schedule([1, -1])


@given(schedules)
def test_stats_match_direct_computation(s):
    d = from_schedule(s, n_qubits=64)
    st_ = stats(d)
    mean = sum(s) / len(s)
    assert st_.t_count == sum(s)
    assert st_.schedule_length == len(s)
    assert st_.t_peak == max(s)
    assert st_.t_avg == pytest.approx(mean)
    assert st_.t_std == pytest.approx(math.sqrt(sum((v - mean) ** 2 for v in s) / len(s)), abs=1e-9)


@given(st.dictionaries(st.integers(0, 50), st.integers(0, 20), max_size=10))
def test_stats_ignore_key_order(hist):
    a = TLoadDistribution(hist)
    b = TLoadDistribution(dict(reversed(list(hist.items()))))
    assert a == b and hash(a) == hash(b)
    assert (a.t_count, a.t_peak, a.schedule_length) == (b.t_count, b.t_peak, b.schedule_length)


def test_degenerate_stats():
    s = stats(TLoadDistribution({0: 10}), n_qubits=3)
    assert (s.t_count, s.t_avg, s.t_peak) == (0, 0.0, 0)


def test_stats_requires_qubit_count():
    with pytest.raises(ValueError):
        stats(TLoadDistribution({1: 1}))


def test_histogram_validation():
    assert TLoadDistribution({2: 0, 1: 3}).histogram == {1: 3}
    with pytest.raises(ValueError):
        TLoadDistribution({1: -1})
    with pytest.raises(ValueError):
        TLoadDistribution({1.5: 1})
    with pytest.raises(ValueError):
        TLoadDistribution({1: 1}, schedule=(2,))


@pytest.mark.parametrize("key,row", [
    ("im", (500, 9068348, 20589, 778)),
    ("gse", (5, 775522, 546708, 12)),
])
def test_reference_fixtures(key, row):
    s = stats(reference_workload(key))
    assert (s.n_qubits, s.t_count, s.schedule_length, s.t_peak) == row


def test_reference_moments():
    im, gse = stats(reference_workload("im")), stats(reference_workload("gse"))
    sig4 = lambda x: float(f"{x:.4g}")  # noqa: E731
    assert sig4(im.t_avg) == 440.4 and sig4(im.t_std) == 107.0
    assert sig4(gse.t_avg) == 1.419 and sig4(gse.t_std) == 1.464
    with pytest.raises(ValueError):
        reference_workload("qft")


def test_ising_generator():
    d = generate_ising_like(500, 10, seed=7)
    assert d == generate_ising_like(500, 10, seed=7)
    assert d != generate_ising_like(500, 10, seed=8)
    assert abs(d.t_avg - 440) <= 44
    assert 0 <= min(d.histogram) and d.t_peak <= 1000
    with pytest.raises(ValueError):
        generate_ising_like(0, 10, seed=1)


def test_gse_generator():
    d = generate_gse_like(5, seed=3)
    assert d == generate_gse_like(5, seed=3)
    assert d.t_peak <= 12
    assert abs(d.t_avg - 1.42) <= 0.15 * 1.42
    assert min(d.histogram) >= 0


def test_truncated_keeps_order():
    d = from_schedule([4, 1, 3, 9], n_qubits=5)
    assert d.truncated(2).schedule == (4, 1)
    with pytest.raises(ValueError):
        TLoadDistribution({1: 2}).truncated(1)


@pytest.mark.parametrize("dist", [
    TLoadDistribution({0: 3, 2: 5, 7: 1}, "hist", 4),
    from_schedule([3, 0, 2, 2], "sched", n_qubits=4),
])
def test_save_load_round_trip(tmp_path, dist):
    path = tmp_path / "w.json"
    save(dist, path)
    back = load(path)
    assert back.histogram == dist.histogram and back.name == dist.name
    assert back.schedule == dist.schedule and back.n_qubits == dist.n_qubits


@pytest.mark.parametrize("doc,where", [
    ({"version": 1, "n_qubits": 2, "histogram": [[1, -3]]}, "histogram[0][1]"),
    ({"version": 1, "n_qubits": 2, "histogram": [[2, 1], [1, 1]]}, "histogram[1][0]"),
    ({"version": 1, "n_qubits": 2, "histogram": [[1]]}, "histogram[0]"),
    ({"version": 1, "n_qubits": 2}, "histogram/schedule"),
    ({"version": 1, "n_qubits": 2, "histogram": [], "schedule": [1]}, "histogram/schedule"),
    ({"version": 1, "histogram": []}, "n_qubits"),
    ({"version": 1, "n_qubits": 2, "schedule": [1, "x"]}, "schedule[1]"),
    ({"n_qubits": 2, "histogram": []}, "version"),
])
def test_schema_violations_name_the_field(doc, where):
    with pytest.raises(SchemaViolation, match=where.replace("[", r"\[").replace("]", r"\]")):
        parse(doc, "f.json")


def test_version_mismatch():
    with pytest.raises(VersionMismatch):
        parse({"version": 2, "n_qubits": 1, "histogram": []})


def test_load_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1,\n  "n_qubits": }\n')
    with pytest.raises(SchemaViolation, match="line 2"):
        load(path)


def test_document_is_plain_json(tmp_path):
    path = tmp_path / "w.json"
    save(TLoadDistribution({1: 2}, "x", 3), path)
    assert json.loads(path.read_text()) == {"version": 1, "name": "x", "n_qubits": 3, "histogram": [[1, 2]]}
