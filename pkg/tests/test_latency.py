import pytest

from uibcost.latency import CSVFormatError, bundled_latencies, parse_latency_csv


def test_bundled_table():
    m = bundled_latencies()
    assert len(m.targets) == 7
    assert m.get("MNv4-Conv-S", "Pixel 6 CPU") is not None
    assert m.accuracy["MNv4-Conv-S"] == 73.8
    assert all(v > 0 for row in m.latency_ms for v in row if v is not None)


def test_missing_cells_are_none_not_imputed():
    text = "model,target,latency_ms,top1\nA,t1,1.5,70\nA,t2,-,70\nB,t1,Failed,71\nB,t2,2.0,71\n"
    m = parse_latency_csv(text)
    assert m.get("A", "t2") is None and m.get("B", "t1") is None
    assert m.vector("A", ["t1", "t2"]) is None
    assert m.column("t1") == {"A": 1.5}


def test_repeats_collapse_to_median():
    text = "model,target,latency_ms,top1\nA,t,1.0,\nA,t,5.0,\nA,t,2.0,\n"
    assert parse_latency_csv(text).get("A", "t") == 2.0


@pytest.mark.parametrize("text,line", [
    ("model,target,latency\nA,t,1\n", 1),
    ("model,target,latency_ms,top1\nA,t,abc,1\n", 2),
    ("model,target,latency_ms,top1\nA,t,1,\nB,t,-3,\n", 3),
    ("model,target,latency_ms,top1\nA,t\n", 2),
    ("", 1),
])
def test_malformed_rows_report_line(text, line):
    with pytest.raises(CSVFormatError) as e:
        parse_latency_csv(text)
    assert e.value.line == line


def test_round_trip():
    m = bundled_latencies()
    again = parse_latency_csv(m.to_csv())
    assert again.latency_ms == m.latency_ms
    assert again.accuracy == m.accuracy
