import pytest

from revrec.corpus import build_log, load_corpus, save_corpus, sort_events
from revrec.errors import DuplicatePublish, OrphanEvent

from conftest import ev


def test_sort_is_stable_within_timestamp():
    a = ev("DiffPublished", 10, "alice", "d1", files=("f",))
    b = ev("ReviewerAssigned", 10, "bob", "d1", via="author")
    c = ev("Comment", 10, "carol", "d1")
    assert sort_events([a, b, c]) == [a, b, c]
    # publish listed first survives sorting even when everything shares ts
    assert sort_events([a, c, b]) == [a, c, b]


def test_build_log_orders_by_ts():
    a = ev("DiffPublished", 5, "alice", "d1", files=("f",))
    b = ev("Comment", 30, "bob", "d1")
    c = ev("Comment", 10, "carol", "d1")
    log = build_log([a, b, c])
    assert [e.ts for e in log] == [5, 10, 30]


def test_duplicate_publish_rejected():
    a = ev("DiffPublished", 5, "alice", "d1", files=("f",))
    b = ev("DiffPublished", 9, "alice", "d1", files=("f",))
    with pytest.raises(DuplicatePublish):
        build_log([a, b])


def test_orphan_event_rejected():
    with pytest.raises(OrphanEvent):
        build_log([ev("Comment", 3, "bob", "ghost")])


def test_event_before_publish_rejected():
    a = ev("Comment", 3, "bob", "d1")
    b = ev("DiffPublished", 5, "alice", "d1", files=("f",))
    with pytest.raises(OrphanEvent):
        build_log([a, b])


def test_meetings_need_no_diff():
    log = build_log([ev("Meeting", 3, "bob", duration_s=600)])
    assert len(log) == 1


def test_save_load_round_trip(tmp_path, small_log):
    p = tmp_path / "c.jsonl"
    save_corpus(small_log, p)
    loaded, dropped = load_corpus(p)
    assert dropped == 0
    assert loaded.events == small_log.events


def test_load_drops_duplicate_lines(tmp_path):
    a = ev("DiffPublished", 5, "alice", "d1", files=("f",))
    b = ev("Comment", 9, "bob", "d1")
    p = tmp_path / "c.jsonl"
    save_corpus(build_log([a, b]), p)
    text = p.read_text()
    first = text.splitlines()[0]
    p.write_text(text + first + "\n")
    loaded, dropped = load_corpus(p)
    assert dropped == 1
    assert len(loaded) == 2


def test_load_accepts_blank_lines(tmp_path):
    a = ev("DiffPublished", 5, "alice", "d1", files=("f",))
    p = tmp_path / "c.jsonl"
    save_corpus(build_log([a]), p)
    p.write_text("\n" + p.read_text() + "\n\n")
    loaded, dropped = load_corpus(p)
    assert len(loaded) == 1 and dropped == 0
