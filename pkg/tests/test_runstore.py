import json
import os

import pytest

from owclib.errors import EmptyStoreError, ResumeRefusedError
from owclib.records import ScoreKey, ScoreRecord
from owclib.runstore import RunStore, checkpoint_and_resume


def score(sample_id: str, li: int = 1, failed: bool = False) -> ScoreRecord:
    if failed:
        return ScoreRecord.failure(ScoreKey("model-a", "C101", sample_id, "base"), RuntimeError("boom"), 4)
    return ScoreRecord("model-a", "C101", sample_id, "base", ti=li, li=li, ss=0.5, cs=0.7, best_concept="x")


@pytest.mark.asyncio
async def test_append_and_read(store_dir):
    run_store = RunStore(store_dir)
    run_store.initialize({"seed": 0}, "hash-1")
    await run_store.append(score("c101-001"))
    await run_store.append(score("c101-000"))
    run_store.end_session()

    assert [record.sample_id for record in run_store.canonical_scores()] == ["c101-000", "c101-001"]
    assert run_store.read_manifest()["config_hash"] == "hash-1"
    assert len(run_store.segment_paths()) == 1


@pytest.mark.asyncio
async def test_sessions_write_new_segments(store_dir):
    run_store = RunStore(store_dir)
    await run_store.append(score("c101-000"))
    run_store.end_session()
    await run_store.append(score("c101-001"))
    run_store.end_session()
    assert [os.path.basename(path) for path in run_store.segment_paths()] == [
        "scores-00000.jsonl",
        "scores-00001.jsonl",
    ]


@pytest.mark.asyncio
async def test_failure_never_replaces_success(store_dir):
    run_store = RunStore(store_dir)
    await run_store.append(score("c101-000"))
    await run_store.append(score("c101-000", failed=True))
    await run_store.append(score("c101-001", failed=True))
    await run_store.append(score("c101-001", li=0))
    run_store.end_session()

    records = run_store.read_scores()
    assert not records[ScoreKey("model-a", "C101", "c101-000", "base")].failed
    assert records[ScoreKey("model-a", "C101", "c101-001", "base")].li == 0


@pytest.mark.asyncio
async def test_torn_and_unreadable_lines_skipped(store_dir, caplog):
    run_store = RunStore(store_dir)
    await run_store.append(score("c101-000"))
    run_store.end_session()
    with open(run_store.segment_paths()[0], "a", encoding="utf-8") as segment:
        segment.write("not json\n")
        segment.write(json.dumps(score("c101-001").to_dict())[:40])

    assert [record.sample_id for record in run_store.canonical_scores()] == ["c101-000"]
    assert "skipping torn record" in caplog.text
    assert "skipping unreadable record" in caplog.text


def test_manifest_written_once(store_dir):
    run_store = RunStore(store_dir)
    run_store.initialize({"seed": 0}, "hash-1")
    run_store.initialize({"seed": 1}, "hash-2")
    manifest = run_store.read_manifest()
    assert manifest["config"] == {"seed": 0}
    assert manifest["artifact_version"] == "1.0.0"


def test_samples_merge(store_dir, samples):
    run_store = RunStore(store_dir)
    run_store.write_samples(samples[10:])
    run_store.write_samples(samples[:10])
    stored = run_store.read_samples()
    assert len(stored) == 20
    assert stored[0].sample_id == "c101-000"


def test_require_scores_empty(store_dir):
    with pytest.raises(EmptyStoreError) as raised:
        RunStore(store_dir).require_scores()
    assert raised.value.exit_code == 1


@pytest.mark.asyncio
async def test_checkpoint_and_resume(store_dir):
    run_store = RunStore(store_dir)
    run_store.initialize({}, "hash-1")
    await run_store.append(score("c101-000"))
    await run_store.append(score("c101-001", failed=True))
    run_store.end_session()

    keys = [ScoreKey("model-a", "C101", f"c101-00{index}", "base") for index in range(3)]
    assert checkpoint_and_resume(run_store, keys, "hash-1") == keys[1:]

    with pytest.raises(ResumeRefusedError) as raised:
        checkpoint_and_resume(run_store, keys, "hash-2")
    assert raised.value.exit_code == 2
    assert checkpoint_and_resume(run_store, keys, "hash-2", force=True) == keys[1:]


def test_checkpoint_and_resume_new_store(store_dir):
    keys = [ScoreKey("model-a", "C101", "c101-000", "base")]
    assert checkpoint_and_resume(RunStore(store_dir), keys, "hash-1") == keys


def test_analyses(store_dir):
    run_store = RunStore(store_dir)
    assert run_store.read_analysis("elo.json") is None
    run_store.write_analysis("elo.json", {"average": {"ratings": {"model-a": 1016.0}}})
    assert run_store.read_analysis("elo.json")["average"]["ratings"]["model-a"] == 1016.0
