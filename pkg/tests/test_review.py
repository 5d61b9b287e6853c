"""Store semantics (revisions, durability, concurrency) and the HTTP API."""

from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from piiscope.dataset import compute_stats, load_dataset, save_dataset, sample_to_record, stats_to_record
from piiscope.model import PiiType, Provenance, Status
from piiscope.review import (
    NotFoundError,
    ReviewStore,
    ReviewUpdate,
    ReviewValidationError,
    RevisionConflictError,
    create_app,
)

from test_model import make_sample, span_at


def seed_samples():
    ctx1 = "I am a night nurse and I am 34."
    ctx2 = "My wife and I moved to Brighton in 2019."
    ctx3 = "As an electrician I wear brown overalls."
    return [
        make_sample(
            ctx1,
            [
                span_at(ctx1, "night nurse", PiiType.OCCUPATION, 1),
                span_at(ctx1, "34", PiiType.AGE, 0),
            ],
            id="r-001",
        ),
        make_sample(
            ctx2,
            [
                span_at(ctx2, "wife", PiiType.RELATIONSHIP, 0),
                span_at(ctx2, "Brighton", PiiType.LOCATION, 1),
                span_at(ctx2, "2019", PiiType.DATETIME, 0),
            ],
            id="r-002",
            provenance=Provenance.REDDIT,
            status=Status.VALIDATED,
        ),
        make_sample(
            ctx3,
            [
                span_at(ctx3, "electrician", PiiType.OCCUPATION, 1),
                span_at(ctx3, "brown overalls", PiiType.APPEARANCE, 0),
            ],
            id="r-003",
            provenance=Provenance.REDDIT,
        ),
    ]


@pytest.fixture()
def store(tmp_path):
    path = tmp_path / "review.jsonl"
    save_dataset(seed_samples(), str(path))
    return ReviewStore(str(path))


def flip_first_relevance(sample) -> list[dict]:
    spans = sample_to_record(sample)["spans"]
    spans[0]["relevance"] = 1 - spans[0]["relevance"]
    return spans


def test_list_samples_orders_and_summarizes(store):
    rows = store.list_samples()
    assert [r["id"] for r in rows] == ["r-001", "r-002", "r-003"]
    assert rows[0] == {"id": "r-001", "status": "raw", "revision": 0, "span_count": 2}


def test_list_samples_filters_conjunctively(store):
    assert [r["id"] for r in store.list_samples(provenance=Provenance.REDDIT)] == [
        "r-002",
        "r-003",
    ]
    assert [
        r["id"]
        for r in store.list_samples(status=Status.VALIDATED, provenance=Provenance.REDDIT)
    ] == ["r-002"]
    assert store.list_samples(status=Status.VALIDATED, provenance=Provenance.SYNTHETIC) == []


def test_get_sample_unknown_id(store):
    with pytest.raises(NotFoundError):
        store.get_sample("r-999")


def test_update_flips_relevance_and_bumps_revision(store):
    sample = store.get_sample("r-001")
    new_rev = store.update_sample(
        ReviewUpdate("r-001", 0, new_spans=flip_first_relevance(sample)), annotator="ann1"
    )
    assert new_rev == 1
    updated = store.get_sample("r-001")
    assert updated.revision == 1
    assert updated.spans[0].relevance == 0
    # untouched fields survive
    assert updated.context == sample.context
    assert updated.question == sample.question


def test_stale_revision_conflicts(store):
    sample = store.get_sample("r-001")
    update = ReviewUpdate("r-001", 0, new_spans=flip_first_relevance(sample))
    store.update_sample(update)
    with pytest.raises(RevisionConflictError) as err:
        store.update_sample(update)
    assert err.value.expected == 0
    assert err.value.actual == 1


def test_update_unknown_sample(store):
    with pytest.raises(NotFoundError):
        store.update_sample(ReviewUpdate("r-999", 0, new_status="validated"))


def test_bad_span_offsets_name_the_span(store):
    bad = [{"text": "nothing", "start": 0, "end": 7, "type": "occupation", "relevance": 1}]
    with pytest.raises(ReviewValidationError) as err:
        store.update_sample(ReviewUpdate("r-001", 0, new_spans=bad))
    assert any(v.span_index == 0 for v in err.value.violations)
    # failed update leaves no trace
    assert store.get_sample("r-001").revision == 0


def test_spans_validate_against_new_context(store):
    new_context = "Night shifts exhaust me."
    with pytest.raises(ReviewValidationError):
        store.update_sample(ReviewUpdate("r-001", 0, new_context=new_context))
    ok = store.update_sample(
        ReviewUpdate(
            "r-001",
            0,
            new_context=new_context,
            new_spans=[
                {"text": "Night", "start": 0, "end": 5, "type": "datetime", "relevance": 0}
            ],
        )
    )
    assert ok == 1


def test_empty_update_rejected(store):
    with pytest.raises(ReviewValidationError):
        store.update_sample(ReviewUpdate("r-001", 0))


def test_acknowledged_update_survives_restart(store, tmp_path):
    sample = store.get_sample("r-002")
    store.update_sample(
        ReviewUpdate("r-002", 0, new_question="Anything new?", new_status="raw"),
        annotator="ann2",
    )
    reloaded = ReviewStore(store.dataset_path)
    again = reloaded.get_sample("r-002")
    assert again.question == "Anything new?"
    assert again.status is Status.RAW
    assert again.revision == 1
    assert again.context == sample.context

    audit_lines = [
        json.loads(line)
        for line in open(store.audit_log_path, encoding="utf-8")
        if line.strip()
    ]
    assert audit_lines[-1]["annotator"] == "ann2"
    assert audit_lines[-1]["sample_id"] == "r-002"
    assert sorted(audit_lines[-1]["fields"]) == ["new_question", "new_status"]


def test_disk_file_always_validates_after_updates(store):
    for i in range(3):
        sample = store.get_sample("r-003")
        store.update_sample(
            ReviewUpdate("r-003", i, new_spans=flip_first_relevance(sample))
        )
    samples = load_dataset(store.dataset_path)
    assert {s.id for s in samples} == {"r-001", "r-002", "r-003"}
    assert store.get_sample("r-003").revision == 3


def test_concurrent_same_sample_has_one_winner(store):
    sample = store.get_sample("r-001")
    spans = flip_first_relevance(sample)
    results = []

    def attempt():
        try:
            results.append(store.update_sample(ReviewUpdate("r-001", 0, new_spans=spans)))
        except RevisionConflictError:
            results.append("conflict")

    threads = [threading.Thread(target=attempt) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count(1) == 1
    assert results.count("conflict") == 7
    assert store.get_sample("r-001").revision == 1


def test_concurrent_disjoint_samples_all_win(store):
    ids = ["r-001", "r-002", "r-003"]
    errors = []

    def attempt(sample_id):
        try:
            sample = store.get_sample(sample_id)
            store.update_sample(
                ReviewUpdate(sample_id, 0, new_spans=flip_first_relevance(sample))
            )
        except Exception as exc:  # noqa: BLE001
            errors.append(exc)

    threads = [threading.Thread(target=attempt, args=(i,)) for i in ids]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert errors == []
    assert all(store.get_sample(i).revision == 1 for i in ids)
    assert {s.id: s.revision for s in load_dataset(store.dataset_path)} == {
        i: 1 for i in ids
    }


@pytest.fixture()
def client(store):
    return TestClient(create_app(store))


def test_http_list_and_filters(client):
    assert [r["id"] for r in client.get("/samples").json()] == ["r-001", "r-002", "r-003"]
    reddit = client.get("/samples", params={"provenance": "reddit"}).json()
    assert [r["id"] for r in reddit] == ["r-002", "r-003"]
    assert client.get("/samples", params={"status": "bogus"}).status_code == 400


def test_http_get_sample(client):
    record = client.get("/samples/r-001").json()
    assert record["id"] == "r-001"
    assert record["revision"] == 0
    assert record["spans"][0]["type"] == "occupation"
    assert client.get("/samples/r-404").status_code == 404


def test_http_update_roundtrip(client, store):
    record = client.get("/samples/r-001").json()
    record["spans"][0]["relevance"] = 0
    resp = client.put(
        "/samples/r-001",
        json={"expected_revision": 0, "new_spans": record["spans"]},
        headers={"X-Annotator": "ann-http"},
    )
    assert resp.status_code == 200
    assert resp.json() == {"new_revision": 1}
    assert client.get("/samples/r-001").json()["revision"] == 1

    audit = open(store.audit_log_path, encoding="utf-8").read()
    assert "ann-http" in audit


def test_http_stale_update_conflicts(client):
    body = {"expected_revision": 0, "new_status": "validated"}
    assert client.put("/samples/r-001", json=body).status_code == 200
    second = client.put("/samples/r-001", json=body)
    assert second.status_code == 409
    payload = second.json()
    assert payload["expected_revision"] == 0
    assert payload["actual_revision"] == 1


def test_http_invalid_spans_rejected(client):
    resp = client.put(
        "/samples/r-001",
        json={
            "expected_revision": 0,
            "new_spans": [
                {"text": "zzz", "start": 1, "end": 4, "type": "occupation", "relevance": 1}
            ],
        },
    )
    assert resp.status_code == 400
    assert resp.json()["violations"][0]["span_index"] == 0


def test_http_update_unknown_sample(client):
    resp = client.put("/samples/r-404", json={"expected_revision": 0, "new_status": "raw"})
    assert resp.status_code == 404


def test_http_stats_matches_compute(client, store):
    expected = stats_to_record(compute_stats(load_dataset(store.dataset_path)))
    assert client.get("/stats").json() == expected


def test_http_placeholder_page(client):
    resp = client.get("/")
    assert resp.status_code == 200
    assert "review service" in resp.text


def test_http_serves_built_frontend(store, tmp_path):
    ui = tmp_path / "dist"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>annotator shell</body></html>")
    client = TestClient(create_app(store, frontend_dir=str(ui)))
    assert "annotator shell" in client.get("/").text
    # API routes still win over the static mount
    assert client.get("/stats").status_code == 200
