import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentkit.captioning import (
    GENERIC,
    QUERY_GUIDED,
    CaptionRecord,
    CaptionStore,
    HashProvider,
    HttpProvider,
    ProviderRequest,
    QueryIntent,
    RecordingProvider,
    SceneSegment,
    ScriptedProvider,
    build_caption_store,
    classify_relevance,
    generate_captions,
    latency_breakdown,
    load_lexicon,
    parse_query,
    segment_video,
)
from momentkit.captioning.pipeline import dumps_captions, loads_captions
from momentkit.captioning.providers import CAPTION_GENERIC, CAPTION_QUERY_GUIDED, EMBED_TEXT, QA_RELEVANCE
from momentkit.embeddings import FrameSequence
from momentkit.errors import (
    ConfigError,
    EmptyInputError,
    EmptyQueryError,
    ProviderError,
    StoreMissingError,
)


def _frames(duration, step=1.0, dim=4):
    ts = np.arange(0.0, duration, step)
    return FrameSequence.from_arrays(ts, np.ones((len(ts), dim)) + np.arange(len(ts))[:, None], duration)


def _segments(n, interval=2.0):
    return segment_video(n * interval, interval, _frames(n * interval))


def _term_of(prompt):
    return prompt.split("Does this ", 1)[1].split(" appear", 1)[0]


# query parsing

def test_parse_query_examples():
    intent = parse_query("a man holding a child")
    assert {"man", "child"} <= set(intent.objects)
    assert "holding" in intent.actions
    assert intent.raw_query == "a man holding a child"
    dog = parse_query("dog")
    assert dog.objects == ("dog",) and dog.actions == ()
    for empty in ("", "   \n"):
        with pytest.raises(EmptyQueryError):
            parse_query(empty)


def test_parse_query_normalizes():
    intent = parse_query("The DOG runs, the dog RUNS and the dog's ball")
    assert intent.objects == ("dog", "ball")
    assert intent.actions == ("runs",)
    assert all(t and t == t.lower() for t in intent.terms)


def test_parse_query_delegated_extractor():
    intent = parse_query("anything", extractor=lambda q: (["Man", "man", " "], ["Walking"]))
    assert intent.objects == ("man",) and intent.actions == ("walking",)


def test_lexicon_is_versioned():
    lex = load_lexicon()
    assert lex.version >= 1
    assert "holding" in lex.actions and "the" in lex.stop_words


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="abcdefghij ,.'XYZ", min_size=1, max_size=40))
def test_parse_query_invariants(raw):
    try:
        intent = parse_query(raw)
    except EmptyQueryError:
        assert not raw.strip()
        return
    for group in (intent.objects, intent.actions):
        assert all(group) and len(set(group)) == len(group)
        assert all(t == t.lower() for t in group)
    assert intent == parse_query(raw)


# relevance classification

def test_classify_relevance_examples():
    seg = SceneSegment(0, 0.0, 2.0)
    intent = QueryIntent("a man holding a child", ("man", "child"), ("holding",))
    assert classify_relevance(seg, intent, ScriptedProvider(qa=True))
    assert not classify_relevance(seg, intent, ScriptedProvider(qa=False))

    rec = RecordingProvider(ScriptedProvider(qa=lambda sid, prompt: _term_of(prompt) == "child"))
    assert classify_relevance(seg, intent, rec)
    assert [r.prompt for r in rec.transcript] == [
        "Does this man appear in the scene?",
        "Does this child appear in the scene?",
        "Does this holding appear in the scene?",
    ]
    assert not classify_relevance(seg, intent, rec, aggregation="all")


def test_classify_relevance_errors():
    seg = SceneSegment(7, 0.0, 2.0)
    with pytest.raises(ConfigError):
        classify_relevance(seg, QueryIntent("x", (), ()), ScriptedProvider())
    with pytest.raises(ProviderError) as exc:
        classify_relevance(seg, QueryIntent("dog", ("dog",), ()), ScriptedProvider(fail=lambda r: True))
    assert exc.value.segment_id == 7
    # non-binary QA answers are rejected
    with pytest.raises(ProviderError):
        classify_relevance(seg, QueryIntent("dog", ("dog",), ()), ScriptedProvider(qa=lambda s, p: "maybe"))


# segmentation

def test_segment_video_examples():
    segs = segment_video(10, 2, _frames(10))
    assert [s.span for s in segs] == [(0, 2), (2, 4), (4, 6), (6, 8), (8, 10)]
    segs = segment_video(9, 2, _frames(9))
    assert len(segs) == 5 and segs[-1].span == (8, 9)
    assert len(segment_video(150, 2, _frames(150))) == 75
    with pytest.raises(EmptyInputError):
        segment_video(10, 2, FrameSequence((), 10.0))
    with pytest.raises(ConfigError):
        segment_video(10, 0, _frames(10))


def test_segment_representatives():
    frames = FrameSequence.from_arrays([0.0, 1.0, 3.0], np.eye(3), 4.0)
    segs = segment_video(4, 2, frames)
    # midpoint 1 hits frame 1; midpoint 3 hits frame 2
    assert [s.representative_frame.frame_index for s in segs] == [1, 2]
    frames = FrameSequence.from_arrays([0.0, 2.0], np.eye(2), 2.0)
    # midpoint 1 is a tie, resolved to the earlier frame
    assert segment_video(2, 2, frames)[0].representative_frame.frame_index == 0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 500), st.floats(0.05, 50))
def test_segments_tile_duration(duration, interval):
    segs = segment_video(duration, interval, _frames(duration, step=max(duration / 7, 0.01)))
    assert segs[0].start == 0 and segs[-1].end == duration
    for a, b in zip(segs, segs[1:]):
        assert a.end == b.start and a.start < a.end
    assert [s.segment_id for s in segs] == list(range(len(segs)))


# caption generation

def test_se_mode_paths_and_counts():
    segs = _segments(6)
    intent = parse_query("a man holding a child")
    for qa, path in ((False, GENERIC), (True, QUERY_GUIDED)):
        rec = RecordingProvider(ScriptedProvider(qa=qa))
        caps = generate_captions(segs, intent, rec, "SE")
        assert [c.path for c in caps] == [path] * 6
        assert all(c.relevance_passed == qa and not c.fallback for c in caps)
        assert rec.count(QA_RELEVANCE) == len(intent.terms) * 6
        assert rec.count(CAPTION_QUERY_GUIDED) + rec.count(CAPTION_GENERIC) == 6
        assert rec.count(EMBED_TEXT) == 6


def test_le_mode_selective_recaptioning():
    segs = _segments(8)
    intent = parse_query("a dog running")
    store = build_caption_store(segs, ScriptedProvider(caption=lambda k, s, p: f"stored {s}"), "vid")
    rec = RecordingProvider(ScriptedProvider(qa=lambda sid, prompt: sid in (2, 5)))
    caps = generate_captions(segs, intent, rec, "LE", store, "vid")
    assert rec.count(CAPTION_QUERY_GUIDED) == 2
    assert {r.segment_id for r in rec.calls_for(CAPTION_QUERY_GUIDED)} == {2, 5}
    assert rec.count(CAPTION_GENERIC) == 0
    assert rec.count(QA_RELEVANCE) == 2 * 8
    assert [c.text for c in caps if c.path == GENERIC] == [f"stored {i}" for i in (0, 1, 3, 4, 6, 7)]
    assert [c.segment.segment_id for c in caps if c.path == QUERY_GUIDED] == [2, 5]


def test_le_store_errors(tmp_path):
    segs = _segments(4)
    intent = parse_query("dog")
    prov = ScriptedProvider(qa=True)
    with pytest.raises(StoreMissingError):
        generate_captions(segs, intent, prov, "LE", None)
    with pytest.raises(StoreMissingError):
        CaptionStore.load(tmp_path / "missing.jsonl")
    store = build_caption_store(segs, prov, "vid")
    with pytest.raises(StoreMissingError):
        generate_captions(segs, intent, prov, "LE", store, "other")
    # stale store: the video got longer
    with pytest.raises(StoreMissingError):
        generate_captions(_segments(5), intent, prov, "LE", store, "vid")
    # store built with a different interval
    other = segment_video(8, 4, _frames(8))
    with pytest.raises(StoreMissingError):
        generate_captions(other, intent, prov, "LE", store, "vid")
    store.save(tmp_path / "store.jsonl")
    back = CaptionStore.load(tmp_path / "store.jsonl")
    assert list(back.records()) == list(store.records())
    assert json.loads((tmp_path / "store.jsonl").read_text().splitlines()[0]).keys() == {
        "source_id", "segment_id", "start", "end", "text"}


def test_provider_failure_falls_back_to_generic():
    segs = _segments(4)
    intent = parse_query("dog")
    prov = ScriptedProvider(qa=True, fail=lambda r: r.kind == QA_RELEVANCE and r.segment_id == 1
                            or r.kind == CAPTION_QUERY_GUIDED and r.segment_id == 2)
    caps = generate_captions(segs, intent, prov, "SE")
    assert [c.path for c in caps] == [QUERY_GUIDED, GENERIC, GENERIC, QUERY_GUIDED]
    assert [c.fallback for c in caps] == [False, True, True, False]
    assert [c.relevance_passed for c in caps] == [True, False, False, True]
    # no fallback exists for the generic path itself
    bad = ScriptedProvider(qa=False, fail=lambda r: r.kind == CAPTION_GENERIC)
    with pytest.raises(ProviderError):
        generate_captions(segs, intent, bad, "SE")


def test_caption_record_invariant():
    seg = SceneSegment(0, 0.0, 2.0)
    with pytest.raises(ValueError):
        CaptionRecord(seg, "x", [1.0], QUERY_GUIDED, False)
    with pytest.raises(ValueError):
        CaptionRecord(seg, "x", [1.0], GENERIC, True)


def test_concurrent_matches_sequential():
    segs = _segments(20)
    intent = parse_query("a woman opening a door")
    prov = HashProvider(dimension=16, seed=4, yes_rate=0.4)
    seq = generate_captions(segs, intent, prov, "SE")
    par = generate_captions(segs, intent, prov, "SE", max_workers=8)
    assert seq == par
    assert dumps_captions(seq) == dumps_captions(par)
    # caption files do not carry the representative frame
    assert dumps_captions(loads_captions(dumps_captions(seq))) == dumps_captions(seq)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**16), st.sampled_from(["any", "all"]))
def test_call_count_closed_form(n, seed, aggregation):
    segs = _segments(n)
    intent = parse_query("a man holding a child near a car")
    rng = np.random.default_rng(seed)
    answers = {(s, t): bool(rng.random() < 0.4) for s in range(n) for t in intent.terms}
    qa = lambda sid, prompt: answers[(sid, _term_of(prompt))]
    agg = any if aggregation == "any" else all
    relevant = [agg(answers[(s, t)] for t in intent.terms) for s in range(n)]

    se = RecordingProvider(ScriptedProvider(qa=qa))
    caps = generate_captions(segs, intent, se, "SE", aggregation=aggregation)
    assert se.count(QA_RELEVANCE) == len(intent.terms) * n
    assert se.count(CAPTION_QUERY_GUIDED) + se.count(CAPTION_GENERIC) == n
    assert [c.path == QUERY_GUIDED for c in caps] == relevant

    store = build_caption_store(segs, ScriptedProvider())
    le = RecordingProvider(ScriptedProvider(qa=qa))
    caps = generate_captions(segs, intent, le, "LE", store, aggregation=aggregation)
    assert le.count(QA_RELEVANCE) == len(intent.terms) * n
    assert le.count(CAPTION_QUERY_GUIDED) == sum(relevant)
    assert le.count(CAPTION_GENERIC) == 0
    assert [c.path == QUERY_GUIDED for c in caps] == relevant


def test_latency_breakdown():
    ticks = iter(range(1000))
    rec = RecordingProvider(ScriptedProvider(qa=lambda s, p: s == 0), clock=lambda: float(next(ticks)))
    segs = _segments(3)
    generate_captions(segs, parse_query("dog"), rec, "SE")
    # each call takes exactly one tick
    assert latency_breakdown(rec.transcript, "SE") == {"QAF": 3.0, "QGC": 3.0}
    assert latency_breakdown(rec.transcript, "LE") == {"QAF": 3.0, "SRC": 1.0}
    with pytest.raises(ConfigError):
        latency_breakdown(rec.transcript, "XX")


def test_hash_provider_deterministic():
    req = ProviderRequest(CAPTION_QUERY_GUIDED, "Generate", 3, None, "a dog")
    a, b = HashProvider(seed=1), HashProvider(seed=1)
    assert a.respond(req).answer == b.respond(req).answer
    assert a.respond(req).answer.startswith("a dog:")
    emb = HashProvider(8).respond(ProviderRequest(EMBED_TEXT, "hello")).answer
    np.testing.assert_array_equal(emb, HashProvider(8).respond(ProviderRequest(EMBED_TEXT, "hello")).answer)


class _Handler(BaseHTTPRequestHandler):
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append(body)
        if body["kind"] == "qa_relevance":
            answer = "yes" if "dog" in body["prompt"] else "no"
        elif body["kind"] == "embed_text":
            answer = [1.0, float(len(body["prompt"]))]
        else:
            answer = f"{body['kind']} {body.get('segment_id')}"
        data = json.dumps({"answer": answer}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def test_http_provider_round_trip():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        prov = HttpProvider(f"http://127.0.0.1:{server.server_port}/", timeout=5, retries=0)
        segs = _segments(3)
        caps = generate_captions(segs, parse_query("a dog and a cat"), prov, "SE", max_workers=3)
        assert [c.path for c in caps] == [QUERY_GUIDED] * 3
        assert [c.text for c in caps] == [f"caption_query_guided {i}" for i in range(3)]
        kinds = {b["kind"] for b in _Handler.seen}
        assert kinds == {"qa_relevance", "caption_query_guided", "embed_text"}
        qa = [b for b in _Handler.seen if b["kind"] == "qa_relevance"]
        assert all(set(b) <= {"kind", "prompt", "image_ref", "query", "segment_id"} for b in qa)
        assert all(b["query"] == "a dog and a cat" for b in qa)
    finally:
        server.shutdown()
        server.server_close()


def test_http_provider_unreachable():
    prov = HttpProvider("http://127.0.0.1:9/", timeout=0.5, retries=1)
    with pytest.raises(ProviderError) as exc:
        classify_relevance(SceneSegment(4, 0, 2), parse_query("dog"), prov)
    assert exc.value.segment_id == 4
