import numpy as np
import pytest

from posestream.errors import DomainError, InstrumentationError
from posestream.latency import (
    SPANS,
    STAGES,
    LatencyTrace,
    latency_report,
    merge_traces,
    read_traces,
    record_stage,
    write_traces,
)


def full_trace(frame_id=0, start=1_000_000, step=10_000):
    trace = LatencyTrace(frame_id=frame_id)
    for i, stage in enumerate(STAGES):
        trace = record_stage(trace, stage, start + i * step)
    return trace


class TestRecordStage:
    def test_capture_to_render_span(self):
        trace = LatencyTrace(frame_id=1)
        trace = record_stage(trace, "capture", 1000)
        trace = record_stage(trace, "render_done", 51_000)
        assert trace.pixel_to_photon_us() == 50_000

    def test_duplicate_stage_rejected(self):
        trace = record_stage(LatencyTrace(frame_id=0), "capture", 1000)
        with pytest.raises(InstrumentationError):
            record_stage(trace, "capture", 2000)

    def test_out_of_order_timestamp_rejected(self):
        trace = record_stage(LatencyTrace(frame_id=0), "capture", 5000)
        with pytest.raises(InstrumentationError):
            record_stage(trace, "pose_sent", 4000)

    def test_later_stage_bound_enforced(self):
        trace = record_stage(LatencyTrace(frame_id=0), "render_done", 1000)
        with pytest.raises(InstrumentationError):
            record_stage(trace, "capture", 2000)

    def test_unknown_stage_rejected(self):
        with pytest.raises(ValueError):
            record_stage(LatencyTrace(frame_id=0), "warp_drive", 1)

    def test_original_trace_unchanged(self):
        trace = LatencyTrace(frame_id=0)
        updated = record_stage(trace, "capture", 1)
        assert not trace.has("capture")
        assert updated.has("capture")

    def test_spans_telescope_to_total(self):
        trace = full_trace()
        total = sum(trace.span_us(a, b) for _, a, b in SPANS)
        assert total == trace.pixel_to_photon_us()


class TestMergeTraces:
    def test_union_of_stages(self):
        client = LatencyTrace(frame_id=3)
        client = record_stage(client, "capture", 100)
        client = record_stage(client, "pose_received", 900)
        server = LatencyTrace(frame_id=3)
        server = record_stage(server, "frame_complete", 400)
        server = record_stage(server, "pose_sent", 800)
        merged = merge_traces(client, server)
        assert merged.stages == {
            "capture": 100, "frame_complete": 400, "pose_sent": 800, "pose_received": 900,
        }

    def test_identical_shared_stage_allowed(self):
        a = record_stage(LatencyTrace(frame_id=1), "capture", 50)
        b = record_stage(LatencyTrace(frame_id=1), "capture", 50)
        assert merge_traces(a, b).stages == {"capture": 50}

    def test_conflicting_timestamp_rejected(self):
        a = record_stage(LatencyTrace(frame_id=1), "capture", 50)
        b = record_stage(LatencyTrace(frame_id=1), "capture", 60)
        with pytest.raises(InstrumentationError):
            merge_traces(a, b)

    def test_frame_id_mismatch_rejected(self):
        with pytest.raises(InstrumentationError):
            merge_traces(LatencyTrace(frame_id=1), LatencyTrace(frame_id=2))


class TestLatencyReport:
    def test_single_trace_means_equal_spans(self):
        trace = full_trace(step=5_000)
        report = latency_report([trace])
        for name, a, b in SPANS:
            assert report.spans_ms[name] == (5.0, 0.0)
        assert report.pixel_to_photon_ms == (40.0, 0.0)
        assert report.n_traces == 1

    def test_known_spans_hand_computed(self):
        t1 = full_trace(frame_id=0, step=10_000)   # p2p 80 ms
        t2 = full_trace(frame_id=1, step=20_000)   # p2p 160 ms
        report = latency_report([t1, t2])
        assert report.pixel_to_photon_ms[0] == 120.0
        assert report.pixel_to_photon_ms[1] == 40.0
        assert report.spans_ms["uplink"] == (15.0, 5.0)

    def test_paper_budget_fps(self):
        # 100 traces totalling 199.1 ms each report ~5.02 pose updates/s.
        traces = []
        for i in range(100):
            t = LatencyTrace(frame_id=i)
            t = record_stage(t, "capture", 0)
            for j, stage in enumerate(STAGES[1:-1], start=1):
                t = record_stage(t, stage, j * 1000)
            t = record_stage(t, "render_done", 199_100)
            traces.append(t)
        report = latency_report(traces)
        assert np.isclose(report.pixel_to_photon_ms[0], 199.1)
        assert np.isclose(report.fps, 5.0226, atol=1e-3)

    def test_incomplete_traces_excluded(self):
        partial = record_stage(LatencyTrace(frame_id=9), "capture", 0)
        report = latency_report([full_trace(), partial])
        assert report.n_traces == 1
        assert report.n_incomplete == 1

    def test_empty_input_rejected(self):
        with pytest.raises(DomainError):
            latency_report([])
        with pytest.raises(DomainError):
            latency_report([record_stage(LatencyTrace(frame_id=0), "capture", 0)])

    def test_format_text_mentions_all_spans(self):
        text = latency_report([full_trace()]).format_text()
        for name, _, _ in SPANS:
            assert name in text
        assert "pixel_to_photon" in text
        assert "FPS" in text


def test_trace_file_round_trip(tmp_path):
    traces = [full_trace(frame_id=i, start=i * 1_000_000) for i in range(5)]
    path = tmp_path / "traces.jsonl"
    write_traces(traces, path)
    loaded = read_traces(path)
    assert len(loaded) == 5
    for a, b in zip(traces, loaded):
        assert a.frame_id == b.frame_id
        assert a.stages == b.stages
