import numpy as np
import pytest

import fillerspot as fs
from fillerspot.decode import (
    MIN_DURATION_S,
    DetectionEvent,
    decode,
    detections_to_csv,
    save_detections,
)
from fillerspot.net import Prediction

HOP_S = 0.01


def _prediction(heatmap, length=None, offset=None, ds=4):
    heatmap = np.asarray(heatmap, dtype=np.float32)
    t = heatmap.shape[0]
    if length is None:
        length = np.full(t, 0.3, dtype=np.float32)
    if offset is None:
        offset = np.zeros(t, dtype=np.float32)
    return Prediction(
        heatmap=heatmap,
        length=np.asarray(length, dtype=np.float32),
        offset=np.asarray(offset, dtype=np.float32),
        downsample_factor=ds,
    )


def _peaks(events):
    return {(e.category_id, e.peak_frame) for e in events}


def test_flat_heatmap_yields_nothing():
    events = decode(_prediction(np.zeros((40, 3))), HOP_S)
    assert events == []


def test_single_peak_round_trip():
    heatmap = np.zeros((100, 2))
    heatmap[50, 0] = 0.9
    length = np.zeros(100)
    length[50] = 0.3
    offset = np.zeros(100)
    offset[50] = 0.25
    events = decode(_prediction(heatmap, length, offset), HOP_S)
    assert len(events) == 1
    event = events[0]
    assert event.category_id == 0
    assert event.peak_frame == 50
    assert event.score == pytest.approx(0.9)
    center = (50 + 0.25) * HOP_S * 4
    assert event.onset == pytest.approx(center - 0.15)
    assert event.duration == pytest.approx(0.3)
    assert event.end == pytest.approx(center + 0.15)


def test_equal_adjacent_peaks_resolve_to_earlier_frame():
    heatmap = np.zeros((30, 1))
    heatmap[10, 0] = heatmap[11, 0] = 0.8
    events = decode(_prediction(heatmap), HOP_S)
    assert _peaks(events) == {(0, 10)}


def test_equal_peaks_at_radius_edge():
    heatmap = np.zeros((30, 1))
    heatmap[10, 0] = heatmap[12, 0] = 0.8
    events = decode(_prediction(heatmap), HOP_S)
    assert _peaks(events) == {(0, 10)}


def test_equal_peaks_beyond_radius_both_survive():
    heatmap = np.zeros((30, 1))
    heatmap[10, 0] = heatmap[13, 0] = 0.8
    events = decode(_prediction(heatmap), HOP_S)
    assert _peaks(events) == {(0, 10), (0, 13)}


def test_strictly_greater_neighbor_wins():
    heatmap = np.zeros((30, 1))
    heatmap[10, 0] = 0.7
    heatmap[11, 0] = 0.9
    events = decode(_prediction(heatmap), HOP_S)
    assert _peaks(events) == {(0, 11)}


def test_threshold_is_monotone(rng):
    heatmap = rng.uniform(0.0, 1.0, size=(200, 3))
    loose = decode(_prediction(heatmap), HOP_S, fs.DecodeConfig(score_threshold=0.3))
    tight = decode(_prediction(heatmap), HOP_S, fs.DecodeConfig(score_threshold=0.5))
    assert _peaks(tight) <= _peaks(loose)
    assert all(e.score >= 0.5 for e in tight)


def test_score_is_heatmap_value_at_peak(rng):
    heatmap = rng.uniform(0.0, 1.0, size=(120, 2))
    for event in decode(_prediction(heatmap), HOP_S):
        assert event.score == pytest.approx(float(heatmap[event.peak_frame, event.category_id]))


def test_top_k_keeps_best(rng):
    heatmap = np.zeros((200, 1))
    scores = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    for i, s in enumerate(scores):
        heatmap[10 + 10 * i, 0] = s
    events = decode(_prediction(heatmap), HOP_S, fs.DecodeConfig(top_k=3))
    assert [e.score for e in events] == pytest.approx([0.9, 0.8, 0.7])


def test_results_sorted_best_first_with_deterministic_ties():
    heatmap = np.zeros((60, 3))
    heatmap[40, 0] = 0.6
    heatmap[20, 0] = 0.6
    heatmap[20, 2] = 0.6
    events = decode(_prediction(heatmap), HOP_S)
    keys = [(e.score, e.peak_frame, e.category_id) for e in events]
    assert keys == [(pytest.approx(0.6), 20, 0), (pytest.approx(0.6), 20, 2), (pytest.approx(0.6), 40, 0)]


def test_duration_floor():
    heatmap = np.zeros((30, 1))
    heatmap[15, 0] = 0.9
    events = decode(_prediction(heatmap, length=np.zeros(30)), HOP_S)
    assert events[0].duration == MIN_DURATION_S


def test_channels_decode_independently():
    heatmap = np.zeros((50, 4))
    heatmap[10, 0] = 0.9
    heatmap[30, 2] = 0.8
    events = decode(_prediction(heatmap), HOP_S)
    assert _peaks(events) == {(0, 10), (2, 30)}


def test_detection_event_validation():
    with pytest.raises(ValueError, match="duration"):
        DetectionEvent(category_id=0, onset=0.0, duration=0.0, score=0.5, peak_frame=0)
    with pytest.raises(ValueError, match="score"):
        DetectionEvent(category_id=0, onset=0.0, duration=0.1, score=1.2, peak_frame=0)
    with pytest.raises(ValueError, match="score"):
        DetectionEvent(category_id=0, onset=0.0, duration=0.1, score=0.0, peak_frame=0)


def test_detections_csv_golden():
    event = DetectionEvent(category_id=0, onset=1.86, duration=0.3, score=0.9, peak_frame=50)
    text = detections_to_csv([("clip_a", event)])
    assert text == (
        "clip_id,category,onset_s,duration_s,score\n"
        "clip_a,0,1.860000,0.300000,0.900000\n"
    )


def test_save_detections(tmp_path):
    event = DetectionEvent(category_id=1, onset=0.5, duration=0.2, score=0.7, peak_frame=3)
    path = tmp_path / "dets" / "out.csv"
    save_detections([("c", event)], path)
    assert path.read_text().startswith("clip_id,category")
