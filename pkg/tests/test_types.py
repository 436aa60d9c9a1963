import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sthg.types import (
    BBox, EdgeKind, FaceTrack, NodeType, Segment, TrackEntry, VideoBundle, WearerStream, frame_to_time, iou,
    label_runs_to_segments, reference_segments,
)

coord = st.floats(-100, 100, allow_nan=False)


@st.composite
def boxes(draw):
    x1, y1 = draw(coord), draw(coord)
    w, h = draw(st.floats(0.01, 50)), draw(st.floats(0.01, 50))
    return BBox(x1, y1, x1 + w, y1 + h)


def test_iou_examples():
    b = BBox(0, 0, 1, 1)
    assert iou(b, b) == 1.0
    assert iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == 0.0
    assert iou(BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)) == pytest.approx(1 / 3)


def test_touching_boxes_do_not_overlap():
    assert iou(BBox(0, 0, 1, 1), BBox(1, 0, 2, 1)) == 0.0


@pytest.mark.parametrize("vals", [(1, 0, 1, 2), (0, 2, 1, 1), (0, 0, math.inf, 1), (0, 0, 1, math.nan)])
def test_invalid_box(vals):
    with pytest.raises(ValueError):
        BBox(*vals)


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


# grid coordinates: sub-ulp differences between boxes are not observable in IoU
grid = st.integers(-400, 400).map(lambda v: v / 4)
grid_boxes = st.builds(lambda x, y, w, h: BBox(x, y, x + w, y + h), grid, grid,
                       st.integers(1, 200).map(lambda v: v / 4), st.integers(1, 200).map(lambda v: v / 4))


@given(grid_boxes, grid_boxes)
def test_iou_one_iff_equal(a, b):
    assert iou(a, a) == pytest.approx(1.0)
    if a != b:
        assert iou(a, b) < 1.0


@pytest.mark.parametrize("frame,fps,expected", [(0, 30, 0.0), (30, 30, 1.0), (45, 30, 1.5)])
def test_frame_to_time(frame, fps, expected):
    assert frame_to_time(frame, fps) == expected


@pytest.mark.parametrize("fps", [0, -5])
def test_frame_to_time_bad_fps(fps):
    with pytest.raises(ValueError):
        frame_to_time(3, fps)


def test_edge_kind_classification_exhaustive():
    V, W = NodeType.VISIBLE, NodeType.WEARER
    assert EdgeKind.between(V, V) is EdgeKind.VV
    assert EdgeKind.between(V, W) is EdgeKind.VW
    assert EdgeKind.between(W, V) is EdgeKind.VW
    assert EdgeKind.between(W, W) is EdgeKind.WW


def _entry(f, d=3):
    return TrackEntry(f, BBox(0, 0, 1, 1), np.zeros(d))


def test_track_invariants():
    with pytest.raises(ValueError):
        FaceTrack("t", "p", ())
    with pytest.raises(ValueError):
        FaceTrack("t", "p", (_entry(2), _entry(2)))
    with pytest.raises(ValueError):
        FaceTrack("t", "p", (_entry(1, 3), _entry(2, 4)))
    assert FaceTrack("t", "p", (_entry(1), _entry(5))).dim == 3


def test_bundle_rejects_out_of_range_frames():
    track = FaceTrack("t", "p", (_entry(10),))
    with pytest.raises(ValueError):
        VideoBundle("v", 30.0, 10, (track,), WearerStream.empty(2))


def test_segment_invariants():
    with pytest.raises(ValueError):
        Segment("a", 2.0, 2.0)
    with pytest.raises(ValueError):
        Segment("a", -1.0, 2.0)
    assert Segment("a", 1.0, 2.5).duration == 1.5


def test_label_runs():
    segs = label_runs_to_segments("A", [0, 1, 2, 5, 6], 10.0)
    assert [(s.t_start, s.t_end) for s in segs] == [(0.0, 0.3), (0.5, 0.7)]


def test_reference_segments_from_labels():
    labels = {("A", 0): 1, ("A", 1): 1, ("A", 2): 0, ("CW", 2): 1}
    b = VideoBundle("v", 1.0, 3, (), WearerStream(np.array([2]), np.zeros((1, 2))), labels)
    segs = reference_segments(b)
    assert segs == [Segment("A", 0.0, 2.0), Segment("CW", 2.0, 3.0)]
