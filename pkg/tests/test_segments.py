"""Segment primitives and the segment list file format."""
import numpy as np
import pytest

from monogp.segments import Segment2D, load_segments, save_segments, segment_line


def test_segment_line_x_axis():
    l = segment_line(Segment2D([0.0, 0.0], [10.0, 0.0], id=0))
    if l[1] < 0:
        l = -l
    assert np.allclose(l, [0.0, 1.0, 0.0], atol=1e-12)


def test_segment_line_vertical_hand_value():
    l = segment_line(Segment2D([5.0, 0.0], [5.0, 10.0], id=0))
    if l[0] < 0:
        l = -l
    assert np.allclose(l, [1.0, 0.0, -5.0], atol=1e-12)


def test_segment_line_endpoint_incidence():
    rng = np.random.default_rng(0)
    for _ in range(200):
        seg = Segment2D(rng.uniform(0, 640, 2), rng.uniform(0, 640, 2), id=0)
        l = segment_line(seg)
        assert abs(float(l @ [*seg.p_start, 1.0])) < 1e-9
        assert abs(float(l @ [*seg.p_end, 1.0])) < 1e-9
        assert abs(np.hypot(l[0], l[1]) - 1.0) < 1e-12


def test_zero_length_segment_rejected():
    with pytest.raises(ValueError):
        Segment2D([3.0, 4.0], [3.0, 4.0], id=0)


def test_segment_file_roundtrip(tmp_path):
    segs = [Segment2D([0.0, 1.0], [10.0, 2.0], id=0, track_id=7),
            Segment2D([5.5, 5.5], [9.25, 0.125], id=3)]
    path = tmp_path / "segs.txt"
    save_segments(segs, path)
    loaded = load_segments(path)
    assert len(loaded) == 2
    assert loaded[0].id == 0 and loaded[0].track_id == 7
    assert loaded[1].id == 3 and loaded[1].track_id is None
    for a, b in zip(segs, loaded):
        assert np.allclose(a.p_start, b.p_start)
        assert np.allclose(a.p_end, b.p_end)


def test_segment_file_parse_error_names_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 0 0 10 0\n1 0 0 10\n")
    with pytest.raises(ValueError, match="line 2"):
        load_segments(path)
