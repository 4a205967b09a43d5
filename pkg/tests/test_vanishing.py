"""Vanishing-point sampling, consensus, J-Linkage, refinement, lifting."""
import numpy as np
import pytest

from monogp.geometry import CameraIntrinsics, so3_exp
from monogp.segments import Segment2D
from monogp.vanishing import (
    canonical_direction,
    consensus,
    detect_vanishing_points,
    jlinkage_cluster,
    lift_vanishing_point,
    refine_vp,
    sample_vp_hypotheses,
)

K = CameraIntrinsics(500.0, 500.0, 320.0, 240.0)


def segments_through(vp_xy, n, rng, length=(30.0, 80.0), start_id=0):
    """n segments whose infinite lines pass exactly through vp_xy."""
    segs = []
    while len(segs) < n:
        a = rng.uniform([20.0, 20.0], [620.0, 460.0])
        u = np.asarray(vp_xy, dtype=float) - a
        d = np.linalg.norm(u)
        if d < 1.0:
            continue
        u = u / d
        segs.append(Segment2D(a, a + rng.uniform(*length) * u,
                              id=start_id + len(segs)))
    return segs


# -- hypothesis sampling -----------------------------------------------------

def test_hypotheses_from_parallel_segments_lie_at_infinity():
    segs = [Segment2D([0.0, 0.0], [10.0, 0.0], id=0),
            Segment2D([0.0, 5.0], [10.0, 5.0], id=1)]
    hyps = sample_vp_hypotheses(segs, 10, rng_seed=0)
    for h in hyps:
        assert abs(h[2]) < 1e-9
        assert abs(abs(h[0]) - 1.0) < 1e-9  # direction along x


def test_hypotheses_from_converging_segments():
    segs = [Segment2D([0.0, 0.0], [50.0, 50.0], id=0),
            Segment2D([200.0, 100.0], [150.0, 100.0], id=1)]
    hyps = sample_vp_hypotheses(segs, 5, rng_seed=1)
    expected = np.array([100.0, 100.0, 1.0])
    expected /= np.linalg.norm(expected)
    for h in hyps:
        assert np.allclose(h, expected, atol=1e-9) or \
            np.allclose(h, -expected, atol=1e-9)


def test_hypotheses_deterministic_given_seed():
    rng = np.random.default_rng(2)
    segs = segments_through([1000.0, 300.0], 10, rng)
    h1 = sample_vp_hypotheses(segs, 50, rng_seed=42)
    h2 = sample_vp_hypotheses(segs, 50, rng_seed=42)
    assert all(np.array_equal(a, b) for a, b in zip(h1, h2))


def test_too_few_segments_raises():
    with pytest.raises(ValueError, match="too few segments"):
        sample_vp_hypotheses([Segment2D([0, 0], [1, 0], id=0)], 10, rng_seed=0)


# -- consensus ---------------------------------------------------------------

def test_consensus_perfect_for_vp_at_infinity():
    seg = Segment2D([100.0, 50.0], [200.0, 50.0], id=0)
    assert consensus(seg, [1.0, 0.0, 0.0]) < 1e-12


def test_consensus_perpendicular_vp():
    seg = Segment2D([-10.0, 0.0], [10.0, 0.0], id=0)
    vp = np.array([0.0, 1000.0, 1.0])
    vp /= np.linalg.norm(vp)
    assert abs(consensus(seg, vp) - 90.0) < 1e-9


def test_consensus_two_degree_construction():
    mid = np.array([320.0, 240.0])
    vp_xy = mid + 500.0 * np.array([1.0, 0.0])
    ang = np.radians(2.0)
    u = np.array([np.cos(ang), np.sin(ang)])
    seg = Segment2D(mid - 40.0 * u, mid + 40.0 * u, id=0)
    vp = np.array([*vp_xy, 1.0])
    vp /= np.linalg.norm(vp)
    assert abs(consensus(seg, vp) - 2.0) < 1e-6


def test_consensus_invariant_to_endpoint_swap_and_vp_scale():
    rng = np.random.default_rng(3)
    for _ in range(100):
        seg = Segment2D(rng.uniform(0, 640, 2), rng.uniform(0, 640, 2), id=0)
        vp = rng.normal(0.0, 1.0, 3)
        vp /= np.linalg.norm(vp)
        swapped = Segment2D(seg.p_end, seg.p_start, id=0)
        assert abs(consensus(seg, vp) - consensus(swapped, vp)) < 1e-9
        assert abs(consensus(seg, vp) - consensus(seg, -vp)) < 1e-9


def test_consensus_vp_at_midpoint_raises():
    seg = Segment2D([100.0, 100.0], [200.0, 200.0], id=0)
    vp = np.array([150.0, 150.0, 1.0])
    vp /= np.linalg.norm(vp)
    with pytest.raises(ValueError, match="vp at segment midpoint"):
        consensus(seg, vp)


# -- clustering --------------------------------------------------------------

def test_single_planted_cluster_recovered():
    rng = np.random.default_rng(4)
    segs = segments_through([900.0, 250.0], 20, rng)
    hyps = sample_vp_hypotheses(segs, 200, rng_seed=0)
    clusters = jlinkage_cluster(segs, hyps, 2.0, 3)
    assert len(clusters) == 1
    assert clusters[0] == frozenset(range(20))


def test_three_planted_families_no_contamination():
    rng = np.random.default_rng(5)
    fams = [segments_through([2000.0, 240.0], 20, rng, start_id=0),
            segments_through([320.0, -1500.0], 20, rng, start_id=20),
            segments_through([320.0, 240.0], 20, rng, start_id=40)]
    segs = [s for fam in fams for s in fam]
    outliers = []
    for i in range(12):
        a = rng.uniform([0, 0], [640, 480])
        th = rng.uniform(0.0, 2 * np.pi)
        outliers.append(Segment2D(a, a + 50.0 * np.array([np.cos(th), np.sin(th)]),
                                  id=60 + i))
    hyps = sample_vp_hypotheses(segs + outliers, 500, rng_seed=0)
    clusters = jlinkage_cluster(segs + outliers, hyps, 2.0, 3)
    big = [c for c in clusters if len(c) >= 18]
    assert len(big) == 3
    for c in big:
        fam_ids = {sid // 20 for sid in c if sid < 60}
        assert len(fam_ids) == 1  # no cross-family contamination


def test_cluster_partition_invariant_to_input_order():
    rng = np.random.default_rng(6)
    segs = segments_through([1200.0, 100.0], 10, rng) + \
        segments_through([-400.0, 300.0], 10, rng, start_id=10)
    hyps = sample_vp_hypotheses(segs, 300, rng_seed=7)
    c1 = set(jlinkage_cluster(segs, hyps, 2.0, 3))
    c2 = set(jlinkage_cluster(list(reversed(segs)), hyps, 2.0, 3))
    assert c1 == c2


# -- refinement --------------------------------------------------------------

def test_refine_vp_exact_intersection():
    segs = [Segment2D([320.0 - 100.0, 240.0 - 50.0], [320.0 - 10.0, 240.0 - 5.0], id=0),
            Segment2D([320.0 + 80.0, 240.0 - 80.0], [320.0 + 8.0, 240.0 - 8.0], id=1)]
    est = refine_vp(segs)
    expected = np.array([320.0, 240.0, 1.0])
    expected /= np.linalg.norm(expected)
    vp = est.vp_homogeneous
    if vp @ expected < 0:
        vp = -vp
    assert np.allclose(vp, expected, atol=1e-9)


def test_refine_vp_planted_cluster():
    rng = np.random.default_rng(8)
    target = np.array([150.0, 700.0])
    segs = segments_through(target, 20, rng)
    est = refine_vp(segs)
    vp = est.vp_homogeneous
    expected = np.array([*target, 1.0])
    expected /= np.linalg.norm(expected)
    if vp @ expected < 0:
        vp = -vp
    assert np.allclose(vp, expected, atol=1e-7)
    for seg in segs:
        assert consensus(seg, est.vp_homogeneous) < 1e-6


def test_refine_vp_identical_lines_rank_deficient():
    segs = [Segment2D([0.0, 10.0], [100.0, 10.0], id=i) for i in range(4)]
    with pytest.raises(ValueError, match="rank deficient"):
        refine_vp(segs)


# -- lifting -----------------------------------------------------------------

def test_lift_principal_point_is_optical_axis():
    vp = np.array([320.0, 240.0, 1.0])
    vp /= np.linalg.norm(vp)
    assert np.allclose(lift_vanishing_point(vp, K, np.eye(3)),
                       [0.0, 0.0, 1.0], atol=1e-12)


def test_lift_hand_value():
    vp = np.array([820.0, 240.0, 1.0])
    vp /= np.linalg.norm(vp)
    d = lift_vanishing_point(vp, K, np.eye(3))
    s = 1.0 / np.sqrt(2.0)
    assert np.allclose(d, [s, 0.0, s], atol=1e-12)


def test_lift_with_rotation_stays_unit():
    vp = np.array([820.0, 240.0, 1.0])
    vp /= np.linalg.norm(vp)
    r_wc = so3_exp([0.0, np.pi / 2, 0.0])
    d = lift_vanishing_point(vp, K, r_wc)
    assert abs(np.linalg.norm(d) - 1.0) < 1e-12
    s = 1.0 / np.sqrt(2.0)
    assert np.allclose(d, canonical_direction(r_wc @ [s, 0.0, s]), atol=1e-12)


def test_lift_sign_invariant():
    rng = np.random.default_rng(9)
    for _ in range(100):
        vp = rng.normal(0.0, 1.0, 3)
        vp /= np.linalg.norm(vp)
        assert np.allclose(lift_vanishing_point(vp, K, np.eye(3)),
                           lift_vanishing_point(-vp, K, np.eye(3)), atol=1e-12)


# -- full detection ----------------------------------------------------------

def test_detect_sets_cluster_labels():
    rng = np.random.default_rng(10)
    segs = segments_through([1500.0, 240.0], 15, rng)
    lone = Segment2D([10.0, 400.0], [60.0, 330.0], id=15)
    ests = detect_vanishing_points(segs + [lone], n_hypotheses=300, rng_seed=0)
    assert len(ests) >= 1
    assert all(s.cluster_label == 0 for s in segs)
    assert ests[0].member_segment_ids >= frozenset(range(15))
