"""End-to-end back-end pipeline on simulated scenes.

simulate -> (gp mode: per-frame VP detection + global-primitive
association) -> line tracking and verification gates -> factor graph
construction -> Levenberg-Marquardt -> ATE evaluation against ground truth.

Modes: "lp" uses point + line reprojection factors only; "gp" adds
vanishing-direction alignment and structural-consistency factors on the
fused global primitives. Fully deterministic given the scenario config.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import graph as fg
from .evaluate import Trajectory, ate_rmse
from .geometry import (
    Pose,
    TriangulationError,
    closest_point_on_line_to_ray,
    plucker_to_orthonormal,
    project_point,
    so3_exp,
    triangulate_line,
    triangulate_point,
    _backproject_ray,
)
from .primitives import GlobalPrimitiveRegistry
from .segments import Segment2D
from .simulate import (
    FrameObservations,
    ScenarioConfig,
    World,
    generate_trajectory,
    generate_world,
    render_measurements,
)
from .tracking import (
    GateAuditRow,
    GateThresholds,
    LineTrack,
    MatchParams,
    filter_short,
    match_predicted,
    run_gates,
)
from .vanishing import detect_vanishing_points, lift_vanishing_point

MODES = ("lp", "gp")


@dataclass
class PipelineOptions:
    gates: GateThresholds = field(default_factory=GateThresholds)
    match: MatchParams = field(default_factory=MatchParams)
    vp_hypotheses: int = 300
    vp_consensus_deg: float = 2.0
    vp_min_cluster: int = 6
    fuse_tol_deg: float = 5.0
    struct_assoc_tol_deg: float = 5.0
    sigma_point_px: float = 1.0
    sigma_line_px: float = 1.0
    sigma_vd: float = 0.01
    sigma_struct: float = 0.01
    optimizer: fg.OptimizeOptions = field(default_factory=lambda: fg.OptimizeOptions(
        max_iters=100))


@dataclass
class PipelineResult:
    config: ScenarioConfig
    mode: str
    estimated: Trajectory
    ground_truth: Trajectory
    initial: Trajectory
    report: fg.OptimizationReport
    registry: GlobalPrimitiveRegistry | None
    gate_audit: list
    metrics: dict
    graph: fg.FactorGraph


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def perturb_poses(poses_gt: list[Pose], config: ScenarioConfig) -> list[Pose]:
    """Initial pose estimates; the first pose stays exact (gauge anchor)."""
    pert = config.init_perturbation
    rng = np.random.default_rng([config.rng_seed, 23])
    out = [poses_gt[0]]
    for pose in poses_gt[1:]:
        d_rot = rng.normal(0.0, 1.0, size=3) * math.radians(pert.rot_deg)
        d_trans = rng.normal(0.0, 1.0, size=3) * pert.trans_m
        r_wc = so3_exp(d_rot) @ pose.r_wc
        out.append(Pose.from_world_camera(r_wc, pose.camera_center() + d_trans))
    return out


def build_line_tracks(frames: list[FrameObservations], tau_s: float,
                      match: MatchParams) -> dict[int, LineTrack]:
    """Track segments across frames with flow-predicted matching."""
    obs: dict[int, list] = {}
    for t in range(1, len(frames)):
        predicted = [p for p in frames[t].predicted if p.length >= tau_s]
        detected = filter_short(frames[t].segments, tau_s)
        for track_id, seg, _source in match_predicted(predicted, detected, match):
            obs.setdefault(track_id, []).append((t, seg))
    # frame 0 joins through the flow sources of frame 1's predictions
    if len(frames) > 1:
        seg0 = {s.id: s for s in filter_short(frames[0].segments, tau_s)}
        for p in frames[1].predicted:
            src = -p.id - 1
            if p.track_id in obs and src in seg0:
                obs[p.track_id].insert(0, (0, seg0[src]))
    tracks = {}
    for track_id, items in obs.items():
        track = LineTrack(track_id)
        last = -1
        for t, seg in items:
            if t > last:
                track.add(t, seg)
                last = t
        tracks[track_id] = track
    return tracks


def _triangulate_points(frames, poses_init, intr):
    obs_by_point: dict[int, list] = {}
    for fr in frames:
        for pid, px in fr.points:
            obs_by_point.setdefault(pid, []).append((fr.frame_id, px))
    points = {}
    for pid, items in sorted(obs_by_point.items()):
        if len(items) < 2:
            continue
        (ta, pa), (tb, pb) = items[0], items[-1]
        try:
            points[pid] = triangulate_point(pa, pb, poses_init[ta],
                                            poses_init[tb], intr)
        except TriangulationError:
            continue
    return points, obs_by_point


def _triangulate_lines(tracks, poses_init, intr, gates, audit):
    """Triangulated lines plus gate-passing per-frame observations."""
    lines, line_obs = {}, {}
    for track_id, track in sorted(tracks.items()):
        if track.age < 2:
            continue
        (ta, sa), (tb, sb) = track.observations[0], track.observations[-1]
        try:
            line = triangulate_line(sa, sb, poses_init[ta], poses_init[tb], intr)
        except TriangulationError:
            continue
        # 3D endpoints from the first view's observed extent
        o, _ = _backproject_ray(sa.midpoint, poses_init[ta], intr)
        ray_s = _backproject_ray(sa.p_start, poses_init[ta], intr)[1]
        ray_e = _backproject_ray(sa.p_end, poses_init[ta], intr)[1]
        p3_s = closest_point_on_line_to_ray(line, o, ray_s)
        p3_e = closest_point_on_line_to_ray(line, o, ray_e)
        passing = []
        for t, seg in track.observations:
            try:
                q_s = project_point(p3_s, poses_init[t], intr)
                q_e = project_point(p3_e, poses_init[t], intr)
            except ValueError:
                continue
            projected = Segment2D(q_s, q_e, id=seg.id)
            if run_gates(t, track_id, seg, projected, gates, audit):
                passing.append((t, seg))
        if len(passing) >= 2:
            lines[track_id] = line
            line_obs[track_id] = passing
    return lines, line_obs


def _detect_global_primitives(frames, poses_init, config, options):
    """Per-frame VP detection, lifting, and world-frame fusion."""
    registry = GlobalPrimitiveRegistry(options.fuse_tol_deg)
    seg_gp: dict[tuple[int, int], int] = {}  # (frame, segment id) -> gp id
    for t, fr in enumerate(frames):
        segs = filter_short(fr.segments, options.gates.tau_s)
        if len(segs) < 2:
            continue
        estimates = detect_vanishing_points(
            segs, n_hypotheses=options.vp_hypotheses,
            theta_cons_deg=options.vp_consensus_deg,
            min_cluster_size=options.vp_min_cluster,
            rng_seed=config.rng_seed * 1009 + t)
        lifted = []
        for est in estimates:
            d = lift_vanishing_point(est.vp_homogeneous, config.intrinsics,
                                     poses_init[t].r_wc)
            lifted.append((d, est.member_segment_ids))
        for gp_id, seg_ids in registry.associate_frame(t, lifted, config.n_l):
            for sid in seg_ids:
                seg_gp[(t, sid)] = gp_id
    return registry, seg_gp


def run_pipeline(config: ScenarioConfig, mode: str,
                 options: PipelineOptions | None = None) -> PipelineResult:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    options = options or PipelineOptions()
    intr = config.intrinsics

    try:
        world = generate_world(config)
        poses_gt = generate_trajectory(config)
        frames = render_measurements(world, poses_gt, config)
    except Exception as e:  # noqa: BLE001 - stage-labeled rethrow
        raise PipelineError("simulate", str(e)) from e

    poses_init = perturb_poses(poses_gt, config)

    try:
        tracks = build_line_tracks(frames, options.gates.tau_s, options.match)
        points, obs_by_point = _triangulate_points(frames, poses_init, intr)
        audit: list[GateAuditRow] = []
        lines, line_obs = _triangulate_lines(tracks, poses_init, intr,
                                             options.gates, audit)
    except Exception as e:
        raise PipelineError("mapping", str(e)) from e

    registry, seg_gp = None, {}
    if mode == "gp":
        try:
            registry, seg_gp = _detect_global_primitives(frames, poses_init,
                                                         config, options)
        except Exception as e:
            raise PipelineError("vp_detect", str(e)) from e

    try:
        g = fg.FactorGraph()
        for t, pose in enumerate(poses_init):
            g.add_pose(t, pose)
        for pid, p in points.items():
            g.add_point(pid, p)
            for t, px in obs_by_point[pid]:
                g.add_factor(fg.PointFactor(t, pid, np.asarray(px), intr,
                                            sigma_px=options.sigma_point_px))
        # line variables, sign-aligned to their global primitive if any
        line_gp = {}
        if mode == "gp" and registry is not None:
            for lid, line in lines.items():
                d = line.unit_direction()
                best, best_ang = None, options.struct_assoc_tol_deg
                for gp_id, gp in enumerate(registry.primitives):
                    c = np.clip(abs(float(gp.direction @ d)), 0.0, 1.0)
                    ang = math.degrees(math.acos(c))
                    if ang < best_ang:
                        best, best_ang = gp_id, ang
                if best is not None:
                    line_gp[lid] = best
        for lid, line in sorted(lines.items()):
            gp_id = line_gp.get(lid)
            if gp_id is not None and \
                    float(line.unit_direction() @ registry.primitives[gp_id].direction) < 0:
                line = type(line)(-line.normal, -line.direction)
            g.add_line(lid, plucker_to_orthonormal(line))
            for t, seg in line_obs[lid]:
                g.add_factor(fg.LineFactor(t, lid, seg, intr,
                                           sigma_px=options.sigma_line_px))
        if mode == "gp" and registry is not None:
            for gp_id, gp in enumerate(registry.primitives):
                g.add_gp(gp_id, gp.direction)
            seg_lookup = {(fr.frame_id, s.id): s for fr in frames
                          for s in fr.segments}
            for (t, sid), gp_id in sorted(seg_gp.items()):
                g.add_factor(fg.VdAlignFactor(t, gp_id, seg_lookup[(t, sid)],
                                              intr, sigma=options.sigma_vd))
            for lid, gp_id in sorted(line_gp.items()):
                g.add_factor(fg.StructFactor(lid, gp_id,
                                             sigma=options.sigma_struct))
        opt = fg.OptimizeOptions(
            max_iters=options.optimizer.max_iters,
            lambda_init=options.optimizer.lambda_init,
            lambda_scale=options.optimizer.lambda_scale,
            rel_tol=options.optimizer.rel_tol,
            abs_tol=options.optimizer.abs_tol,
            fixed_variable_keys=(("pose", 0),))
        report = fg.optimize(g, opt)
    except Exception as e:
        raise PipelineError("optimize", str(e)) from e

    try:
        ts = np.arange(len(poses_gt), dtype=float)
        gt = Trajectory(ts, poses_gt)
        init = Trajectory(ts, poses_init)
        est = Trajectory(ts, [g.poses[t] for t in range(len(poses_gt))])
        ate = ate_rmse(est, gt, with_scale=True)
        initial_ate = ate_rmse(init, gt, with_scale=True)
    except Exception as e:
        raise PipelineError("evaluate", str(e)) from e

    metrics = {
        "scenario": config.name,
        "mode": mode,
        "seed": config.rng_seed,
        "ate_rmse_m": ate,
        "initial_ate_m": initial_ate,
        "iters": report.iterations,
        "converged": report.converged,
        "n_gps": len(registry.primitives) if registry is not None else 0,
        "cost_breakdown": report.cost_breakdown,
    }
    return PipelineResult(config, mode, est, gt, init, report, registry,
                          audit, metrics, g)


@dataclass
class AblationReport:
    per_seed: list          # {seed, ate_lp, ate_gp}
    failures: list          # {seed, error}
    mean_ate_lp: float
    mean_ate_gp: float
    reduction_pct: float

    def to_json(self) -> str:
        return json.dumps({
            "per_seed": self.per_seed,
            "failures": self.failures,
            "mean_ate_lp": self.mean_ate_lp,
            "mean_ate_gp": self.mean_ate_gp,
            "reduction_pct": self.reduction_pct,
        }, sort_keys=True)

    def to_csv(self) -> str:
        rows = ["seed,ate_lp,ate_gp"]
        rows += [f"{e['seed']},{e['ate_lp']!r},{e['ate_gp']!r}"
                 for e in self.per_seed]
        rows.append(f"mean,{self.mean_ate_lp!r},{self.mean_ate_gp!r}")
        return "\n".join(rows) + "\n"


def run_ablation(config: ScenarioConfig, n_seeds: int,
                 options: PipelineOptions | None = None) -> AblationReport:
    """Paired LP vs LP+GP runs over seeds with identical per-seed worlds."""
    if n_seeds < 2:
        raise ValueError("need at least 2 seeds")
    import dataclasses
    per_seed, failures = [], []
    for i in range(n_seeds):
        seed = config.rng_seed + i
        cfg = dataclasses.replace(config, rng_seed=seed)
        try:
            res_lp = run_pipeline(cfg, "lp", options)
            res_gp = run_pipeline(cfg, "gp", options)
            per_seed.append({"seed": seed,
                             "ate_lp": res_lp.metrics["ate_rmse_m"],
                             "ate_gp": res_gp.metrics["ate_rmse_m"]})
        except PipelineError as e:
            failures.append({"seed": seed, "error": str(e)})
    if len(per_seed) < math.ceil(0.8 * n_seeds):
        raise PipelineError("ablate",
                            f"only {len(per_seed)}/{n_seeds} seeds completed")
    mean_lp = float(np.mean([e["ate_lp"] for e in per_seed]))
    mean_gp = float(np.mean([e["ate_gp"] for e in per_seed]))
    reduction = (1.0 - mean_gp / mean_lp) * 100.0 if mean_lp > 0 else 0.0
    return AblationReport(per_seed, failures, mean_lp, mean_gp, reduction)
