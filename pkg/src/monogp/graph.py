"""Robust nonlinear least-squares core.

Factor types: point reprojection, line reprojection (observed endpoints
against the projected infinite image line), vanishing-direction alignment
(homogeneous incidence of a segment line with the projected VP), and
structural consistency (3D line direction against a global direction).

Variables and their local parameterizations:
  pose  6 DOF  left-multiplicative SE(3) exponential
  point 3 DOF  additive
  line  4 DOF  orthonormal SO(3) x SO(2) update over Plücker state
  gp    2 DOF  tangent-plane step + renormalization onto the unit sphere

Levenberg-Marquardt with Huber IRLS weighting minimizes the total
covariance-weighted cost. Residual and Jacobian evaluation are pure
per-factor functions; the solve/update is a single-threaded critical
section per iteration.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    cross3,
    BehindCameraError,
    CameraIntrinsics,
    DegenerateLineError,
    OrthonormalLine,
    Pose,
    orthonormal_to_plucker,
    orthonormal_update,
    project_plucker,
    project_point,
    se3_exp,
    skew,
    transform_plucker,
)
from .segments import Segment2D, segment_line

HUBER_2DOF = math.sqrt(5.99)  # chi^2 95%, 2 DOF
HUBER_1DOF = math.sqrt(3.84)  # chi^2 95%, 1 DOF

DOF = {"pose": 6, "point": 3, "line": 4, "gp": 2}

_DEACTIVATING = (BehindCameraError, DegenerateLineError)


# ---------------------------------------------------------------------------
# Sphere tangent parameterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TangentBasis:
    b1: np.ndarray
    b2: np.ndarray


def tangent_basis(anchor) -> TangentBasis:
    """Deterministic orthonormal basis of the tangent plane at a unit anchor."""
    anchor = np.asarray(anchor, dtype=float)
    k = int(np.argmin(np.abs(anchor)))
    b1 = cross3(anchor, np.eye(3)[k])
    b1 = b1 / np.linalg.norm(b1)
    b2 = cross3(anchor, b1)
    return TangentBasis(b1, b2)


def gp_retract(anchor, w1: float, w2: float) -> np.ndarray:
    """Tangent step then renormalization back onto the unit sphere."""
    basis = tangent_basis(anchor)
    d = np.asarray(anchor, dtype=float) + w1 * basis.b1 + w2 * basis.b2
    return d / np.linalg.norm(d)


# ---------------------------------------------------------------------------
# Robust kernel
# ---------------------------------------------------------------------------

def huber_weight(r_sq_weighted: float, delta: float) -> float:
    """Standard Huber IRLS weight from the whitened squared residual norm."""
    s = math.sqrt(r_sq_weighted)
    return 1.0 if s <= delta else delta / s


def huber_cost(r_sq_weighted: float, delta: float) -> float:
    s = math.sqrt(r_sq_weighted)
    if s <= delta:
        return r_sq_weighted
    return 2.0 * delta * s - delta * delta


# ---------------------------------------------------------------------------
# Residual functions (also usable standalone)
# ---------------------------------------------------------------------------

def point_residual(p_w, pose: Pose, intr: CameraIntrinsics, obs) -> np.ndarray:
    return project_point(p_w, pose, intr) - np.asarray(obs, dtype=float)


def line_residual(line_w, pose: Pose, intr: CameraIntrinsics,
                  obs: Segment2D) -> np.ndarray:
    """Signed perpendicular distances of the observed endpoints to the
    projected infinite image line."""
    l = project_plucker(transform_plucker(line_w, pose), intr)
    s = math.hypot(l[0], l[1])
    es = np.array([obs.p_start[0], obs.p_start[1], 1.0])
    ee = np.array([obs.p_end[0], obs.p_end[1], 1.0])
    return np.array([float(es @ l), float(ee @ l)]) / s


def vd_align_residual(gp_dir, pose: Pose, intr: CameraIntrinsics,
                      seg: Segment2D) -> float:
    """Incidence of the segment's image line with the projected VP of the
    global direction. Smooth and bounded, including VPs at infinity."""
    v_cam = pose.rotation @ np.asarray(gp_dir, dtype=float)
    v_img = intr.matrix() @ v_cam
    v_img = v_img / np.linalg.norm(v_img)
    return float(segment_line(seg) @ v_img)


def struct_residual(line_dir_w, gp_dir) -> float:
    """|d · g - 1| for unit vectors (zero iff parallel and sign-aligned)."""
    return abs(float(np.asarray(line_dir_w) @ np.asarray(gp_dir)) - 1.0)


# ---------------------------------------------------------------------------
# Factors
# ---------------------------------------------------------------------------

def _proj_jacobian(p_c, intr) -> np.ndarray:
    X, Y, Z = p_c
    return np.array([[intr.fx / Z, 0.0, -intr.fx * X / Z**2],
                     [0.0, intr.fy / Z, -intr.fy * Y / Z**2]])


@dataclass
class PointFactor:
    pose_id: int
    point_id: int
    obs: np.ndarray
    intr: CameraIntrinsics
    sigma_px: float = 1.0
    huber_delta: float = HUBER_2DOF
    kind = "point"
    dim = 2

    def keys(self):
        return [("pose", self.pose_id), ("point", self.point_id)]

    def info(self) -> np.ndarray:
        return np.eye(2) / self.sigma_px**2

    def residual(self, graph) -> np.ndarray:
        return point_residual(graph.points[self.point_id],
                              graph.poses[self.pose_id], self.intr, self.obs)

    def jacobians(self, graph):
        pose = graph.poses[self.pose_id]
        p_c = pose.transform(graph.points[self.point_id])
        if p_c[2] <= 0:
            raise BehindCameraError("behind camera")
        dpi = _proj_jacobian(p_c, self.intr)
        j_pose = np.hstack([dpi, dpi @ (-skew(p_c))])
        j_point = dpi @ pose.rotation
        return {("pose", self.pose_id): j_pose,
                ("point", self.point_id): j_point}


@dataclass
class LineFactor:
    pose_id: int
    line_id: int
    obs: Segment2D
    intr: CameraIntrinsics
    sigma_px: float = 1.0
    huber_delta: float = HUBER_2DOF
    kind = "line"
    dim = 2

    def keys(self):
        return [("pose", self.pose_id), ("line", self.line_id)]

    def info(self) -> np.ndarray:
        return np.eye(2) / self.sigma_px**2

    def residual(self, graph) -> np.ndarray:
        line_w = orthonormal_to_plucker(graph.lines[self.line_id])
        return line_residual(line_w, graph.poses[self.pose_id], self.intr, self.obs)

    def jacobians(self, graph):
        o = graph.lines[self.line_id]
        pose = graph.poses[self.pose_id]
        line_w = orthonormal_to_plucker(o)
        line_c = transform_plucker(line_w, pose)
        l = project_plucker(line_c, self.intr)
        s = math.hypot(l[0], l[1])
        es = np.array([self.obs.p_start[0], self.obs.p_start[1], 1.0])
        ee = np.array([self.obs.p_end[0], self.obs.p_end[1], 1.0])
        grad_s = np.array([l[0], l[1], 0.0]) / s
        dr_dl = np.vstack([es / s - (float(es @ l) / s**2) * grad_s,
                           ee / s - (float(ee @ l) / s**2) * grad_s])
        KL = self.intr.line_projection_matrix()
        # d n_c / d pose twist (rho, theta), left-multiplicative update
        dnc_dpose = np.hstack([-skew(line_c.direction), -skew(line_c.normal)])
        j_pose = dr_dl @ KL @ dnc_dpose
        # d (n_w, d_w) / d orthonormal delta (3 rotation + 1 angle)
        w1, w2 = o.W[0, 0], o.W[1, 0]
        u1, u2 = o.U[:, 0], o.U[:, 1]
        dnw = np.hstack([-skew(line_w.normal), (-w2 * u1)[:, None]])
        ddw = np.hstack([-skew(line_w.direction), (w1 * u2)[:, None]])
        R, t = pose.rotation, pose.translation
        dnc_dline = R @ dnw + skew(t) @ R @ ddw
        j_line = dr_dl @ KL @ dnc_dline
        return {("pose", self.pose_id): j_pose,
                ("line", self.line_id): j_line}


@dataclass
class VdAlignFactor:
    pose_id: int
    gp_id: int
    seg: Segment2D
    intr: CameraIntrinsics
    sigma: float = 0.02
    huber_delta: float = HUBER_1DOF
    kind = "vd_align"
    dim = 1

    def keys(self):
        return [("pose", self.pose_id), ("gp", self.gp_id)]

    def info(self) -> np.ndarray:
        return np.array([[1.0 / self.sigma**2]])

    def residual(self, graph) -> np.ndarray:
        r = vd_align_residual(graph.gps[self.gp_id],
                              graph.poses[self.pose_id], self.intr, self.seg)
        return np.array([r])

    def jacobians(self, graph):
        pose = graph.poses[self.pose_id]
        g = graph.gps[self.gp_id]
        K = self.intr.matrix()
        v_cam = pose.rotation @ g
        v_img = K @ v_cam
        n = np.linalg.norm(v_img)
        vhat = v_img / n
        lhat = segment_line(self.seg)
        # d vhat / d v_img, projected onto the sphere tangent
        P = (np.eye(3) - np.outer(vhat, vhat)) / n
        row = lhat @ P @ K
        j_pose = np.zeros((1, 6))
        j_pose[0, 3:] = row @ (-skew(v_cam))
        basis = tangent_basis(g)
        j_gp = (row @ pose.rotation @ np.column_stack([basis.b1, basis.b2]))[None, :]
        return {("pose", self.pose_id): j_pose,
                ("gp", self.gp_id): j_gp}


@dataclass
class StructFactor:
    line_id: int
    gp_id: int
    sigma: float = 0.01
    huber_delta: float = HUBER_1DOF
    kind = "struct"
    dim = 1

    def keys(self):
        return [("line", self.line_id), ("gp", self.gp_id)]

    def info(self) -> np.ndarray:
        return np.array([[1.0 / self.sigma**2]])

    def residual(self, graph) -> np.ndarray:
        o = graph.lines[self.line_id]
        dhat = math.copysign(1.0, o.W[1, 0]) * o.U[:, 1]
        return np.array([struct_residual(dhat, graph.gps[self.gp_id])])

    def jacobians(self, graph):
        o = graph.lines[self.line_id]
        g = graph.gps[self.gp_id]
        dhat = math.copysign(1.0, o.W[1, 0]) * o.U[:, 1]
        # residual = 1 - dhat·g since dhat·g <= 1 for unit vectors
        j_line = np.zeros((1, 4))
        j_line[0, :3] = g @ skew(dhat)
        basis = tangent_basis(g)
        j_gp = -(dhat @ np.column_stack([basis.b1, basis.b2]))[None, :]
        return {("line", self.line_id): j_line,
                ("gp", self.gp_id): j_gp}


# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------

class FactorGraph:
    def __init__(self):
        self.poses: dict[int, Pose] = {}
        self.points: dict[int, np.ndarray] = {}
        self.lines: dict[int, OrthonormalLine] = {}
        self.gps: dict[int, np.ndarray] = {}
        self.factors: list = []

    def add_pose(self, pose_id: int, pose: Pose):
        self.poses[pose_id] = pose

    def add_point(self, point_id: int, p_w):
        self.points[point_id] = np.asarray(p_w, dtype=float).copy()

    def add_line(self, line_id: int, line: OrthonormalLine):
        self.lines[line_id] = line

    def add_gp(self, gp_id: int, direction):
        d = np.asarray(direction, dtype=float)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("gp direction must be unit")
        self.gps[gp_id] = d / n

    def add_factor(self, factor):
        store = {"pose": self.poses, "point": self.points,
                 "line": self.lines, "gp": self.gps}
        for kind, vid in factor.keys():
            if vid not in store[kind]:
                raise KeyError(f"factor references missing variable {(kind, vid)}")
        self.factors.append(factor)

    # -- state access by key ------------------------------------------------

    def _store(self, kind):
        return {"pose": self.poses, "point": self.points,
                "line": self.lines, "gp": self.gps}[kind]

    def get_state(self, key):
        return self._store(key[0])[key[1]]

    def set_state(self, key, value):
        self._store(key[0])[key[1]] = value

    def snapshot(self):
        return {"pose": dict(self.poses), "point": dict(self.points),
                "line": dict(self.lines), "gp": dict(self.gps)}

    def restore(self, snap):
        self.poses = dict(snap["pose"])
        self.points = dict(snap["point"])
        self.lines = dict(snap["line"])
        self.gps = dict(snap["gp"])


def retract(kind: str, value, delta):
    """Apply a local-parameterization increment to a variable."""
    delta = np.asarray(delta, dtype=float)
    if kind == "pose":
        return se3_exp(delta).compose(value)
    if kind == "point":
        return value + delta
    if kind == "line":
        return orthonormal_update(value, delta)
    if kind == "gp":
        return gp_retract(value, delta[0], delta[1])
    raise ValueError(f"unknown variable kind {kind!r}")


def total_cost(graph: FactorGraph) -> float:
    """Sum of Huber-robustified Mahalanobis squared residuals."""
    cost = 0.0
    for f in graph.factors:
        try:
            r = f.residual(graph)
        except _DEACTIVATING:
            continue
        r_sq = float(r @ f.info() @ r)
        cost += huber_cost(r_sq, f.huber_delta)
    return cost


def cost_breakdown(graph: FactorGraph) -> dict:
    out: dict[str, float] = {}
    for f in graph.factors:
        try:
            r = f.residual(graph)
        except _DEACTIVATING:
            continue
        r_sq = float(r @ f.info() @ r)
        out[f.kind] = out.get(f.kind, 0.0) + huber_cost(r_sq, f.huber_delta)
    return out


def numeric_jacobian(factor, graph: FactorGraph, h: float = 1e-6) -> dict:
    """Central-difference Jacobian on each variable's local parameterization."""
    out = {}
    for key in factor.keys():
        kind, _ = key
        dof = DOF[kind]
        cols = []
        base = graph.get_state(key)
        for j in range(dof):
            e = np.zeros(dof)
            e[j] = h
            graph.set_state(key, retract(kind, base, e))
            r_plus = factor.residual(graph)
            graph.set_state(key, retract(kind, base, -e))
            r_minus = factor.residual(graph)
            graph.set_state(key, base)
            cols.append((r_plus - r_minus) / (2.0 * h))
        out[key] = np.column_stack(cols)
    return out


@dataclass
class OptimizeOptions:
    max_iters: int = 100
    lambda_init: float = 1e-4
    lambda_scale: float = 10.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    fixed_variable_keys: tuple = ()


@dataclass
class OptimizationReport:
    initial_cost: float
    final_cost: float
    iterations: int
    converged: bool
    cost_breakdown: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "iters": self.iterations,
            "converged": self.converged,
            "per_factor_type_cost_breakdown": self.cost_breakdown,
        }, sort_keys=True)


def _linearize(graph: FactorGraph, index: dict, n_params: int):
    """One pass over all factors: robust cost, gradient, Gauss-Newton H."""
    H = np.zeros((n_params, n_params))
    g = np.zeros(n_params)
    cost = 0.0
    for f in graph.factors:
        try:
            r = f.residual(graph)
            J = f.jacobians(graph)
        except _DEACTIVATING:
            continue
        info = f.info()
        r_sq = float(r @ info @ r)
        cost += huber_cost(r_sq, f.huber_delta)
        w = huber_weight(r_sq, f.huber_delta)
        keys = [k for k in f.keys() if k in index]
        for ka in keys:
            sa, da = index[ka]
            Ja = J[ka]
            g[sa:sa + da] += w * (Ja.T @ (info @ r))
            for kb in keys:
                sb, db = index[kb]
                H[sa:sa + da, sb:sb + db] += w * (Ja.T @ info @ J[kb])
    return cost, H, g


def optimize(graph: FactorGraph, options: OptimizeOptions | None = None
             ) -> OptimizationReport:
    """Levenberg-Marquardt over all non-fixed variables (in place)."""
    options = options or OptimizeOptions()
    fixed = set(options.fixed_variable_keys)
    if graph.poses and not fixed:
        raise ValueError("gauge unfixed: fix at least one variable")

    keys = ([("pose", i) for i in sorted(graph.poses)]
            + [("point", i) for i in sorted(graph.points)]
            + [("line", i) for i in sorted(graph.lines)]
            + [("gp", i) for i in sorted(graph.gps)])
    keys = [k for k in keys if k not in fixed]
    index, offset = {}, 0
    for k in keys:
        d = DOF[k[0]]
        index[k] = (offset, d)
        offset += d
    n_params = offset

    lam = options.lambda_init
    initial_cost = None
    cost = None
    converged = False
    iters = 0
    for iters in range(1, options.max_iters + 1):
        cost, H, g = _linearize(graph, index, n_params)
        if initial_cost is None:
            initial_cost = cost
        if np.max(np.abs(g), initial=0.0) < options.abs_tol:
            converged = True
            break
        accepted = False
        while lam < 1e12:
            D = np.diag(np.clip(np.diag(H), 1e-12, None))
            try:
                delta = np.linalg.solve(H + lam * D, -g)
            except np.linalg.LinAlgError:
                lam *= options.lambda_scale
                continue
            snap = graph.snapshot()
            for k in keys:
                s, d = index[k]
                graph.set_state(k, retract(k[0], graph.get_state(k), delta[s:s + d]))
            new_cost = total_cost(graph)
            if new_cost < cost:
                lam = max(lam / options.lambda_scale, 1e-12)
                accepted = True
                if cost - new_cost < options.rel_tol * max(cost, 1e-30):
                    converged = True
                cost = new_cost
                break
            graph.restore(snap)
            lam *= options.lambda_scale
        if not accepted:
            converged = True  # no descent direction left: local minimum
            break
        if converged:
            break

    final_cost = total_cost(graph)
    return OptimizationReport(initial_cost if initial_cost is not None else final_cost,
                              final_cost, iters, converged,
                              cost_breakdown(graph))
