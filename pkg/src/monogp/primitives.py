"""Registry of world-frame Global Primitives (fused vanishing directions).

A Global Primitive is a unit world direction shared by every frame whose
segments vanish along it. New per-frame directions either fuse into the
best-matching parallel primitive by support-weighted averaging or start a
new one. The association graph links frames through shared primitives,
including frames with no common landmarks.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .vanishing import canonical_direction

DEFAULT_FUSE_TOL_DEG = 5.0


def is_parallel(d1, d2, tol_deg: float) -> bool:
    """Sign-free parallelism test: arccos(|d1·d2|) < tol_deg. Inputs unit."""
    c = np.clip(abs(float(np.asarray(d1) @ np.asarray(d2))), 0.0, 1.0)
    return math.degrees(math.acos(c)) < tol_deg


def fuse_directions(d_i, n_i: int, d_j, n_j: int, n_l: int,
                    tol_deg: float = DEFAULT_FUSE_TOL_DEG) -> np.ndarray:
    """Support-weighted fusion of two parallel unit directions.

    Computes (n_i/n_l) d_i + (n_j/n_l) d_j after sign-aligning d_j to d_i,
    then renormalizes onto the unit sphere and canonicalizes the sign.
    """
    d_i = np.asarray(d_i, dtype=float)
    d_j = np.asarray(d_j, dtype=float)
    if not is_parallel(d_i, d_j, tol_deg):
        raise ValueError("not parallel: directions exceed fusion tolerance")
    if float(d_i @ d_j) < 0:
        d_j = -d_j
    fused = (n_i / n_l) * d_i + (n_j / n_l) * d_j
    return canonical_direction(fused)


@dataclass
class GlobalPrimitive:
    """Unit world vanishing direction with accumulated segment support."""
    direction: np.ndarray
    support_weight: float
    associations: list = field(default_factory=list)  # (frame_id, frozenset of segment ids)

    def frames(self) -> list:
        return [f for f, _ in self.associations]


@dataclass(frozen=True)
class GPAssociationGraph:
    nodes: frozenset
    edges: frozenset  # (frame_a, frame_b, gp_id) with frame_a < frame_b

    def has_edge(self, frame_a, frame_b) -> bool:
        a, b = sorted((frame_a, frame_b))
        return any(e[0] == a and e[1] == b for e in self.edges)


class GlobalPrimitiveRegistry:
    """Single-writer registry of Global Primitives.

    Mutated only through associate_frame; snapshots are safe to read
    concurrently.
    """

    def __init__(self, fuse_tol_deg: float = DEFAULT_FUSE_TOL_DEG):
        self.fuse_tol_deg = fuse_tol_deg
        self.primitives: list[GlobalPrimitive] = []

    def associate_frame(self, frame_id, lifted, n_l: int) -> list[tuple[int, frozenset]]:
        """Fuse a frame's lifted directions into the registry.

        lifted: list of (unit sign-canonical direction, set of segment ids).
        Each direction fuses with the single best-matching parallel primitive
        (smallest angle within tolerance) or creates a new one with weight
        N_new / n_l. Returns (gp_id, segment ids) per lifted direction.
        """
        out = []
        for direction, seg_ids in lifted:
            direction = np.asarray(direction, dtype=float)
            seg_ids = frozenset(seg_ids)
            w_new = len(seg_ids) / n_l
            best, best_angle = None, None
            for gp_id, gp in enumerate(self.primitives):
                c = np.clip(abs(float(gp.direction @ direction)), 0.0, 1.0)
                ang = math.degrees(math.acos(c))
                if ang < self.fuse_tol_deg and (best is None or ang < best_angle):
                    best, best_angle = gp_id, ang
            if best is None:
                gp = GlobalPrimitive(canonical_direction(direction), w_new,
                                     [(frame_id, seg_ids)])
                self.primitives.append(gp)
                out.append((len(self.primitives) - 1, seg_ids))
            else:
                gp = self.primitives[best]
                d_new = direction if float(gp.direction @ direction) >= 0 else -direction
                fused = gp.support_weight * gp.direction + w_new * d_new
                gp.direction = canonical_direction(fused)
                gp.support_weight += w_new
                gp.associations.append((frame_id, seg_ids))
                out.append((best, seg_ids))
        return out

    def recompute_support(self, n_l: int, gp_id: int) -> float:
        """Brute-force support recomputation (bookkeeping audit)."""
        gp = self.primitives[gp_id]
        return sum(len(ids) / n_l for _, ids in gp.associations)

    def association_graph(self) -> GPAssociationGraph:
        nodes, edges = set(), set()
        for gp_id, gp in enumerate(self.primitives):
            frames = [f for f, ids in gp.associations if ids]
            nodes.update(frames)
            for i in range(len(frames)):
                for j in range(i + 1, len(frames)):
                    a, b = sorted((frames[i], frames[j]))
                    if a != b:
                        edges.add((a, b, gp_id))
        return GPAssociationGraph(frozenset(nodes), frozenset(edges))

    def to_json(self) -> str:
        entries = [
            {
                "gp_id": gp_id,
                "direction": [float(x) for x in gp.direction],
                "support": gp.support_weight,
                "frames": sorted(gp.frames()),
            }
            for gp_id, gp in enumerate(self.primitives)
        ]
        return json.dumps(entries, indent=2, sort_keys=True)
