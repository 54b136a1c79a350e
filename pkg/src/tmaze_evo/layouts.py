"""Builders for the canonical arenas.

Both arenas live in a 1.6 x 1.25 m bounding box on a 0.08 x 0.10 m bin grid
(the 13th row is the 0.05 m sliver above the top corridor and holds no free
space). Corridors are 0.10 m wide and centred on bin columns/rows, so they
overhang the 0.08 m bin columns by 0.01 m per side; with a 0.037 m body
radius the robot centre can never leave the corridor bins.

Door logic is one-way circulation: at every T the two commit bands (one per
branch) close the branch behind the robot and the branch it rejected, and at
the arm tops a band across the junction mouth closes the wrong half of the
top corridor so the return leg is forced onto the rail matching the reward
side. Trigger rects keep >= one body radius of clearance from the wall
segment they spawn, so a door can never materialise inside the robot.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import walls_from_free_rects
from .maze import (
    KIND_BACKTRACK,
    KIND_ENFORCER,
    Door,
    MazeLayout,
    RewardSite,
    SegmentRegion,
    Tee,
)
from .robot import Pose

WIDTH, HEIGHT = 1.6, 1.25
BIN_W, BIN_H = 0.08, 0.10

# commit bands start 0.074 m out from the tee edge; reject walls close 0.02 m out
_COMMIT_GAP = 0.074
_SIDE_W = 0.05
_ENF_OFF = 0.088  # enforcer wall offset from arm centre (> mouth edge + body radius)

_TEX_SPLIT_X = 0.8
_TEX_SPLIT_Y = 0.75


def assign_textures(walls: np.ndarray) -> np.ndarray:
    """Deterministic landmark shades keyed off each wall's midpoint."""
    mx = (walls[:, 0] + walls[:, 2]) / 2.0
    my = (walls[:, 1] + walls[:, 3]) / 2.0
    tex = np.where(my < _TEX_SPLIT_Y, 2, 1)
    tex = np.where(mx >= _TEX_SPLIT_X, np.where(my < _TEX_SPLIT_Y, 3, 0), tex)
    tex = np.where(my > 1.08, np.where(mx < _TEX_SPLIT_X, 4, 5), tex)
    tex = np.where(my < 0.22, 0, tex)
    return tex.astype(np.int64)


def _tee_doors(label: str, rect, back_seg) -> list[Door]:
    """Backtrack blocker plus reject-branch blockers for a stem-up tee."""
    x1, y1, x2, y2 = rect
    left_trig = (x1 - _COMMIT_GAP - _SIDE_W, y1, x1 - _COMMIT_GAP, y2)
    right_trig = (x2 + _COMMIT_GAP, y1, x2 + _COMMIT_GAP + _SIDE_W, y2)
    return [
        Door(f"{label}-back", KIND_BACKTRACK, back_seg, (left_trig, right_trig)),
        Door(f"{label}-left", KIND_BACKTRACK, (x1 - 0.02, y1, x1 - 0.02, y2),
             (right_trig,)),
        Door(f"{label}-right", KIND_BACKTRACK, (x2 + 0.02, y1, x2 + 0.02, y2),
             (left_trig,)),
    ]


def _arm_doors(path_id: int, xc: float, return_left: bool) -> list[Door]:
    """Arm-top doors: close the arm behind and the wrong top-corridor side."""
    edge_l, edge_r = xc - 0.05, xc + 0.05
    left_trig = (edge_l - _COMMIT_GAP - _SIDE_W, 1.10, edge_l - _COMMIT_GAP, 1.20)
    right_trig = (edge_r + _COMMIT_GAP, 1.10, edge_r + _COMMIT_GAP + _SIDE_W, 1.20)
    mouth = (xc - 0.05, 1.13, xc + 0.05, 1.17)
    enf_x = xc + _ENF_OFF if return_left else xc - _ENF_OFF
    return [
        Door(f"p{path_id}-arm", KIND_BACKTRACK,
             (xc - 0.05, 1.08, xc + 0.05, 1.08), (left_trig, right_trig)),
        Door(f"p{path_id}-return", KIND_ENFORCER,
             (enf_x, 1.10, enf_x, 1.20), (mouth,)),
    ]


def _base_rects() -> list[tuple[float, float, float, float]]:
    return [
        (0.00, 0.00, 1.60, 0.20),   # home plaza
        (0.00, 1.10, 1.60, 1.20),   # top corridor
        (0.00, 0.20, 0.10, 1.10),   # left rail
        (1.50, 0.20, 1.60, 1.10),   # right rail
        (0.71, 0.20, 0.81, 0.60),   # stem
        (0.39, 0.50, 1.13, 0.60),   # first tee row
    ]


def _finish(kind, free, rewards, tees, segments, doors) -> MazeLayout:
    free = np.asarray(free, dtype=np.float64)
    walls = walls_from_free_rects(free)
    return MazeLayout(
        kind=kind, width=WIDTH, height=HEIGHT, bin_w=BIN_W, bin_h=BIN_H,
        home=Pose(0.76, 0.10, math.pi / 2), home_radius=0.06,
        free_rects=free, walls=walls, wall_textures=assign_textures(walls),
        doors=tuple(doors), rewards=tuple(rewards), tees=tuple(tees),
        segments=tuple(segments),
    )


def canonical_triple_t() -> MazeLayout:
    """Four-path triple-T arena with 110 corridor bins."""
    free = _base_rects() + [
        (0.39, 0.50, 0.49, 1.00),   # left middle stem
        (1.03, 0.50, 1.13, 1.00),   # right middle stem
        (0.23, 0.90, 0.65, 1.00),   # left second tee row
        (0.87, 0.90, 1.29, 1.00),   # right second tee row
        (0.23, 0.90, 0.33, 1.20),   # arm 1
        (0.55, 0.90, 0.65, 1.20),   # arm 2
        (0.87, 0.90, 0.97, 1.20),   # arm 3
        (1.19, 0.90, 1.29, 1.20),   # arm 4
    ]
    arm_x = {1: 0.28, 2: 0.60, 3: 0.92, 4: 1.24}
    rewards = [RewardSite(k, arm_x[k], 1.05, 0.06) for k in (1, 2, 3, 4)]
    tees = [
        Tee("t1", (0.71, 0.50, 0.81, 0.60)),
        Tee("t2", (0.39, 0.90, 0.49, 1.00)),
        Tee("t3", (1.03, 0.90, 1.13, 1.00)),
        Tee("t4", (0.23, 1.10, 0.33, 1.20)),
        Tee("t5", (0.55, 1.10, 0.65, 1.20)),
        Tee("t6", (0.87, 1.10, 0.97, 1.20)),
        Tee("t7", (1.19, 1.10, 1.29, 1.20)),
    ]
    segments = [
        SegmentRegion("seg1", "prospective", (1, 2, 3, 4), (0.71, 0.20, 0.81, 0.50)),
        SegmentRegion("seg3-1", "prospective", (1, 2), (0.39, 0.60, 0.49, 0.90)),
        SegmentRegion("seg3-2", "prospective", (3, 4), (1.03, 0.60, 1.13, 0.90)),
        SegmentRegion("seg8-1", "retrospective", (1, 2), (0.00, 0.20, 0.10, 1.10)),
        SegmentRegion("seg8-2", "retrospective", (3, 4), (1.50, 0.20, 1.60, 1.10)),
    ]
    doors = _tee_doors("t1", (0.71, 0.50, 0.81, 0.60), (0.71, 0.48, 0.81, 0.48))
    doors += _tee_doors("t2", (0.39, 0.90, 0.49, 1.00), (0.39, 0.88, 0.49, 0.88))
    doors += _tee_doors("t3", (1.03, 0.90, 1.13, 1.00), (1.03, 0.88, 1.13, 0.88))
    for k in (1, 2, 3, 4):
        doors += _arm_doors(k, arm_x[k], return_left=k <= 2)
    return _finish("triple-t", free, rewards, tees, segments, doors)


def desk_double_t() -> MazeLayout:
    """Two-path single-decision arena used for quick evolution runs."""
    free = _base_rects() + [
        (0.39, 0.50, 0.49, 1.20),   # left arm
        (1.03, 0.50, 1.13, 1.20),   # right arm
    ]
    arm_x = {1: 0.44, 2: 1.08}
    rewards = [RewardSite(k, arm_x[k], 1.05, 0.06) for k in (1, 2)]
    tees = [
        Tee("t1", (0.71, 0.50, 0.81, 0.60)),
        Tee("t2", (0.39, 1.10, 0.49, 1.20)),
        Tee("t3", (1.03, 1.10, 1.13, 1.20)),
    ]
    segments = [
        SegmentRegion("seg1", "prospective", (1, 2), (0.71, 0.20, 0.81, 0.50)),
    ]
    doors = _tee_doors("t1", (0.71, 0.50, 0.81, 0.60), (0.71, 0.48, 0.81, 0.48))
    for k in (1, 2):
        doors += _arm_doors(k, arm_x[k], return_left=k == 1)
    return _finish("double-t", free, rewards, tees, segments, doors)
