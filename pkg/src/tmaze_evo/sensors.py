"""Sensor models: proximity ring, body-frame accelerometer, line camera.

All rays are cast from the robot centre against the static walls plus
whichever door segments are currently closed. Proximity readings measure
from the body surface, camera brightness from the centre.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import raycast_from
from .maze import DOOR_SHADE, MazeLayout, texture_shades
from .robot import Pose, RobotBody

# ring order mirrors left/right pairs as i <-> 7 - i; positive angles are CCW
PROX_ANGLES_DEG = (17.0, 47.0, 90.0, 151.0, -151.0, -90.0, -47.0, -17.0)
PROX_RANGE = 0.06
NUM_PROX = len(PROX_ANGLES_DEG)

CAM_FOV = math.tau / 6
CAM_COLS = 10
CAM_ROWS = 8
CAM_RANGE = 0.8

GRAVITY = 9.81
ACCEL_SCALE = 10.0

NUM_INPUTS = NUM_PROX + 3 + CAM_ROWS * CAM_COLS

PROX_SLICE = slice(0, NUM_PROX)
ACCEL_SLICE = slice(NUM_PROX, NUM_PROX + 3)
PIXEL_SLICE = slice(NUM_PROX + 3, NUM_INPUTS)


class SensorRig:
    """Precomputed ray tables for one layout."""

    def __init__(self, layout: MazeLayout, body: RobotBody):
        self.body = body
        door_segs = layout.door_segments()
        self.segs = np.vstack([layout.walls, door_segs])
        self.tex = np.concatenate([
            layout.wall_textures,
            np.full(len(door_segs), -1, dtype=np.int64),  # -1 renders as a door
        ])
        self.lengths = np.hypot(self.segs[:, 2] - self.segs[:, 0],
                                self.segs[:, 3] - self.segs[:, 1])
        self.n_static = len(layout.walls)
        self._prox_rel = np.radians(PROX_ANGLES_DEG)
        self._cam_rel = CAM_FOV / 2 - (np.arange(CAM_COLS) + 0.5) * (CAM_FOV / CAM_COLS)
        self._rel = np.concatenate([self._prox_rel, self._cam_rel])
        self._active = np.ones(len(self.segs), dtype=bool)

    def active_mask(self, doors_closed: np.ndarray) -> np.ndarray:
        return np.concatenate([
            np.ones(self.n_static, dtype=bool),
            np.asarray(doors_closed, dtype=bool),
        ])

    def proximity(self, pose: Pose, doors_closed) -> np.ndarray:
        return self.read(pose, doors_closed, np.zeros(2))[PROX_SLICE]

    def read(self, pose: Pose, doors_closed, accel_xy) -> np.ndarray:
        """One step's 91-entry input vector: 8 proximity, 3 accel, 80 pixels."""
        angles = pose.heading + self._rel
        dirs = np.empty((angles.size, 2))
        np.cos(angles, out=dirs[:, 0])
        np.sin(angles, out=dirs[:, 1])
        active = self._active
        active[self.n_static:] = doors_closed
        t, idx, u = raycast_from((pose.x, pose.y), dirs, self.segs,
                                 active=active)

        x = np.empty(NUM_INPUTS)
        d = np.maximum(t[:NUM_PROX] - self.body.body_radius, 0.0)
        np.maximum(0.0, 1.0 - d / PROX_RANGE, out=x[PROX_SLICE])

        cam_t = t[NUM_PROX:]
        cam_idx = idx[NUM_PROX:]
        cam_u = u[NUM_PROX:]
        hit = cam_idx >= 0
        safe = np.where(hit, cam_idx, 0)
        lens = self.lengths[safe]
        texs = self.tex[safe]
        sh = texture_shades(texs, cam_u * lens, lens)
        sh = np.where(texs < 0, DOOR_SHADE, sh)
        fade = np.maximum(0.0, 1.0 - cam_t / CAM_RANGE)
        x[PIXEL_SLICE].reshape(CAM_ROWS, CAM_COLS)[:] = np.where(
            hit, sh * fade, 0.0)

        ax = float(accel_xy[0])
        ay = float(accel_xy[1])
        cos_h = math.cos(pose.heading)
        sin_h = math.sin(pose.heading)
        x[NUM_PROX] = (ax * cos_h + ay * sin_h) / ACCEL_SCALE
        x[NUM_PROX + 1] = (ay * cos_h - ax * sin_h) / ACCEL_SCALE
        x[NUM_PROX + 2] = GRAVITY / ACCEL_SCALE
        return x
