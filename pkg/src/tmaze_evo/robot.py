"""Differential-drive body: exact arc kinematics and disc/wall collision."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import UnresolvableCollisionError
from .geometry import point_seg_distances

TWO_PI = 2.0 * math.pi


class Pose(NamedTuple):
    x: float
    y: float
    heading: float  # radians, normalized to [0, 2*pi)


@dataclass(frozen=True)
class RobotBody:
    """Physical constants of the simulated robot (e-puck sized)."""

    body_radius: float = 0.037
    wheel_radius: float = 0.0205
    axle_length: float = 0.052
    min_wheel_speed: float = -3.14
    max_wheel_speed: float = 6.28


def wrap_heading(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    return theta


def clamp_wheel_speeds(wl: float, wr: float, body: RobotBody) -> tuple[float, float]:
    lo, hi = body.min_wheel_speed, body.max_wheel_speed
    return (min(max(wl, lo), hi), min(max(wr, lo), hi))


def step_kinematics(pose: Pose, wl: float, wr: float, body: RobotBody,
                    dt: float) -> Pose:
    """Advance one control step along the exact circular arc (ICC form).

    wl/wr are wheel angular speeds in rad/s; the caller clamps them first.
    """
    x, y, th = pose
    v = body.wheel_radius * (wl + wr) / 2.0
    w = body.wheel_radius * (wr - wl) / body.axle_length
    if abs(w) < 1e-12:
        return Pose(x + v * dt * math.cos(th), y + v * dt * math.sin(th), th)
    radius = v / w
    icc_x = x - radius * math.sin(th)
    icc_y = y + radius * math.cos(th)
    th2 = th + w * dt
    return Pose(
        icc_x + radius * math.sin(th2),
        icc_y - radius * math.cos(th2),
        wrap_heading(th2),
    )


def resolve_collision(pose: Pose, segs: np.ndarray, body_radius: float,
                      active: np.ndarray | None = None) -> Pose:
    """Push the body's disc out of any penetrated segment.

    Iteratively resolves the deepest penetration along its contact normal,
    which for axis-aligned walls is the minimal push-out (face contacts move
    along one axis, corner contacts combine both). Raises
    UnresolvableCollisionError if clearing all contacts needs more than one
    body radius of total displacement.
    """
    if len(segs) == 0:
        return pose
    p = np.array([pose.x, pose.y])
    start = p.copy()
    for _ in range(16):
        d, closest = point_seg_distances(p, segs)
        if active is not None:
            d = np.where(active, d, np.inf)
        k = int(np.argmin(d))
        if d[k] >= body_radius:
            break
        if d[k] < 1e-12:
            # centre sitting exactly on a wall: push along its normal
            seg = segs[k]
            n = np.array([-(seg[3] - seg[1]), seg[2] - seg[0]])
            n /= max(np.linalg.norm(n), 1e-12)
        else:
            n = (p - closest[k]) / d[k]
        p = closest[k] + n * (body_radius + 1e-9)
        if np.hypot(p[0] - start[0], p[1] - start[1]) > body_radius:
            raise UnresolvableCollisionError(
                f"push-out from ({pose.x:.4f}, {pose.y:.4f}) exceeded one body radius"
            )
    else:
        raise UnresolvableCollisionError(
            f"collision at ({pose.x:.4f}, {pose.y:.4f}) did not settle"
        )
    return Pose(float(p[0]), float(p[1]), pose.heading)


OA_THRESHOLD = 0.8
OA_GAIN = 2.0
OA_ESCAPE = 2.0


def obstacle_avoidance(prox: np.ndarray, wl: float, wr: float) -> tuple[float, float]:
    """Reactive wall-avoidance layered onto the controller's wheel commands.

    Inactive until some proximity reading exceeds OA_THRESHOLD. Head-on
    contact (both front sensors hot) backs the robot up; otherwise the wheel
    on the crowded side speeds up, steering away from the wall.
    """
    if prox.max() <= OA_THRESHOLD:
        return wl, wr
    if prox[0] > OA_THRESHOLD and prox[-1] > OA_THRESHOLD:
        return wl - OA_ESCAPE, wr - OA_ESCAPE
    delta = OA_GAIN * float(prox[:4].sum() - prox[4:].sum())
    return wl + delta, wr - delta
