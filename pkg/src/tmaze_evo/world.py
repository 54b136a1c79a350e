"""Trial execution: the sense-act-move loop with doors, rewards and scoring.

Loop order per step: sense, lesion, controller, avoidance reflex, wheel
clamp, arc kinematics, collision push-out, then door triggers, reward
latching and home/stem transitions evaluated at the settled pose. Door
trigger checks use the robot centre; every layout guarantees a closing
segment is at least one body radius from any pose inside its triggers.

A trial's randomness comes solely from the generator handed to run():
three uniforms for the start-pose jitter, then one permutation per step
when a lesion is active. Everything else is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ablation import Ablation
from .geometry import min_seg_distances
from .maze import MazeLayout
from .rnn import N_HIDDEN
from .robot import (
    Pose,
    RobotBody,
    clamp_wheel_speeds,
    obstacle_avoidance,
    resolve_collision,
    step_kinematics,
    wrap_heading,
)
from .sensors import NUM_INPUTS, PROX_SLICE, SensorRig

REPEAT_PENALTY = 0.2
FITNESS_CAP = 5.0

# clearance-grid resolution for skipping the collision solve on steps that
# provably cannot touch a wall; must stay fine enough that corridor centres
# clear body_radius + cell half-diagonal
_CLEAR_CELL = 0.01


@dataclass(frozen=True)
class TrialParams:
    dt: float = 0.064
    max_steps: int = 5000
    pos_jitter: float = 0.01
    heading_jitter: float = 0.05


@dataclass
class TrialLog:
    positions: np.ndarray   # (T, 3) x, y, heading at sensing time
    inputs: np.ndarray      # (T, 91) post-lesion sensor vectors
    states: np.ndarray      # (T, 50) controller state after the update
    motors: np.ndarray      # (T, 2) wheel speeds after clamping
    events: list


@dataclass
class TrialResult:
    fitness: float
    num_rewards: int
    num_repeats: int
    total_visits: int
    returned_visits: int
    steps: int
    completed: bool
    events: list
    log: TrialLog | None = None


def fitness_from_counts(num_rewards: int, returned: int, visits: int,
                        repeats: int) -> float:
    frac = returned / visits if visits else 0.0
    return min(num_rewards + frac - REPEAT_PENALTY * repeats, FITNESS_CAP)


class TrialRunner:
    """Runs trials in one layout, optionally lesioned, optionally logged."""

    def __init__(self, layout: MazeLayout, body: RobotBody | None = None,
                 params: TrialParams | None = None, ablation: str = "none"):
        self.layout = layout
        self.body = body or RobotBody()
        self.params = params or TrialParams()
        self.ablation_name = ablation
        self.rig = SensorRig(layout, self.body)
        self._n_static = self.rig.n_static

        trig_rects, trig_owner = [], []
        for k, door in enumerate(layout.doors):
            for tr in door.triggers:
                trig_rects.append(tr)
                trig_owner.append(k)
        self._trig = np.asarray(trig_rects, dtype=np.float64).reshape(-1, 4)
        self._trig_owner = np.asarray(trig_owner, dtype=np.int64)

        self._reward_xy = np.array([[r.x, r.y] for r in layout.rewards]
                                   ).reshape(-1, 2)
        self._reward_r = np.array([r.radius for r in layout.rewards])
        self._reward_path = [r.path_id for r in layout.rewards]
        self._reward_ymin = (float((self._reward_xy[:, 1] - self._reward_r).min())
                             if layout.rewards else 0.0)
        seg1 = layout.segment_by_name("seg1")
        self._seg1 = seg1.rect if seg1 is not None else None

        nx = int(math.ceil(layout.width / _CLEAR_CELL))
        ny = int(math.ceil(layout.height / _CLEAR_CELL))
        xs = (np.arange(nx) + 0.5) * _CLEAR_CELL
        ys = (np.arange(ny) + 0.5) * _CLEAR_CELL
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        margin = _CLEAR_CELL * math.sqrt(2) / 2
        lb = min_seg_distances(pts, layout.walls).reshape(ny, nx) - margin
        self._wall_clear = lb >= self.body.body_radius
        self._grid_shape = (ny, nx)
        door_segs = self.rig.segs[self._n_static:]
        pad = self.body.body_radius + 1e-6
        self._door_bbox = np.column_stack([
            np.minimum(door_segs[:, 0], door_segs[:, 2]) - pad,
            np.minimum(door_segs[:, 1], door_segs[:, 3]) - pad,
            np.maximum(door_segs[:, 0], door_segs[:, 2]) + pad,
            np.maximum(door_segs[:, 1], door_segs[:, 3]) + pad,
        ]).reshape(-1, 4)

    def start_pose(self, rng: np.random.Generator) -> Pose:
        p = self.params
        home = self.layout.home
        return Pose(
            home.x + rng.uniform(-p.pos_jitter, p.pos_jitter),
            home.y + rng.uniform(-p.pos_jitter, p.pos_jitter),
            wrap_heading(home.heading
                         + rng.uniform(-p.heading_jitter, p.heading_jitter)),
        )

    def run(self, controller, rng: np.random.Generator,
            record: bool = False) -> TrialResult:
        dt = self.params.dt
        max_steps = self.params.max_steps
        body = self.body
        lesion = Ablation(self.ablation_name, controller)
        controller.reset()
        pose = self.start_pose(rng)

        n_doors = len(self.layout.doors)
        doors_closed = np.zeros(n_doors, dtype=bool)
        active = np.concatenate([np.ones(self._n_static, dtype=bool), doors_closed])
        n_closed = 0
        wall_clear = self._wall_clear
        ny, nx = self._grid_shape
        inv_cell = 1.0 / _CLEAR_CELL
        bbox = self._door_bbox

        p_now = np.array([pose.x, pose.y])
        p_prev = p_now.copy()
        v_prev = np.zeros(2)

        rewards_obtained: set = set()
        latched: set = set()
        num_repeats = total_visits = returned = pending = 0
        in_home, in_seg1 = True, False
        completed = False
        events: list = []

        if record:
            log_pos = np.empty((max_steps, 3))
            log_in = np.empty((max_steps, NUM_INPUTS))
            log_state = np.zeros((max_steps, N_HIDDEN))
            log_motor = np.empty((max_steps, 2))

        hx, hy, hr = (self.layout.home.x, self.layout.home.y,
                      self.layout.home_radius)
        steps_done = 0
        try:
            for t in range(max_steps):
                v_now = (p_now - p_prev) / dt
                accel = (v_now - v_prev) / dt
                x = self.rig.read(pose, doors_closed, accel)
                x = lesion.before_step(x, rng)
                if hasattr(controller, "observe_pose"):
                    controller.observe_pose(pose)
                wl, wr = controller.step(x)
                wl, wr = obstacle_avoidance(x[PROX_SLICE], wl, wr)
                wl, wr = clamp_wheel_speeds(wl, wr, body)
                if record:
                    log_pos[t] = pose
                    log_in[t] = x
                    state = getattr(controller, "state", None)
                    if state is not None:
                        log_state[t] = state
                    log_motor[t] = (wl, wr)

                pose = step_kinematics(pose, wl, wr, body, dt)
                # cells with a clearance lower bound past the body radius
                # cannot yield a push-out, so the solve is skipped there
                ix = min(max(int(pose.x * inv_cell), 0), nx - 1)
                iy = min(max(int(pose.y * inv_cell), 0), ny - 1)
                clear = wall_clear[iy, ix]
                if clear and n_closed:
                    clear = not (doors_closed
                                 & (bbox[:, 0] <= pose.x)
                                 & (pose.x <= bbox[:, 2])
                                 & (bbox[:, 1] <= pose.y)
                                 & (pose.y <= bbox[:, 3])).any()
                if not clear:
                    pose = resolve_collision(pose, self.rig.segs,
                                             body.body_radius, active=active)
                v_prev, p_prev = v_now, p_now
                p_now = np.array([pose.x, pose.y])
                steps_done = t + 1

                if self._trig.size and n_closed < n_doors:
                    hit = ((self._trig[:, 0] <= pose.x)
                           & (pose.x <= self._trig[:, 2])
                           & (self._trig[:, 1] <= pose.y)
                           & (pose.y <= self._trig[:, 3]))
                    if hit.any():
                        for k in np.unique(self._trig_owner[hit]):
                            if not doors_closed[k]:
                                doors_closed[k] = True
                                active[self._n_static + k] = True
                                n_closed += 1
                                events.append(
                                    (t, f"door:{self.layout.doors[k].door_id}"))

                if self._reward_xy.size and pose.y >= self._reward_ymin:
                    d = np.hypot(self._reward_xy[:, 0] - pose.x,
                                 self._reward_xy[:, 1] - pose.y)
                    for k in np.nonzero(d <= self._reward_r)[0]:
                        pid = self._reward_path[k]
                        if pid in latched:
                            continue
                        latched.add(pid)
                        total_visits += 1
                        pending += 1
                        if pid in rewards_obtained:
                            num_repeats += 1
                            events.append((t, f"repeat:{pid}"))
                        else:
                            rewards_obtained.add(pid)
                            events.append((t, f"reward:{pid}"))

                if self._seg1 is not None:
                    x1, y1, x2, y2 = self._seg1
                    inside = x1 <= pose.x <= x2 and y1 <= pose.y <= y2
                    if inside and not in_seg1:
                        latched.clear()
                        events.append((t, "seg1"))
                    in_seg1 = inside

                inside_home = (pose.x - hx) ** 2 + (pose.y - hy) ** 2 <= hr * hr
                if inside_home and not in_home:
                    events.append((t, "home"))
                    returned += pending
                    pending = 0
                    if self._seg1 is None:
                        latched.clear()
                    if n_closed:
                        doors_closed[:] = False
                        active[self._n_static:] = False
                        n_closed = 0
                    if len(rewards_obtained) == len(self._reward_path):
                        completed = True
                        events.append((t, "completed"))
                in_home = inside_home
                if completed:
                    break
            else:
                events.append((max_steps - 1, "timeout"))
        finally:
            lesion.restore()

        log = None
        if record:
            log = TrialLog(log_pos[:steps_done].copy(), log_in[:steps_done].copy(),
                           log_state[:steps_done].copy(),
                           log_motor[:steps_done].copy(), events)
        return TrialResult(
            fitness=fitness_from_counts(len(rewards_obtained), returned,
                                        total_visits, num_repeats),
            num_rewards=len(rewards_obtained), num_repeats=num_repeats,
            total_visits=total_visits, returned_visits=returned,
            steps=steps_done, completed=completed, events=events, log=log,
        )


CSV_COLUMNS = (
    ["step", "x", "y", "heading"]
    + [f"in_{i}" for i in range(NUM_INPUTS)]
    + [f"r_{i}" for i in range(N_HIDDEN)]
    + ["motor_l", "motor_r", "event"]
)


def save_trial_log(log: TrialLog, path: str, comment: str | None = None) -> None:
    by_step: dict = {}
    for t, tag in log.events:
        by_step.setdefault(t, []).append(tag)
    with open(path, "w") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(",".join(CSV_COLUMNS) + "\n")
        for t in range(len(log.positions)):
            row = [str(t)]
            for block in (log.positions[t], log.inputs[t],
                          log.states[t], log.motors[t]):
                row.extend(repr(float(v)) for v in block)
            row.append(";".join(by_step.get(t, [])))
            f.write(",".join(row) + "\n")


def log_comment(path: str) -> str | None:
    """The '# ...' comment heading a trial log, if one was written."""
    with open(path) as f:
        first = f.readline()
    if first.startswith("# "):
        return first[2:].rstrip("\n")
    return None


def load_trial_log(path: str) -> TrialLog:
    with open(path) as f:
        header = f.readline().rstrip("\n")
        if header.startswith("#"):
            header = f.readline().rstrip("\n")
        if header.split(",") != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected trial log columns")
        pos, xs, states, motors, events = [], [], [], [], []
        for line in f:
            cells = line.rstrip("\n").split(",")
            t = int(cells[0])
            vals = [float(c) for c in cells[1:-1]]
            pos.append(vals[0:3])
            xs.append(vals[3:3 + NUM_INPUTS])
            states.append(vals[3 + NUM_INPUTS:3 + NUM_INPUTS + N_HIDDEN])
            motors.append(vals[-2:])
            if cells[-1]:
                events.extend((t, tag) for tag in cells[-1].split(";"))
    return TrialLog(np.asarray(pos), np.asarray(xs), np.asarray(states),
                    np.asarray(motors), events)


def save_trial_summary(result: TrialResult, path: str) -> None:
    with open(path, "w") as f:
        f.write(f"fitness = {repr(result.fitness)}\n")
        f.write(f"num_rewards = {result.num_rewards}\n")
        f.write(f"num_repeats = {result.num_repeats}\n")
        f.write(f"total_visits = {result.total_visits}\n")
        f.write(f"returned_visits = {result.returned_visits}\n")
        f.write(f"steps = {result.steps}\n")
        f.write(f"completed = {result.completed}\n")
