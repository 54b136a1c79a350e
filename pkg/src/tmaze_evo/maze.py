"""Maze layout model: walls, doors, rewards, labelled regions, file I/O.

A layout is pure data. Free space is a union of axis-aligned rects; wall
segments are derived from that union when a layout is built and written into
the layout file so it stays self-contained. Doors are wall segments that
appear when triggered; trigger rects are placed by the builders so a closing
door can never overlap the robot, and validate_layout checks that.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .bins import BinGrid
from .errors import LayoutError
from .geometry import (
    min_seg_distances,
    point_in_free_space,
    point_seg_distances,
    walls_from_free_rects,
)
from .robot import Pose

KIND_BACKTRACK = "backtrack-blocker"
KIND_ENFORCER = "return-path-enforcer"

TRIPLE_T_SEGMENTS = ("seg1", "seg3-1", "seg3-2", "seg8-1", "seg8-2")

# wall texture ids (camera landmark shades)
TEX_DARK = 0
TEX_LIGHT = 1
TEX_STRIPES_WIDE = 2
TEX_STRIPES_NARROW = 3
TEX_GRAD_UP = 4
TEX_GRAD_DOWN = 5
NUM_TEXTURES = 6

DOOR_SHADE = 0.55


def texture_shades(tex, s, length) -> np.ndarray:
    """Grey shade at arclength s (m) along walls with the given texture ids.

    Stripe periods are metric so adjacent walls with the same texture stay in
    register; gradients run from the wall's first endpoint to its second.
    """
    tex = np.asarray(tex)
    s = np.asarray(s, dtype=np.float64)
    ln = np.maximum(np.asarray(length, dtype=np.float64), 1e-12)
    u = np.clip(s / ln, 0.0, 1.0)
    wide = np.where((s / 0.08).astype(np.int64) % 2 == 0, 0.85, 0.15)
    narrow = np.where((s / 0.04).astype(np.int64) % 2 == 0, 0.85, 0.15)
    out = np.where(tex == TEX_GRAD_UP, 0.1 + 0.8 * u, 0.9 - 0.8 * u)
    out = np.where(tex == TEX_STRIPES_NARROW, narrow, out)
    out = np.where(tex == TEX_STRIPES_WIDE, wide, out)
    out = np.where(tex == TEX_LIGHT, 0.9, out)
    out = np.where(tex == TEX_DARK, 0.2, out)
    return out


@dataclass(frozen=True)
class Door:
    door_id: str
    kind: str  # KIND_BACKTRACK or KIND_ENFORCER
    segment: tuple[float, float, float, float]
    triggers: tuple[tuple[float, float, float, float], ...]


@dataclass(frozen=True)
class RewardSite:
    path_id: int
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class SegmentRegion:
    name: str
    mode: str  # "prospective" | "retrospective"
    classes: tuple[int, ...]
    rect: tuple[float, float, float, float]


@dataclass(frozen=True)
class Tee:
    label: str
    rect: tuple[float, float, float, float]


@dataclass
class MazeLayout:
    kind: str  # "triple-t" | "double-t"
    width: float
    height: float
    bin_w: float
    bin_h: float
    home: Pose
    home_radius: float
    free_rects: np.ndarray  # (R, 4)
    walls: np.ndarray       # (W, 4)
    wall_textures: np.ndarray  # (W,) int
    doors: tuple[Door, ...]
    rewards: tuple[RewardSite, ...]
    tees: tuple[Tee, ...]
    segments: tuple[SegmentRegion, ...] = field(default_factory=tuple)

    def grid(self) -> BinGrid:
        return BinGrid(self.width, self.height, self.bin_w, self.bin_h)

    def segment_by_name(self, name: str) -> SegmentRegion | None:
        for s in self.segments:
            if s.name == name:
                return s
        return None

    def door_segments(self) -> np.ndarray:
        if not self.doors:
            return np.zeros((0, 4))
        return np.asarray([d.segment for d in self.doors], dtype=np.float64)

    def path_ids(self) -> tuple[int, ...]:
        return tuple(sorted(r.path_id for r in self.rewards))


def _fmt(x: float) -> str:
    return repr(float(x))


def layout_text(layout: MazeLayout) -> str:
    """The layout's file serialization as a string (also its identity for hashing)."""
    lines = ["tmaze-layout v1"]
    lines.append(f"kind {layout.kind}")
    lines.append(f"bounds {_fmt(layout.width)} {_fmt(layout.height)}")
    lines.append(f"bin {_fmt(layout.bin_w)} {_fmt(layout.bin_h)}")
    lines.append(
        "home "
        + " ".join(_fmt(v) for v in (layout.home.x, layout.home.y,
                                     layout.home.heading, layout.home_radius))
    )
    for r in layout.free_rects:
        lines.append("free " + " ".join(_fmt(v) for v in r))
    for w, t in zip(layout.walls, layout.wall_textures):
        lines.append("wall " + " ".join(_fmt(v) for v in w) + f" {int(t)}")
    for rw in layout.rewards:
        lines.append(
            f"reward {rw.path_id} " + " ".join(_fmt(v) for v in (rw.x, rw.y, rw.radius))
        )
    for tee in layout.tees:
        lines.append(f"tee {tee.label} " + " ".join(_fmt(v) for v in tee.rect))
    for s in layout.segments:
        cls = ",".join(str(c) for c in s.classes)
        lines.append(
            f"segment {s.name} {s.mode} {cls} " + " ".join(_fmt(v) for v in s.rect)
        )
    for d in layout.doors:
        parts = [f"door {d.door_id} {d.kind}"]
        parts.append(" ".join(_fmt(v) for v in d.segment))
        for tr in d.triggers:
            parts.append("trigger " + " ".join(_fmt(v) for v in tr))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def save_layout(layout: MazeLayout, path: str) -> None:
    with open(path, "w") as f:
        f.write(layout_text(layout))


def _floats(tokens: list[str], n: int, lineno: int) -> list[float]:
    if len(tokens) < n:
        raise LayoutError(f"line {lineno}: expected {n} numbers, got {len(tokens)}")
    try:
        return [float(t) for t in tokens[:n]]
    except ValueError as e:
        raise LayoutError(f"line {lineno}: bad number ({e})") from None


def load_layout(path: str) -> MazeLayout:
    with open(path) as f:
        raw = f.read().splitlines()
    if not raw or raw[0].strip() != "tmaze-layout v1":
        raise LayoutError(f"{path}: missing 'tmaze-layout v1' header")

    kind = ""
    width = height = bin_w = bin_h = 0.0
    home: Pose | None = None
    home_radius = 0.0
    free: list[list[float]] = []
    walls: list[list[float]] = []
    textures: list[int] = []
    rewards: list[RewardSite] = []
    tees: list[Tee] = []
    segments: list[SegmentRegion] = []
    doors: list[Door] = []

    for lineno, line in enumerate(raw[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        tag, rest = tok[0], tok[1:]
        if tag == "kind":
            if len(rest) != 1 or rest[0] not in ("triple-t", "double-t"):
                raise LayoutError(f"line {lineno}: kind must be triple-t or double-t")
            kind = rest[0]
        elif tag == "bounds":
            width, height = _floats(rest, 2, lineno)
        elif tag == "bin":
            bin_w, bin_h = _floats(rest, 2, lineno)
        elif tag == "home":
            x, y, heading, home_radius = _floats(rest, 4, lineno)
            home = Pose(x, y, heading)
        elif tag == "free":
            free.append(_floats(rest, 4, lineno))
        elif tag == "wall":
            if len(rest) != 5:
                raise LayoutError(f"line {lineno}: wall needs 4 coords + texture id")
            walls.append(_floats(rest, 4, lineno))
            try:
                tex = int(rest[4])
            except ValueError:
                raise LayoutError(f"line {lineno}: bad texture id {rest[4]!r}") from None
            if not 0 <= tex < NUM_TEXTURES:
                raise LayoutError(f"line {lineno}: texture id {tex} out of range")
            textures.append(tex)
        elif tag == "reward":
            if len(rest) != 4:
                raise LayoutError(f"line {lineno}: reward needs path id + 3 numbers")
            try:
                pid = int(rest[0])
            except ValueError:
                raise LayoutError(f"line {lineno}: bad path id {rest[0]!r}") from None
            x, y, radius = _floats(rest[1:], 3, lineno)
            rewards.append(RewardSite(pid, x, y, radius))
        elif tag == "tee":
            if len(rest) != 5:
                raise LayoutError(f"line {lineno}: tee needs label + 4 coords")
            tees.append(Tee(rest[0], tuple(_floats(rest[1:], 4, lineno))))
        elif tag == "segment":
            if len(rest) != 7:
                raise LayoutError(
                    f"line {lineno}: segment needs name, mode, classes, 4 coords"
                )
            name, mode, cls = rest[0], rest[1], rest[2]
            if mode not in ("prospective", "retrospective"):
                raise LayoutError(f"line {lineno}: bad segment mode {mode!r}")
            try:
                classes = tuple(int(c) for c in cls.split(","))
            except ValueError:
                raise LayoutError(f"line {lineno}: bad class list {cls!r}") from None
            segments.append(
                SegmentRegion(name, mode, classes, tuple(_floats(rest[3:], 4, lineno)))
            )
        elif tag == "door":
            if len(rest) < 6:
                raise LayoutError(f"line {lineno}: door needs id, kind, 4 coords")
            door_id, dkind = rest[0], rest[1]
            if dkind not in (KIND_BACKTRACK, KIND_ENFORCER):
                raise LayoutError(f"line {lineno}: bad door kind {dkind!r}")
            seg = tuple(_floats(rest[2:6], 4, lineno))
            triggers = []
            i = 6
            while i < len(rest):
                if rest[i] != "trigger":
                    raise LayoutError(f"line {lineno}: expected 'trigger', got {rest[i]!r}")
                triggers.append(tuple(_floats(rest[i + 1:i + 5], 4, lineno)))
                i += 5
            if not triggers:
                raise LayoutError(f"line {lineno}: door {door_id} has no trigger")
            doors.append(Door(door_id, dkind, seg, tuple(triggers)))
        else:
            raise LayoutError(f"line {lineno}: unknown directive {tag!r}")

    if not kind:
        raise LayoutError(f"{path}: missing 'kind' line")
    if home is None:
        raise LayoutError(f"{path}: missing 'home' line")
    if not free:
        raise LayoutError(f"{path}: no free-space rects")
    return MazeLayout(
        kind=kind, width=width, height=height, bin_w=bin_w, bin_h=bin_h,
        home=home, home_radius=home_radius,
        free_rects=np.asarray(free, dtype=np.float64),
        walls=np.asarray(walls, dtype=np.float64).reshape(-1, 4),
        wall_textures=np.asarray(textures, dtype=np.int64),
        doors=tuple(doors), rewards=tuple(rewards), tees=tuple(tees),
        segments=tuple(segments),
    )


def _point_rect_distance(px, py, rect) -> float:
    x1, y1, x2, y2 = rect
    dx = max(x1 - px, 0.0, px - x2)
    dy = max(y1 - py, 0.0, py - y2)
    return float(np.hypot(dx, dy))


def _rect_seg_distance(rect, seg) -> float:
    """Min distance between an axis-aligned rect and a segment (0 if touching)."""
    x1, y1, x2, y2 = rect
    corners = np.array([[x1, y1], [x1, y2], [x2, y1], [x2, y2]])
    best = np.inf
    for c in corners:
        d, _ = point_seg_distances(c, np.asarray(seg).reshape(1, 4))
        best = min(best, float(d[0]))
    a = np.asarray(seg[:2])
    b = np.asarray(seg[2:])
    for t in np.linspace(0.0, 1.0, 33):
        p = a + t * (b - a)
        best = min(best, _point_rect_distance(p[0], p[1], rect))
    return best


def _corridor_adjacency(grid: BinGrid, free_rects, bins_set):
    """Edges between corridor bins whose shared border is open space."""
    adj: dict[tuple[int, int], list[tuple[int, int]]] = {b: [] for b in bins_set}
    eps = 1e-6
    for (c, r) in bins_set:
        for dc, dr in ((1, 0), (0, 1)):
            nb = (c + dc, r + dr)
            if nb not in bins_set:
                continue
            if dc == 1:
                xe = (c + 1) * grid.bin_w
                _, ye = grid.center(c, r)
                open_border = (
                    point_in_free_space(free_rects, xe - eps, ye)
                    and point_in_free_space(free_rects, xe + eps, ye)
                )
            else:
                ye = (r + 1) * grid.bin_h
                xe, _ = grid.center(c, r)
                open_border = (
                    point_in_free_space(free_rects, xe, ye - eps)
                    and point_in_free_space(free_rects, xe, ye + eps)
                )
            if open_border:
                adj[(c, r)].append(nb)
                adj[nb].append((c, r))
    return adj


def validate_layout(layout: MazeLayout, body_radius: float = 0.037) -> list[str]:
    """Full structural validation; returns a list of problems (empty = valid)."""
    problems: list[str] = []
    w, h = layout.width, layout.height
    if w <= 0 or h <= 0 or layout.bin_w <= 0 or layout.bin_h <= 0:
        return ["bounds/bin sizes must be positive"]

    r = np.asarray(layout.free_rects)
    if (r[:, 0] < -1e-9).any() or (r[:, 1] < -1e-9).any() \
            or (r[:, 2] > w + 1e-9).any() or (r[:, 3] > h + 1e-9).any():
        problems.append("free rect outside bounds")
    min_dim = min((r[:, 2] - r[:, 0]).min(), (r[:, 3] - r[:, 1]).min())
    if min_dim < 2 * body_radius:
        problems.append(
            f"corridor width {min_dim:.3f} below robot diameter {2 * body_radius:.3f}"
        )

    regenerated = {tuple(s) for s in walls_from_free_rects(layout.free_rects)}
    stored = {tuple(s) for s in layout.walls}
    if regenerated != stored:
        problems.append("stored walls do not match free-space boundary")

    grid = layout.grid()
    corridor = grid.corridor_bins(layout.free_rects)
    bins_set = set(corridor)
    if layout.kind == "triple-t":
        if len(corridor) != 110:
            problems.append(f"corridor bins {len(corridor)} != 110")
        if len(layout.rewards) != 4:
            problems.append(f"{len(layout.rewards)} rewards != 4")
        if len(layout.tees) != 7:
            problems.append(f"{len(layout.tees)} T-intersections != 7")
        names = {s.name for s in layout.segments}
        if names != set(TRIPLE_T_SEGMENTS):
            problems.append(f"segments {sorted(names)} != {sorted(TRIPLE_T_SEGMENTS)}")
    elif layout.kind == "double-t":
        if len(layout.rewards) != 2:
            problems.append(f"{len(layout.rewards)} rewards != 2")
        if len(layout.tees) != 3:
            problems.append(f"{len(layout.tees)} T-intersections != 3")

    if not point_in_free_space(layout.free_rects, layout.home.x, layout.home.y):
        problems.append("home pose not in free space")
    for rw in layout.rewards:
        if not point_in_free_space(layout.free_rects, rw.x, rw.y):
            problems.append(f"reward {rw.path_id} not in free space")

    # reachability: every reward bin reachable from the home bin
    adj = _corridor_adjacency(grid, layout.free_rects, bins_set)
    start = grid.bin_of(layout.home.x, layout.home.y)
    seen = {start}
    q = deque([start])
    while q:
        b = q.popleft()
        for nb in adj.get(b, ()):
            if nb not in seen:
                seen.add(nb)
                q.append(nb)
    for rw in layout.rewards:
        if grid.bin_of(rw.x, rw.y) not in seen:
            problems.append(f"reward {rw.path_id} unreachable from home")
    unreached = bins_set - seen
    if unreached:
        problems.append(f"{len(unreached)} corridor bins unreachable from home")

    # reachable robot centres must always land in corridor bins
    step = 0.01
    gx, gy = np.meshgrid(np.arange(step / 2, w, step), np.arange(step / 2, h, step))
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    rr = np.asarray(layout.free_rects)
    in_free = np.zeros(len(pts), dtype=bool)
    for x1, y1, x2, y2 in rr:
        in_free |= (
            (x1 <= pts[:, 0]) & (pts[:, 0] <= x2)
            & (y1 <= pts[:, 1]) & (pts[:, 1] <= y2)
        )
    pts = pts[in_free]
    pts = pts[min_seg_distances(pts, layout.walls) >= body_radius]
    for col, row in {tuple(b) for b in grid.bins_of(pts)}:
        if (col, row) not in bins_set:
            problems.append(f"reachable centre in non-corridor bin ({col}, {row})")

    # door sanity: ids unique, triggers clear of the segments they close
    ids = [d.door_id for d in layout.doors]
    if len(set(ids)) != len(ids):
        problems.append("duplicate door ids")
    for d in layout.doors:
        if d.kind not in (KIND_BACKTRACK, KIND_ENFORCER):
            problems.append(f"door {d.door_id}: bad kind {d.kind}")
        for tr in d.triggers:
            gap = _rect_seg_distance(tr, d.segment)
            if gap < body_radius:
                problems.append(
                    f"door {d.door_id}: trigger within {gap:.3f} of its segment"
                )
    return problems
