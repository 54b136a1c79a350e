"""Post-hoc analyses of recorded trials.

Four analyses share the corridor-bin tessellation: per-trial bin activity
matrices averaged into decoding templates, nearest-neighbour location
decoding, segment-wise path decoding (prospective on approach segments,
retrospective on return rails), and the lesion battery with its
rank-sum comparisons. Everything here is a pure function of the logs it
is given; nothing draws randomness except the battery, whose trial seeds
are derived from the master seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ablation import ABLATIONS
from .errors import DegenerateSamplesError, EmptyTraversalError, NoSupportError
from .maze import MazeLayout, SegmentRegion
from .rnn import RNNController
from .seeds import STREAM_BATTERY, rng_for
from .stats import rank_sum_test
from .world import TrialParams, TrialRunner

SIGNIFICANCE = 0.01 / 6
EDGE_THRESHOLD = 1.0 / 3.0


def corridor_bins_of(layout: MazeLayout):
    """The layout's corridor bins and a (col, row) -> index lookup."""
    bins = layout.grid().corridor_bins(layout.free_rects)
    return bins, {b: i for i, b in enumerate(bins)}


def _bin_lut(layout: MazeLayout, bins):
    grid = layout.grid()
    lut = np.full((grid.cols, grid.rows), -1, dtype=np.int64)
    for i, (c, r) in enumerate(bins):
        lut[c, r] = i
    return lut


def _bin_indices(layout, bins, positions):
    cells = layout.grid().bins_of(positions[:, :2])
    idx = _bin_lut(layout, bins)[cells[:, 0], cells[:, 1]]
    if (idx < 0).any():
        k = int(np.nonzero(idx < 0)[0][0])
        raise ValueError(
            f"step {k} at ({positions[k, 0]:.3f}, {positions[k, 1]:.3f}) "
            "falls outside the corridor bins")
    return idx


def bin_activity_matrix(log, layout: MazeLayout):
    """Per-bin mean activity over one trial: (bins x neurons, visited mask)."""
    bins, _ = corridor_bins_of(layout)
    idx = _bin_indices(layout, bins, log.positions)
    acc = np.zeros((len(bins), log.states.shape[1]))
    cnt = np.zeros(len(bins))
    np.add.at(acc, idx, log.states)
    np.add.at(cnt, idx, 1.0)
    visited = cnt > 0
    values = np.zeros_like(acc)
    values[visited] = acc[visited] / cnt[visited, None]
    return values, visited


@dataclass
class ExpectedActivity:
    values: np.ndarray   # (bins, neurons) mean over the trials visiting a bin
    support: np.ndarray  # (bins,) number of contributing trials


def expected_matrix(logs, layout: MazeLayout) -> ExpectedActivity:
    """Average the per-trial matrices, bin by bin, over the trials that
    actually visited each bin."""
    acc = None
    support = None
    for log in logs:
        values, visited = bin_activity_matrix(log, layout)
        if acc is None:
            acc = np.zeros_like(values)
            support = np.zeros(len(visited), dtype=np.int64)
        acc[visited] += values[visited]
        support += visited
    if acc is None:
        raise ValueError("expected_matrix needs at least one log")
    values = np.zeros_like(acc)
    seen = support > 0
    values[seen] = acc[seen] / support[seen, None]
    return ExpectedActivity(values=values, support=support)


def decode_location(log, expected: ExpectedActivity, layout: MazeLayout):
    """Nearest-template prediction for every bin the test trial visited.

    Returns (actual, predicted, errors): corridor-bin indices plus the
    centre-to-centre distance in bin units. Ties go to the lowest bin
    index; template rows without support never win.
    """
    ok = expected.support > 0
    if not ok.any():
        raise NoSupportError("expected matrix has no bins with support")
    bins, _ = corridor_bins_of(layout)
    grid = layout.grid()
    values, visited = bin_activity_matrix(log, layout)
    actual = np.nonzero(visited)[0]
    rows = np.nonzero(ok)[0]
    d2 = ((values[actual][:, None, :]
           - expected.values[rows][None, :, :]) ** 2).sum(axis=2)
    predicted = rows[d2.argmin(axis=1)]
    errors = np.array([grid.bin_distance(bins[a], bins[p])
                       for a, p in zip(actual, predicted)])
    return actual, predicted, errors


@dataclass
class SpatialSummary:
    fraction_exact: float
    mean_error: float
    n_scored: int
    bin_mean_error: np.ndarray  # (bins,) nan where never scored
    bin_counts: np.ndarray


def spatial_decoding_report(agent_logs, layout: MazeLayout,
                            build_count: int = 15) -> SpatialSummary:
    """Pooled decoding accuracy over agents, split build/test by trial index.

    agent_logs is a sequence of per-agent log lists; the first build_count
    logs of each agent build its templates, the rest are scored.
    """
    bins, _ = corridor_bins_of(layout)
    err_sum = np.zeros(len(bins))
    counts = np.zeros(len(bins), dtype=np.int64)
    exact = scored = 0
    total_err = 0.0
    for logs in agent_logs:
        if len(logs) <= build_count:
            raise ValueError(f"need more than {build_count} logs per agent, "
                             f"got {len(logs)}")
        expected = expected_matrix(logs[:build_count], layout)
        for log in logs[build_count:]:
            actual, _, errors = decode_location(log, expected, layout)
            scored += errors.size
            exact += int((errors == 0.0).sum())
            total_err += float(errors.sum())
            np.add.at(err_sum, actual, errors)
            np.add.at(counts, actual, 1)
    bin_mean = np.full(len(bins), math.nan)
    seen = counts > 0
    bin_mean[seen] = err_sum[seen] / counts[seen]
    return SpatialSummary(
        fraction_exact=exact / scored if scored else math.nan,
        mean_error=total_err / scored if scored else math.nan,
        n_scored=scored, bin_mean_error=bin_mean, bin_counts=counts,
    )


# ---------------------------------------------------------------------------
# segment traversals and path decoding


def path_visit_events(log):
    """(step, path_id) for every arm visit, rewarded or repeated."""
    out = []
    for t, tag in log.events:
        if tag.startswith("reward:") or tag.startswith("repeat:"):
            out.append((t, int(tag.split(":", 1)[1])))
    return out


def segment_traversals(log, segment: SegmentRegion):
    """Maximal runs of consecutive steps inside the segment rectangle,
    as (start, stop) step ranges with stop exclusive."""
    x1, y1, x2, y2 = segment.rect
    xs = log.positions[:, 0]
    ys = log.positions[:, 1]
    inside = (x1 <= xs) & (xs <= x2) & (y1 <= ys) & (ys <= y2)
    runs = []
    t = 0
    n = inside.size
    while t < n:
        if inside[t]:
            start = t
            while t < n and inside[t]:
                t += 1
            runs.append((start, t))
        else:
            t += 1
    return runs


def traversal_label(events, start: int, stop: int, mode: str):
    """Path id the traversal leads to (prospective) or came from
    (retrospective); None when the log carries no such visit."""
    if mode == "prospective":
        after = [p for t, p in events if t >= stop]
        return after[0] if after else None
    if mode == "retrospective":
        before = [p for t, p in events if t < start]
        return before[-1] if before else None
    raise ValueError(f"unknown segment mode {mode!r}")


def _segment_bins(layout: MazeLayout, segment: SegmentRegion):
    bins, _ = corridor_bins_of(layout)
    grid = layout.grid()
    x1, y1, x2, y2 = segment.rect
    keep = []
    for i, b in enumerate(bins):
        x, y = grid.center(*b)
        if x1 <= x <= x2 and y1 <= y <= y2:
            keep.append(i)
    return [bins[i] for i in keep]


def _traversal_matrix(log, layout, seg_bins, start, stop):
    """Per-bin mean activity over one traversal, restricted to the
    segment's bins: (bins x neurons, visited mask)."""
    lut = {b: i for i, b in enumerate(seg_bins)}
    cells = layout.grid().bins_of(log.positions[start:stop, :2])
    acc = np.zeros((len(seg_bins), log.states.shape[1]))
    cnt = np.zeros(len(seg_bins))
    for k in range(stop - start):
        i = lut.get((int(cells[k, 0]), int(cells[k, 1])))
        if i is not None:
            acc[i] += log.states[start + k]
            cnt[i] += 1.0
    visited = cnt > 0
    values = np.zeros_like(acc)
    values[visited] = acc[visited] / cnt[visited, None]
    return values, visited


@dataclass
class SegmentTemplate:
    name: str
    mode: str
    classes: tuple
    bins: list                # (col, row) cells of the segment
    values: np.ndarray        # (classes, bins, neurons)
    support: np.ndarray       # (classes, bins) traversal counts


def build_segment_templates(logs, layout: MazeLayout, segments=None) -> dict:
    """Per-class mean segment activity from labelled build traversals."""
    if segments is None:
        segments = layout.segments
    templates = {}
    for seg in segments:
        seg_bins = _segment_bins(layout, seg)
        n_cls = len(seg.classes)
        cls_index = {c: i for i, c in enumerate(seg.classes)}
        acc = None
        support = np.zeros((n_cls, len(seg_bins)), dtype=np.int64)
        for log in logs:
            events = path_visit_events(log)
            for start, stop in segment_traversals(log, seg):
                label = traversal_label(events, start, stop, seg.mode)
                if label not in cls_index:
                    continue
                values, visited = _traversal_matrix(log, layout, seg_bins,
                                                    start, stop)
                if acc is None:
                    acc = np.zeros((n_cls,) + values.shape)
                c = cls_index[label]
                acc[c][visited] += values[visited]
                support[c] += visited
        if acc is None:
            acc = np.zeros((n_cls, len(seg_bins), 1))
        values = np.zeros_like(acc)
        seen = support > 0
        values[seen] = acc[seen] / support[seen][:, None]
        templates[seg.name] = SegmentTemplate(
            name=seg.name, mode=seg.mode, classes=seg.classes, bins=seg_bins,
            values=values, support=support,
        )
    return templates


def decode_traversal(template: SegmentTemplate, values, visited,
                     layout: MazeLayout):
    """Predicted class index for one traversal plus its per-bin errors.

    The class minimizing the mean activity distance over the traversal's
    visited bins wins (ties to the earlier class); per-bin errors measure,
    within the winning class, how many bin units the nearest template bin
    sits from the bin actually occupied.
    """
    if not visited.any():
        raise EmptyTraversalError("traversal never entered the segment bins")
    scores = np.full(len(template.classes), math.inf)
    for c in range(len(template.classes)):
        usable = visited & (template.support[c] > 0)
        if not usable.any():
            continue
        d = np.linalg.norm(values[usable] - template.values[c][usable],
                           axis=1)
        scores[c] = float(d.mean())
    if not np.isfinite(scores).any():
        raise NoSupportError(f"{template.name}: no template support for "
                             "this traversal's bins")
    pred = int(scores.argmin())
    grid = layout.grid()
    rows = np.nonzero(template.support[pred] > 0)[0]
    errors = []
    for b in np.nonzero(visited)[0]:
        d = np.linalg.norm(template.values[pred][rows] - values[b], axis=1)
        j = int(rows[d.argmin()])
        errors.append(grid.bin_distance(template.bins[b], template.bins[j]))
    return pred, errors


@dataclass
class TrajectoryResult:
    name: str
    mode: str
    classes: tuple
    total: int
    correct: int
    fraction: float
    chance: float
    mean_bin_error: float


def trajectory_decode(test_logs, templates: dict, layout: MazeLayout) -> dict:
    """Score every labelled test traversal against the class templates."""
    results = {}
    for name, tmpl in templates.items():
        seg = layout.segment_by_name(name)
        cls_index = {c: i for i, c in enumerate(tmpl.classes)}
        total = correct = 0
        errors = []
        for log in test_logs:
            events = path_visit_events(log)
            for start, stop in segment_traversals(log, seg):
                label = traversal_label(events, start, stop, seg.mode)
                if label not in cls_index:
                    continue
                values, visited = _traversal_matrix(log, layout, tmpl.bins,
                                                    start, stop)
                if not visited.any():
                    continue
                try:
                    pred, errs = decode_traversal(tmpl, values, visited,
                                                  layout)
                except NoSupportError:
                    continue
                total += 1
                correct += pred == cls_index[label]
                errors.extend(errs)
        results[name] = TrajectoryResult(
            name=name, mode=tmpl.mode, classes=tmpl.classes, total=total,
            correct=correct,
            fraction=correct / total if total else math.nan,
            chance=1.0 / len(tmpl.classes),
            mean_bin_error=float(np.mean(errors)) if errors else math.nan,
        )
    return results


# ---------------------------------------------------------------------------
# path transitions


def transition_matrix(logs, n_paths: int = 4, threshold: float = EDGE_THRESHOLD):
    """Row-stochastic matrix of consecutive arm-visit transitions.

    Returns (matrix, zero_rows, edges): rows with no outgoing transitions
    stay all-zero and are flagged; edges lists (from_path, to_path, p) for
    probabilities strictly above the threshold, in 1-based path ids.
    """
    counts = np.zeros((n_paths, n_paths))
    for log in logs:
        visits = [p for _, p in path_visit_events(log)]
        for a, b in zip(visits, visits[1:]):
            counts[a - 1, b - 1] += 1.0
    totals = counts.sum(axis=1)
    zero_rows = totals == 0
    matrix = np.zeros_like(counts)
    matrix[~zero_rows] = counts[~zero_rows] / totals[~zero_rows, None]
    edges = [(i + 1, j + 1, float(matrix[i, j]))
             for i in range(n_paths) for j in range(n_paths)
             if matrix[i, j] > threshold]
    return matrix, zero_rows, edges


# ---------------------------------------------------------------------------
# lesion battery


@dataclass
class AblationRow:
    name: str
    mean_fitness: float
    ci_fitness: float      # 95% normal-approximation half-width
    mean_steps: float
    ci_steps: float
    p_vs_none: float       # nan for the unablated row
    significant: bool      # p below 0.01/6


def _ci_half_width(sample: np.ndarray) -> float:
    if sample.size < 2:
        return 0.0
    return float(1.96 * sample.std(ddof=1) / math.sqrt(sample.size))


def ablation_battery(genotype, layout: MazeLayout, master_seed: int,
                     trials: int = 20, max_steps: int = 5000,
                     ablations=ABLATIONS, alpha: float = SIGNIFICANCE):
    """Fitness under each lesion over independently seeded trials.

    Every lesion (and the unablated baseline) runs the same number of
    trials; each non-baseline row carries a rank-sum p-value against the
    baseline fitness sample, flagged at the alpha level (0.01/6 by
    default). Comparisons with no rank information come back with p = nan,
    never as significant.
    """
    params = TrialParams(max_steps=max_steps)
    fits = {}
    steps = {}
    for s, name in enumerate(ablations):
        runner = TrialRunner(layout, params=params, ablation=name)
        ctrl = RNNController(np.array(genotype, dtype=np.float64))
        f = np.empty(trials)
        n = np.empty(trials)
        for k in range(trials):
            res = runner.run(ctrl, rng_for(master_seed, STREAM_BATTERY, s, k))
            f[k] = res.fitness
            n[k] = res.steps
        fits[name] = f
        steps[name] = n
    rows = []
    for name in ablations:
        if name == "none":
            p = math.nan
        else:
            try:
                p = rank_sum_test(fits[name], fits["none"])
            except DegenerateSamplesError:
                p = math.nan
        rows.append(AblationRow(
            name=name,
            mean_fitness=float(fits[name].mean()),
            ci_fitness=_ci_half_width(fits[name]),
            mean_steps=float(steps[name].mean()),
            ci_steps=_ci_half_width(steps[name]),
            p_vs_none=p,
            significant=bool(p < alpha),
        ))
    return rows


# ---------------------------------------------------------------------------
# report files


def _open_report(path: str, comment):
    f = open(path, "w")
    if comment:
        f.write(f"# {comment}\n")
    return f


def save_bin_error_map(summary: SpatialSummary, layout: MazeLayout,
                       path: str, comment=None) -> None:
    bins, _ = corridor_bins_of(layout)
    with _open_report(path, comment) as f:
        f.write("col,row,mean_error,count\n")
        for i, (c, r) in enumerate(bins):
            if summary.bin_counts[i]:
                f.write(f"{c},{r},{summary.bin_mean_error[i]!r},"
                        f"{int(summary.bin_counts[i])}\n")


def save_decoding_summary(summary: SpatialSummary, path: str,
                          comment=None) -> None:
    with _open_report(path, comment) as f:
        f.write("fraction_exact,mean_error,n_scored\n")
        f.write(f"{summary.fraction_exact!r},{summary.mean_error!r},"
                f"{summary.n_scored}\n")


def save_trajectory_report(results: dict, path: str, comment=None) -> None:
    with _open_report(path, comment) as f:
        f.write("segment,mode,classes,total,correct,fraction,chance,"
                "mean_bin_error\n")
        for name in sorted(results):
            r = results[name]
            cls = ";".join(str(c) for c in r.classes)
            f.write(f"{r.name},{r.mode},{cls},{r.total},{r.correct},"
                    f"{r.fraction!r},{r.chance!r},{r.mean_bin_error!r}\n")


def save_ablation_table(rows, path: str, comment=None) -> None:
    with _open_report(path, comment) as f:
        f.write("ablation,mean_fitness,ci_fitness,mean_steps,ci_steps,"
                "p_vs_none,significant\n")
        for r in rows:
            f.write(f"{r.name},{r.mean_fitness!r},{r.ci_fitness!r},"
                    f"{r.mean_steps!r},{r.ci_steps!r},{r.p_vs_none!r},"
                    f"{int(r.significant)}\n")


def save_transition_report(matrix, zero_rows, edges, path: str,
                           comment=None) -> None:
    n = matrix.shape[0]
    with _open_report(path, comment) as f:
        f.write("from_path," + ",".join(f"to_{j + 1}" for j in range(n))
                + ",zero_row\n")
        for i in range(n):
            row = ",".join(repr(float(v)) for v in matrix[i])
            f.write(f"{i + 1},{row},{int(zero_rows[i])}\n")
        f.write("edges\n")
        f.write("from_path,to_path,probability\n")
        for i, j, p in edges:
            f.write(f"{i},{j},{p!r}\n")
