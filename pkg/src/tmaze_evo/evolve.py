"""Generational evolution of controller genotypes.

Selection is linear ranking over per-genotype mean fitness, reproduction
is two-point crossover followed by per-gene Gaussian mutation whose
standard deviation decays with the generation index. The top slice of
each generation is copied unchanged into the next (elitism) and by
default keeps its stored fitness instead of being re-evaluated.

Every random draw derives from (master_seed, stream, *indices) keys:
trial seeds depend only on (generation, slot, trial), so parallel
evaluation reproduces serial runs bit for bit, and a run can resume from
any generation checkpoint with an identical continuation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointCorruptError, ConfigError
from .maze import MazeLayout, layout_text
from .rnn import GENOTYPE_HEADER, GENOTYPE_LEN, RNNController, RY_LEN
from .seeds import STREAM_INIT, STREAM_REPRO, STREAM_TRIAL, rng_for
from .world import TrialParams, TrialRunner

FREEZE_CHOICES = ("none", "evolve-output-only")

CHECKPOINT_HEADER = "tmaze-checkpoint v1"

HISTORY_COLUMNS = ("generation", "best_so_far_fitness", "mean_fitness",
                   "best_elapsed_steps")


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 50
    generations: int = 200
    trials_per_genotype: int = 5
    elite_fraction: float = 0.10
    mutation_rate: float = 0.06
    mutation_std_base: float = 0.3
    mutation_std_halflife: float = 50.0
    init_std: float = 0.3
    master_seed: int = 0
    max_steps: int = 5000
    reevaluate_elites: bool = False
    freeze_mask: str = "none"
    stop_at_fitness: float | None = None

    def validate(self) -> None:
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if self.generations < 1:
            raise ConfigError("generations must be at least 1")
        if self.trials_per_genotype < 1:
            raise ConfigError("trials_per_genotype must be at least 1")
        if not 0.0 <= self.elite_fraction <= 1.0:
            raise ConfigError("elite_fraction must lie in [0, 1]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if self.mutation_std_base < 0.0:
            raise ConfigError("mutation_std_base must be non-negative")
        if self.mutation_std_halflife <= 0.0:
            raise ConfigError("mutation_std_halflife must be positive")
        if self.init_std < 0.0:
            raise ConfigError("init_std must be non-negative")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if self.freeze_mask not in FREEZE_CHOICES:
            raise ConfigError(f"freeze_mask must be one of {FREEZE_CHOICES}, "
                              f"got {self.freeze_mask!r}")
        if elite_count(self) < 1:
            raise ConfigError("elite fraction rounds to zero elites")
        if elite_count(self) >= self.population_size:
            raise ConfigError("elite count must leave room for children")


@dataclass
class GenerationRecord:
    generation: int
    fitness: np.ndarray        # per-genotype mean over trials
    trial_fitness: np.ndarray  # (population, trials)
    trial_steps: np.ndarray    # (population, trials)
    mean_fitness: float
    best_so_far_fitness: float
    best_so_far_id: tuple      # (generation, slot) of the best genotype
    best_so_far_steps: float   # mean trial length when it was evaluated


def elite_count(cfg: EvolutionConfig) -> int:
    # round half up, so 10% of 50 is exactly 5
    return int(math.floor(cfg.elite_fraction * cfg.population_size + 0.5))


def mutation_std(m: int, base: float = 0.3, halflife: float = 50.0) -> float:
    """Mutation standard deviation for broods made by generation m."""
    return base * halflife / (halflife + m)


def frozen_gene_mask(freeze_mask: str) -> np.ndarray | None:
    """Boolean mask of genes reproduction must not alter, or None."""
    if freeze_mask == "none":
        return None
    if freeze_mask == "evolve-output-only":
        frozen = np.ones(GENOTYPE_LEN, dtype=bool)
        frozen[GENOTYPE_LEN - RY_LEN:] = False
        return frozen
    raise ConfigError(f"unknown freeze_mask {freeze_mask!r}")


def selection_weights(fitness) -> np.ndarray:
    """Per-index selection probability under linear ranking.

    Rank 1 is the worst individual and rank N the best; ties rank the
    lower index worse. Probability of rank r is r / sum(1..N).
    """
    f = np.asarray(fitness, dtype=np.float64)
    order = np.lexsort((np.arange(f.size), f))
    w = np.empty(f.size)
    w[order] = np.arange(1, f.size + 1)
    return w / w.sum()


def _pick(cum_weights: np.ndarray, rng: np.random.Generator) -> int:
    k = int(np.searchsorted(cum_weights, rng.random(), side="right"))
    return min(k, cum_weights.size - 1)


def linear_ranking_select(fitness, rng: np.random.Generator) -> int:
    return _pick(np.cumsum(selection_weights(fitness)), rng)


def two_point_crossover(a: np.ndarray, b: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """Child = a outside [i, j), b inside, with i <= j drawn over [0, len]."""
    i, j = np.sort(rng.integers(0, a.size + 1, size=2))
    child = a.copy()
    child[i:j] = b[i:j]
    return child


def mutate(g: np.ndarray, rate: float, std: float, rng: np.random.Generator,
           frozen: np.ndarray | None = None) -> np.ndarray:
    # deltas are drawn for every gene so the stream advances identically
    # whatever the mask; frozen genes just discard theirs
    u = rng.random(g.size)
    delta = rng.normal(0.0, std, g.size)
    mask = u < rate
    if frozen is not None:
        mask &= ~frozen
    out = g.copy()
    out[mask] += delta[mask]
    return out


def init_population(cfg: EvolutionConfig) -> list:
    """Generation 0: Gaussian(0, init_std) genes, one shared frozen core."""
    rng = rng_for(cfg.master_seed, STREAM_INIT)
    frozen = frozen_gene_mask(cfg.freeze_mask)
    if frozen is None:
        return [rng.normal(0.0, cfg.init_std, GENOTYPE_LEN)
                for _ in range(cfg.population_size)]
    # individuals must share the frozen genes, or crossover would splice
    # unrelated cores together
    base = rng.normal(0.0, cfg.init_std, GENOTYPE_LEN)
    free = ~frozen
    pop = []
    for _ in range(cfg.population_size):
        g = base.copy()
        g[free] = rng.normal(0.0, cfg.init_std, int(free.sum()))
        pop.append(g)
    return pop


def evaluate_genotype(genotype, runner: TrialRunner, master_seed: int,
                      trials: int, generation: int, slot: int):
    """Mean fitness over independently seeded trials, plus per-trial records."""
    ctrl = RNNController(genotype)
    fits = np.empty(trials)
    steps = np.zeros(trials, dtype=np.int64)
    for k in range(trials):
        rng = rng_for(master_seed, STREAM_TRIAL, generation, slot, k)
        res = runner.run(ctrl, rng)
        fits[k] = res.fitness
        steps[k] = res.steps
    return float(fits.mean()), fits, steps


def config_hash(cfg: EvolutionConfig, layout: MazeLayout) -> str:
    h = hashlib.sha256()
    for f in sorted(dataclasses.fields(cfg), key=lambda f: f.name):
        h.update(f"{f.name}={getattr(cfg, f.name)!r}\n".encode())
    h.update(layout_text(layout).encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# parallel evaluation: workers hold one TrialRunner each; tasks carry the
# genotype plus its seed key, so map order is the only ordering that matters

_WORKER: dict = {}


def _worker_init(layout: MazeLayout, params: TrialParams) -> None:
    _WORKER["runner"] = TrialRunner(layout, params=params)


def _eval_task(task, runner: TrialRunner):
    master_seed, trials, generation, slot, genotype = task
    return evaluate_genotype(genotype, runner, master_seed, trials,
                             generation, slot)


def _worker_eval(task):
    return _eval_task(task, _WORKER["runner"])


# ---------------------------------------------------------------------------
# checkpoints


def _genotype_lines(g: np.ndarray) -> list:
    return [GENOTYPE_HEADER] + [repr(float(v)) for v in g]


def save_checkpoint(path: str, cfg_hash: str, record: GenerationRecord,
                    population, best_genotype: np.ndarray) -> None:
    n = len(population)
    lines = [
        CHECKPOINT_HEADER,
        f"config-hash {cfg_hash}",
        f"generation {record.generation}",
        f"population {n}",
        f"trials {record.trial_fitness.shape[1]}",
        f"best-so-far-fitness {record.best_so_far_fitness!r}",
        f"best-so-far-id {record.best_so_far_id[0]}:{record.best_so_far_id[1]}",
        f"best-so-far-steps {record.best_so_far_steps!r}",
        "fitness-table",
    ]
    for i in range(n):
        tf = ";".join(repr(float(v)) for v in record.trial_fitness[i])
        ts = ";".join(str(int(v)) for v in record.trial_steps[i])
        lines.append(f"{i},{float(record.fitness[i])!r},{tf},{ts}")
    lines.append("genotypes")
    for g in population:
        lines.extend(_genotype_lines(g))
    lines.append("best-genotype")
    lines.extend(_genotype_lines(best_genotype))
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode()).hexdigest()
    with open(path, "w") as f:
        f.write(body)
        f.write(f"state-hash {digest}\n")


def _parse_genotype_block(lines, at: int, path: str):
    if at >= len(lines) or lines[at] != GENOTYPE_HEADER:
        raise CheckpointCorruptError(f"{path}: expected genotype header at "
                                     f"line {at + 1}")
    block = lines[at + 1:at + 1 + GENOTYPE_LEN]
    if len(block) != GENOTYPE_LEN:
        raise CheckpointCorruptError(f"{path}: truncated genotype block")
    try:
        g = np.array([float(v) for v in block])
    except ValueError as e:
        raise CheckpointCorruptError(f"{path}: bad gene value ({e})") from None
    return g, at + 1 + GENOTYPE_LEN


def load_checkpoint(path: str):
    """Verified checkpoint state: (cfg_hash, record, population, best)."""
    with open(path) as f:
        text = f.read()
    lines = text.splitlines()
    if len(lines) < 2 or not lines[-1].startswith("state-hash "):
        raise CheckpointCorruptError(f"{path}: missing state-hash line")
    body = "\n".join(lines[:-1]) + "\n"
    if hashlib.sha256(body.encode()).hexdigest() != lines[-1].split()[-1]:
        raise CheckpointCorruptError(f"{path}: state hash mismatch")
    if lines[0] != CHECKPOINT_HEADER:
        raise CheckpointCorruptError(f"{path}: not a checkpoint file")

    def field(i, name):
        key, _, value = lines[i].partition(" ")
        if key != name:
            raise CheckpointCorruptError(f"{path}: expected {name!r} on "
                                         f"line {i + 1}")
        return value

    cfg_hash = field(1, "config-hash")
    generation = int(field(2, "generation"))
    n = int(field(3, "population"))
    trials = int(field(4, "trials"))
    best_fit = float(field(5, "best-so-far-fitness"))
    bg, _, bi = field(6, "best-so-far-id").partition(":")
    best_id = (int(bg), int(bi))
    best_steps = float(field(7, "best-so-far-steps"))
    if lines[8] != "fitness-table":
        raise CheckpointCorruptError(f"{path}: missing fitness table")
    fitness = np.empty(n)
    trial_fitness = np.empty((n, trials))
    trial_steps = np.zeros((n, trials), dtype=np.int64)
    for i in range(n):
        parts = lines[9 + i].split(",")
        if len(parts) != 4 or int(parts[0]) != i:
            raise CheckpointCorruptError(f"{path}: bad fitness row {i}")
        fitness[i] = float(parts[1])
        trial_fitness[i] = [float(v) for v in parts[2].split(";")]
        trial_steps[i] = [int(v) for v in parts[3].split(";")]
    at = 9 + n
    if lines[at] != "genotypes":
        raise CheckpointCorruptError(f"{path}: missing genotypes section")
    at += 1
    population = []
    for _ in range(n):
        g, at = _parse_genotype_block(lines, at, path)
        population.append(g)
    if lines[at] != "best-genotype":
        raise CheckpointCorruptError(f"{path}: missing best genotype")
    best_genotype, at = _parse_genotype_block(lines, at + 1, path)
    record = GenerationRecord(
        generation=generation, fitness=fitness, trial_fitness=trial_fitness,
        trial_steps=trial_steps, mean_fitness=float(fitness.mean()),
        best_so_far_fitness=best_fit, best_so_far_id=best_id,
        best_so_far_steps=best_steps,
    )
    return cfg_hash, record, population, best_genotype


def save_history(history, path: str, comment: str | None = None) -> None:
    with open(path, "w") as f:
        if comment:
            f.write(f"# {comment}\n")
        f.write(",".join(HISTORY_COLUMNS) + "\n")
        for rec in history:
            f.write(f"{rec.generation},{rec.best_so_far_fitness!r},"
                    f"{rec.mean_fitness!r},{rec.best_so_far_steps!r}\n")


# ---------------------------------------------------------------------------


def _next_generation(population, fitness, trial_fitness, trial_steps,
                     cfg: EvolutionConfig, m: int, frozen):
    """Elite copies plus ranked-crossover-mutate children, and the elite
    rows to carry into the next evaluation."""
    n = cfg.population_size
    e = elite_count(cfg)
    rng = rng_for(cfg.master_seed, STREAM_REPRO, m)
    order = np.lexsort((np.arange(n), -np.asarray(fitness)))
    elites = order[:e]
    cum = np.cumsum(selection_weights(fitness))
    std = mutation_std(m, cfg.mutation_std_base, cfg.mutation_std_halflife)
    new_pop = [population[i].copy() for i in elites]
    for _ in range(n - e):
        pa = population[_pick(cum, rng)]
        pb = population[_pick(cum, rng)]
        child = two_point_crossover(pa, pb, rng)
        new_pop.append(mutate(child, cfg.mutation_rate, std, rng, frozen))
    carry = (fitness[elites].copy(), trial_fitness[elites].copy(),
             trial_steps[elites].copy())
    return new_pop, carry


def run_evolution(layout: MazeLayout, cfg: EvolutionConfig,
                  checkpoint_dir: str | None = None, jobs: int = 1,
                  resume_from: str | None = None):
    """Evolve a population on one layout.

    Returns (history, best_genotype) where history holds one
    GenerationRecord per evaluated generation. With checkpoint_dir set, a
    verified checkpoint file is written after every generation. With
    resume_from set, the run continues after that checkpoint's generation
    and the returned history covers only the continuation; the config and
    layout must hash to the checkpoint's recorded value.
    """
    cfg.validate()
    frozen = frozen_gene_mask(cfg.freeze_mask)
    chash = config_hash(cfg, layout)
    params = TrialParams(max_steps=cfg.max_steps)
    if checkpoint_dir is not None:
        os.makedirs(checkpoint_dir, exist_ok=True)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init,
                                 initargs=(layout, params)) as ex:
            def mapper(tasks):
                chunk = max(1, len(tasks) // (jobs * 4))
                return list(ex.map(_worker_eval, tasks, chunksize=chunk))
            return _run_loop(layout, cfg, chash, frozen, mapper,
                             checkpoint_dir, resume_from)
    runner = TrialRunner(layout, params=params)

    def mapper(tasks):
        return [_eval_task(t, runner) for t in tasks]

    return _run_loop(layout, cfg, chash, frozen, mapper, checkpoint_dir,
                     resume_from)


def _run_loop(layout, cfg, chash, frozen, mapper, checkpoint_dir,
              resume_from):
    n = cfg.population_size
    trials = cfg.trials_per_genotype

    if resume_from is not None:
        saved_hash, rec, population, best_g = load_checkpoint(resume_from)
        if saved_hash != chash:
            raise CheckpointCorruptError(
                f"{resume_from}: checkpoint belongs to a different "
                "config/layout")
        if rec.trial_fitness.shape != (n, trials):
            raise CheckpointCorruptError(
                f"{resume_from}: population shape mismatch")
        best_fit = rec.best_so_far_fitness
        best_id = rec.best_so_far_id
        best_steps = rec.best_so_far_steps
        start = rec.generation + 1
        if start < cfg.generations:
            population, carry = _next_generation(
                population, rec.fitness, rec.trial_fitness, rec.trial_steps,
                cfg, rec.generation, frozen)
        else:
            carry = None
    else:
        population = init_population(cfg)
        carry = None
        best_fit = -math.inf
        best_id = (-1, -1)
        best_steps = float("nan")
        best_g = population[0]
        start = 0

    history = []
    for m in range(start, cfg.generations):
        fitness = np.empty(n)
        trial_fitness = np.empty((n, trials))
        trial_steps = np.zeros((n, trials), dtype=np.int64)
        skip = 0
        if carry is not None and not cfg.reevaluate_elites:
            skip = len(carry[0])
            fitness[:skip] = carry[0]
            trial_fitness[:skip] = carry[1]
            trial_steps[:skip] = carry[2]
        tasks = [(cfg.master_seed, trials, m, i, population[i])
                 for i in range(skip, n)]
        for i, (mf, tf, ts) in zip(range(skip, n), mapper(tasks)):
            fitness[i] = mf
            trial_fitness[i] = tf
            trial_steps[i] = ts

        top = int(np.lexsort((np.arange(n), -fitness))[0])
        if fitness[top] > best_fit:
            best_fit = float(fitness[top])
            best_id = (m, top)
            best_steps = float(trial_steps[top].mean())
            best_g = population[top].copy()
        record = GenerationRecord(
            generation=m, fitness=fitness, trial_fitness=trial_fitness,
            trial_steps=trial_steps, mean_fitness=float(fitness.mean()),
            best_so_far_fitness=best_fit, best_so_far_id=best_id,
            best_so_far_steps=best_steps,
        )
        history.append(record)
        if checkpoint_dir is not None:
            save_checkpoint(
                os.path.join(checkpoint_dir, f"checkpoint_gen{m:04d}.txt"),
                chash, record, population, best_g)
        if cfg.stop_at_fitness is not None and best_fit >= cfg.stop_at_fitness:
            break
        if m + 1 < cfg.generations:
            population, carry = _next_generation(
                population, fitness, trial_fitness, trial_steps, cfg, m,
                frozen)
    return history, best_g.copy()
