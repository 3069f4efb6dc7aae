"""Rank-correlation machinery for comparing validators against accuracy.

The weighted Spearman correlation (WSC) is a weighted Pearson correlation of
weighted ranks, where sample weights grow quadratically with a sample's dense
rank in either the score series or the accuracy series. Checkpoint selection
only ever keeps the top-scoring checkpoints, so mistakes near the top must
cost more than mistakes in the bulk; plain Spearman treats all samples
equally. Correlations are reported on the x100 scale.

Also here: cross-task aggregation, the average accuracy of each validator's
top-N training runs (AATN), and the noise-resilience experiment that compares
how stably WSC and AATN rank validators when accuracies are perturbed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .kernels import dense_rank

__all__ = [
    "DegenerateInputError",
    "quadratic_weights",
    "weighted_ranks",
    "weighted_pearson",
    "weighted_spearman",
    "spearman",
    "TaskAverage",
    "avg_wsc_across_tasks",
    "aatn",
    "ScoreTable",
    "wsc_per_task",
    "wsc_summary",
    "aatn_summary",
    "NoisePoint",
    "noise_resilience",
]

_VARIANCE_FLOOR = 1e-24


class DegenerateInputError(ValueError):
    """A series has too few samples or zero variance to be correlated."""


def quadratic_weights(scores: np.ndarray, accuracies: np.ndarray) -> np.ndarray:
    """Per-sample weights max(rank_score, rank_accuracy)^2, ranks scaled to (0, 1].

    Dense ranks are divided by the maximum rank of their series, so the
    sample(s) holding the top rank in either series get weight exactly 1.
    """
    v = np.asarray(scores, dtype=np.float64)
    a = np.asarray(accuracies, dtype=np.float64)
    if v.shape != a.shape:
        raise ValueError("scores and accuracies differ in length")
    rv = dense_rank(v)
    ra = dense_rank(a)
    wv = rv / rv.max()
    wa = ra / ra.max()
    return np.maximum(wv, wa) ** 2


def weighted_ranks(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted rank of each value.

    rank_i = (sum of weights of strictly lower-ranked samples)
           + (t + 1) / 2 * (mean weight of sample i's tie group)

    where t is the tie-group size and ties come from dense ranks. With unit
    weights this reduces exactly to classic average ranks.
    """
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.shape != w.shape:
        raise ValueError("values and weights differ in length")
    ranks = dense_rank(v)  # 1..m
    group_w = np.bincount(ranks, weights=w)[1:]  # summed weight per rank
    group_n = np.bincount(ranks)[1:].astype(np.float64)
    below = np.concatenate([[0.0], np.cumsum(group_w)[:-1]])
    a = below[ranks - 1]
    t = group_n[ranks - 1]
    mean_w = group_w[ranks - 1] / t
    return a + (t + 1.0) / 2.0 * mean_w


def weighted_pearson(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Weighted Pearson correlation in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    wsum = w.sum()
    dx = x - (w * x).sum() / wsum
    dy = y - (w * y).sum() / wsum
    vx = (w * dx * dx).sum()
    vy = (w * dy * dy).sum()
    if vx < _VARIANCE_FLOOR or vy < _VARIANCE_FLOOR:
        raise DegenerateInputError("zero weighted variance")
    return float((w * dx * dy).sum() / np.sqrt(vx * vy))


def _check_series(v: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if v.shape != a.shape or v.ndim != 1:
        raise ValueError("series must be 1-D and equal length")
    if v.size < 3:
        raise DegenerateInputError(f"need at least 3 samples, got {v.size}")
    if np.unique(v).size < 2 or np.unique(a).size < 2:
        raise DegenerateInputError("a series is constant")
    return v, a


def weighted_spearman(scores: np.ndarray, accuracies: np.ndarray) -> float:
    """Weighted Spearman correlation on the x100 scale."""
    v, a = _check_series(scores, accuracies)
    w = quadratic_weights(v, a)
    x = weighted_ranks(v, w)
    y = weighted_ranks(a, w)
    return 100.0 * weighted_pearson(x, y, w)


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Classic Spearman correlation (average ranks for ties), x100."""
    x, y = _check_series(x, y)
    rx = rankdata(x, method="average")
    ry = rankdata(y, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = (dx * dx).sum()
    vy = (dy * dy).sum()
    if vx < _VARIANCE_FLOOR or vy < _VARIANCE_FLOOR:
        raise DegenerateInputError("zero rank variance")
    return float(100.0 * (dx * dy).sum() / np.sqrt(vx * vy))


@dataclass(frozen=True)
class TaskAverage:
    mean: float
    std: float  # sample std across tasks; 0 (flagged) for a single task
    per_task: tuple[float, ...]
    excluded: tuple[tuple[int, str], ...]  # (task position, reason)
    single_task: bool


def avg_wsc_across_tasks(
    per_task: Sequence[tuple[np.ndarray, np.ndarray]]
) -> TaskAverage:
    """Unweighted mean (and sample std) of per-task WSC values.

    Degenerate tasks are excluded from the average and reported, never
    silently scored.
    """
    if len(per_task) < 1:
        raise ValueError("need at least one task")
    values: list[float] = []
    excluded: list[tuple[int, str]] = []
    for i, (scores, accs) in enumerate(per_task):
        try:
            values.append(weighted_spearman(scores, accs))
        except DegenerateInputError as exc:
            excluded.append((i, str(exc)))
    if not values:
        raise DegenerateInputError("every task was degenerate")
    arr = np.asarray(values)
    single = arr.size == 1
    return TaskAverage(
        mean=float(arr.mean()),
        std=0.0 if single else float(arr.std(ddof=1)),
        per_task=tuple(values),
        excluded=tuple(excluded),
        single_task=single,
    )


def aatn(
    run_scores: Sequence[np.ndarray],
    run_accuracies: Sequence[np.ndarray],
    n: int,
) -> float:
    """Average accuracy of the checkpoints selected in the top-n training runs.

    Per run, the selected checkpoint is the (first) highest oriented score.
    Runs are ordered by their best score, descending with a stable sort, and
    the mean target accuracy of the top n selections is returned.
    """
    if len(run_scores) != len(run_accuracies):
        raise ValueError("run scores and accuracies differ in length")
    if n < 1 or n > len(run_scores):
        raise ValueError(f"n={n} out of range for {len(run_scores)} runs")
    best_scores = np.empty(len(run_scores))
    picked_acc = np.empty(len(run_scores))
    for i, (scores, accs) in enumerate(zip(run_scores, run_accuracies)):
        scores = np.asarray(scores, dtype=np.float64)
        accs = np.asarray(accs, dtype=np.float64)
        if scores.size < 1 or scores.shape != accs.shape:
            raise ValueError(f"run {i} is empty or mismatched")
        j = int(np.argmax(scores))  # first occurrence on ties
        best_scores[i] = scores[j]
        picked_acc[i] = accs[j]
    order = np.argsort(-best_scores, kind="stable")
    return float(picked_acc[order[:n]].mean())


@dataclass(frozen=True)
class ScoreTable:
    """Oriented scores for every (checkpoint, variant) plus oracle accuracies.

    Rows are checkpoints in deterministic (task, run, index) order; NaN marks
    a variant that errored on that checkpoint.
    """

    variant_names: tuple[str, ...]
    task_ids: np.ndarray  # (rows,) str
    algorithms: np.ndarray  # (rows,) str
    run_ids: np.ndarray  # (rows,) int
    checkpoint_indices: np.ndarray  # (rows,) int
    oriented: np.ndarray  # (rows, variants) float, NaN = error
    accuracies: np.ndarray  # (rows,) float

    def __post_init__(self) -> None:
        rows = self.task_ids.shape[0]
        if self.oriented.shape != (rows, len(self.variant_names)):
            raise ValueError("oriented score matrix shape mismatch")
        if self.accuracies.shape != (rows,):
            raise ValueError("accuracy vector shape mismatch")

    @property
    def tasks(self) -> list[str]:
        seen: dict[str, None] = {}
        for t in self.task_ids:
            seen.setdefault(str(t), None)
        return list(seen)

    def task_mask(self, task: str) -> np.ndarray:
        return self.task_ids == task


def _series_for(
    table: ScoreTable, mask: np.ndarray, column: int, accuracies: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    scores = table.oriented[mask, column]
    accs = accuracies[mask]
    ok = np.isfinite(scores)
    return scores[ok], accs[ok]


def wsc_per_task(
    table: ScoreTable, accuracies: np.ndarray | None = None
) -> list[tuple[str, str, float | None, str | None]]:
    """Rows (task, variant, wsc, error) for every task/variant pair."""
    accuracies = table.accuracies if accuracies is None else accuracies
    rows: list[tuple[str, str, float | None, str | None]] = []
    for task in table.tasks:
        mask = table.task_mask(task)
        for col, name in enumerate(table.variant_names):
            scores, accs = _series_for(table, mask, col, accuracies)
            try:
                rows.append((task, name, weighted_spearman(scores, accs), None))
            except DegenerateInputError as exc:
                rows.append((task, name, None, str(exc)))
    return rows


def wsc_summary(
    table: ScoreTable, accuracies: np.ndarray | None = None
) -> dict[str, tuple[float, float, int]]:
    """Per variant: (mean WSC across tasks, sample std, number of tasks used)."""
    per_task = wsc_per_task(table, accuracies)
    by_variant: dict[str, list[float]] = {name: [] for name in table.variant_names}
    for _, name, value, error in per_task:
        if error is None:
            by_variant[name].append(value)
    out: dict[str, tuple[float, float, int]] = {}
    for name, values in by_variant.items():
        if not values:
            continue
        arr = np.asarray(values)
        std = 0.0 if arr.size == 1 else float(arr.std(ddof=1))
        out[name] = (float(arr.mean()), std, arr.size)
    return out


def wsc_by_algorithm(
    table: ScoreTable, accuracies: np.ndarray | None = None
) -> dict[tuple[str, str], tuple[float, int]]:
    """Per (algorithm, variant): mean WSC across tasks over that algorithm's checkpoints."""
    accuracies = table.accuracies if accuracies is None else accuracies
    out: dict[tuple[str, str], tuple[float, int]] = {}
    algorithms = sorted(set(str(a) for a in table.algorithms))
    for algorithm in algorithms:
        algo_mask = table.algorithms == algorithm
        for col, name in enumerate(table.variant_names):
            values = []
            for task in table.tasks:
                mask = algo_mask & table.task_mask(task)
                if not mask.any():
                    continue
                scores, accs = _series_for(table, mask, col, accuracies)
                try:
                    values.append(weighted_spearman(scores, accs))
                except DegenerateInputError:
                    continue
            if values:
                out[(algorithm, name)] = (float(np.mean(values)), len(values))
    return out


def _runs_of(
    table: ScoreTable, mask: np.ndarray, column: int | None, accuracies: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    run_scores: list[np.ndarray] = []
    run_accs: list[np.ndarray] = []
    rows = np.flatnonzero(mask)
    run_ids = table.run_ids[rows]
    for run in np.unique(run_ids):
        sel = rows[run_ids == run]
        accs = accuracies[sel]
        scores = accs if column is None else table.oriented[sel, column]
        ok = np.isfinite(scores)
        if not ok.any():
            continue
        run_scores.append(scores[ok])
        run_accs.append(accs[ok])
    return run_scores, run_accs


def aatn_summary(
    table: ScoreTable, n: int, accuracies: np.ndarray | None = None
) -> dict[tuple[str, str], tuple[float, float]]:
    """Per (algorithm, variant): (mean AATN across tasks, oracle AATN to compare).

    The oracle selects by true accuracy, so its AATN dominates every variant;
    the difference (variant - oracle) is the accuracy given up by trusting the
    validator.
    """
    accuracies = table.accuracies if accuracies is None else accuracies
    out: dict[tuple[str, str], tuple[float, float]] = {}
    algorithms = sorted(set(str(a) for a in table.algorithms))
    for algorithm in algorithms:
        algo_mask = table.algorithms == algorithm
        oracle_vals: dict[str, float] = {}
        for task in table.tasks:
            mask = algo_mask & table.task_mask(task)
            if not mask.any():
                continue
            run_scores, run_accs = _runs_of(table, mask, None, accuracies)
            if len(run_scores) >= n:
                oracle_vals[task] = aatn(run_scores, run_accs, n)
        for col, name in enumerate(table.variant_names):
            values = []
            oracle_used = []
            for task, oracle_value in oracle_vals.items():
                mask = algo_mask & table.task_mask(task)
                run_scores, run_accs = _runs_of(table, mask, col, accuracies)
                if len(run_scores) < n:
                    continue
                values.append(aatn(run_scores, run_accs, n))
                oracle_used.append(oracle_value)
            if values:
                out[(algorithm, name)] = (float(np.mean(values)), float(np.mean(oracle_used)))
    return out


def _aggregate_vectors(
    table: ScoreTable, n_for_aatn: int, accuracies: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-variant (avg WSC, avg AATN) aggregates; NaN where undefined."""
    n_var = len(table.variant_names)
    wsc_vec = np.full(n_var, np.nan)
    summary = wsc_summary(table, accuracies)
    for col, name in enumerate(table.variant_names):
        if name in summary:
            wsc_vec[col] = summary[name][0]
    aatn_vec = np.full(n_var, np.nan)
    by_algo = aatn_summary(table, n_for_aatn, accuracies)
    per_variant: dict[str, list[float]] = {}
    for (_, name), (value, _) in by_algo.items():
        per_variant.setdefault(name, []).append(value)
    for col, name in enumerate(table.variant_names):
        if name in per_variant:
            aatn_vec[col] = float(np.mean(per_variant[name]))
    return wsc_vec, aatn_vec


@dataclass(frozen=True)
class NoisePoint:
    sigma: float
    metric: str  # "WSC" or "AATN-<n>"
    mean_correlation: float  # in [-1, 1]
    std_correlation: float
    seeds_used: int
    error: str | None = None


def noise_resilience(
    table: ScoreTable,
    sigmas: Sequence[float],
    seeds: Sequence[int],
    n_for_aatn: int,
) -> list[NoisePoint]:
    """How stably WSC and AATN rank validators under accuracy noise.

    For each sigma (in accuracy percentage points) and seed, Gaussian noise is
    added to the accuracies, each validator's aggregate (avg WSC across tasks;
    avg AATN) is recomputed, and the Spearman correlation between the noisy
    and noiseless validator rankings is recorded. Each seed draws one noise
    vector reused across sigmas, scaled by sigma, so curves share randomness.
    """
    if len(table.variant_names) < 2:
        raise ValueError("noise resilience needs at least 2 validator variants")
    base_wsc, base_aatn = _aggregate_vectors(table, n_for_aatn, table.accuracies)
    results: list[NoisePoint] = []
    metric_specs = [("WSC", base_wsc, 0), (f"AATN-{n_for_aatn}", base_aatn, 1)]
    noise_draws = {
        seed: np.random.default_rng((int(seed),)).standard_normal(table.accuracies.shape[0])
        for seed in seeds
    }
    for sigma in sigmas:
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        per_metric: dict[str, list[float]] = {name: [] for name, _, _ in metric_specs}
        failures: dict[str, int] = {name: 0 for name, _, _ in metric_specs}
        for seed in seeds:
            noisy = table.accuracies + (sigma / 100.0) * noise_draws[seed]
            noisy_wsc, noisy_aatn = _aggregate_vectors(table, n_for_aatn, noisy)
            for name, base_vec, which in metric_specs:
                noisy_vec = noisy_wsc if which == 0 else noisy_aatn
                ok = np.isfinite(base_vec) & np.isfinite(noisy_vec)
                try:
                    if ok.sum() < 3:
                        raise DegenerateInputError("too few variants with defined aggregates")
                    per_metric[name].append(spearman(base_vec[ok], noisy_vec[ok]) / 100.0)
                except DegenerateInputError:
                    failures[name] += 1
        for name, _, _ in metric_specs:
            values = per_metric[name]
            if values:
                arr = np.asarray(values)
                std = 0.0 if arr.size == 1 else float(arr.std(ddof=1))
                error = None
                if failures[name]:
                    error = f"{failures[name]} of {len(seeds)} seeds degenerate"
                results.append(NoisePoint(float(sigma), name, float(arr.mean()), std, arr.size, error))
            else:
                results.append(
                    NoisePoint(float(sigma), name, float("nan"), float("nan"), 0,
                               "all seeds produced degenerate rankings")
                )
    return results
