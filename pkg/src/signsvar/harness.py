"""Efficiency benchmarks on simulated systems and the two-algorithm equivalence study."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from .posterior import Minnesota, fit_posterior
from .restrictions import Restriction, RestrictionSet, check_assumptions
from .sampling import METHODS, DrawStats, Sampler, count_admissible, draw_many, stream
from .var import DgpSpec, InfeasibleDGPError, _draw_impact, compute_irf, simulate_dgp

DEFAULT_QUANTILES = (0.16, 0.5, 0.84)


class ConfigError(ValueError):
    pass


# --- schemes ---------------------------------------------------------------


def generate_scheme(b0: np.ndarray, m: int, count: int, ranking: int = 0,
                    dynamic: int = 0, params=None) -> RestrictionSet:
    """Restriction scheme read off a true impact matrix.

    Shock ``j`` gets sign restrictions on its first ``count // m`` variables
    (one more for the first ``count % m`` shocks), signed as in ``b0``.
    ``ranking`` adds single-shock rankings between variables 1 and 2 of the
    first shocks; ``dynamic`` adds horizon-1 sign restrictions on the first
    shock's leading variables, signed as the true responses.
    """
    n = b0.shape[0]
    base, extra = divmod(count, m)
    records = []
    for j in range(m):
        for i in range(min(n, base + (j < extra))):
            records.append(Restriction("sign", i, j, 1 if b0[i, j] >= 0 else -1))
    for j in range(min(ranking, m)):
        s = 1 if b0[0, j] - b0[1, j] >= 0 else -1
        records.append(Restriction("ranking", 0, j, s, 1, j, 1.0))
    if dynamic:
        if params is None:
            raise ValueError("dynamic restrictions need the true VAR parameters")
        f1 = compute_irf(params, b0, m, 1).values[:, 0, 1]
        for i in range(min(dynamic, n)):
            records.append(Restriction("sign", i, 0, 1 if f1[i] >= 0 else -1, horizon=1))
    return RestrictionSet(n, m, tuple(records))


def random_scheme(n: int, m: int, count: int, rng: np.random.Generator, attempts: int = 1000) -> RestrictionSet:
    """Sign scheme read off a random impact matrix, redrawn until the assumption check passes."""
    for _ in range(attempts):
        scheme = generate_scheme(_draw_impact(n, rng), m, count)
        if check_assumptions(scheme).holds:
            return scheme
    raise InfeasibleDGPError(f"no separable scheme with {count} restrictions for n={n}, m={m}")


@dataclass(frozen=True)
class BenchCell:
    n: int
    m: int
    restrictions: int
    ranking: int = 0
    dynamic: int = 0

    @property
    def label(self) -> str:
        return f"n={self.n},m={self.m},r={self.restrictions + self.ranking + self.dynamic}"


@dataclass(frozen=True)
class BenchConfig:
    cells: tuple
    algorithms: tuple = ("proposed", "rwz")
    candidates: int = 1_000_000
    seconds: Optional[float] = None
    target_admissible: Optional[int] = None
    seed: int = 0
    p: int = 5
    T_obs: int = 200
    shrinkage: float = 0.2
    workers: int = 1
    exact: bool = False
    max_scheme_attempts: int = 1000

    def __post_init__(self):
        if not self.cells:
            raise ConfigError("no cells")
        if not self.algorithms:
            raise ConfigError("empty algorithm list")
        bad = [a for a in self.algorithms if a not in ("proposed", "rwz", "fallback")]
        if bad:
            raise ConfigError(f"unknown algorithm(s): {bad}")
        if self.candidates <= 0 or (self.seconds is not None and self.seconds <= 0):
            raise ConfigError("budget must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        d = dict(d)
        cells = tuple(BenchCell(**c) for c in d.pop("cells", ()))
        algorithms = tuple(d.pop("algorithms", ("proposed", "rwz")))
        try:
            return cls(cells=cells, algorithms=algorithms, **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return {
            "cells": [vars(c) for c in self.cells],
            "algorithms": list(self.algorithms),
            "candidates": self.candidates,
            "seconds": self.seconds,
            "target_admissible": self.target_admissible,
            "seed": self.seed,
            "p": self.p,
            "T_obs": self.T_obs,
            "shrinkage": self.shrinkage,
            "workers": self.workers,
            "exact": self.exact,
            "max_scheme_attempts": self.max_scheme_attempts,
        }


def load_bench_config(path) -> BenchConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            return BenchConfig.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


@dataclass
class CellResult:
    cell: BenchCell
    stats: dict = field(default_factory=dict)
    error: Optional[str] = None

    def admissible_per_second(self, algorithm: str) -> float:
        s = self.stats[algorithm]
        return s.admissible / s.elapsed_seconds if s.elapsed_seconds > 0 else 0.0


@dataclass
class BenchResult:
    config: BenchConfig
    cells: list

    def to_json(self) -> dict:
        out = {"config": self.config.to_dict(), "cells": {}}
        for r in self.cells:
            entry = {"n": r.cell.n, "m": r.cell.m, "restrictions": r.cell.restrictions,
                     "ranking": r.cell.ranking, "dynamic": r.cell.dynamic}
            if r.error:
                entry["error"] = r.error
            for alg, s in r.stats.items():
                entry[alg] = dict(s.as_dict(), admissible_per_second=r.admissible_per_second(alg))
            out["cells"][r.cell.label] = entry
        return out

    def to_csv(self) -> str:
        """One row per cell; per algorithm the candidate and admissible counts (no timings)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["n", "m", "restrictions"]
        for alg in self.config.algorithms:
            header += [f"{alg}_candidates", f"{alg}_admissible"]
        w.writerow(header)
        for r in self.cells:
            row = [r.cell.n, r.cell.m, r.cell.restrictions + r.cell.ranking + r.cell.dynamic]
            for alg in self.config.algorithms:
                s = r.stats.get(alg)
                row += [s.candidates, s.admissible] if s else ["", ""]
            w.writerow(row)
        return buf.getvalue()


def simulate_cell(cell: BenchCell, config: BenchConfig, rng: np.random.Generator):
    """Simulated dataset plus a scheme that passes the assumption check."""
    spec = DgpSpec(cell.n, cell.m, config.p, config.T_obs)
    for _ in range(config.max_scheme_attempts):
        params, b0, data = simulate_dgp(spec, rng)
        scheme = generate_scheme(b0, cell.m, cell.restrictions, cell.ranking, cell.dynamic, params)
        if check_assumptions(scheme).holds:
            return params, b0, data, scheme
    raise InfeasibleDGPError(f"{cell.label}: no scheme passing the assumption check")


def _run_cell(index: int, cell: BenchCell, config: BenchConfig) -> CellResult:
    result = CellResult(cell)
    try:
        _, _, data, scheme = simulate_cell(cell, config, stream(config.seed, 2, index))
    except InfeasibleDGPError as exc:
        result.error = str(exc)
        return result
    posterior = fit_posterior(data, config.p, Minnesota(config.shrinkage))
    for alg in config.algorithms:
        sampler = Sampler(posterior, scheme, alg, exact=config.exact)
        result.stats[alg] = count_admissible(
            sampler, config.candidates, config.seed, key=(index, METHODS.index(alg)),
            workers=config.workers, seconds=config.seconds, target=config.target_admissible,
        )
    return result


def run_bench(config: BenchConfig) -> BenchResult:
    return BenchResult(config, [_run_cell(i, c, config) for i, c in enumerate(config.cells)])


# --- summaries -------------------------------------------------------------


@dataclass
class IrfSummary:
    quantile_levels: tuple
    quantiles: np.ndarray
    mean: np.ndarray
    mean_se: np.ndarray
    draws: int


def summarize_irfs(values: np.ndarray, quantiles: Sequence[float] = DEFAULT_QUANTILES) -> IrfSummary:
    """Pointwise quantiles, mean and Monte Carlo standard error of the mean over draws (axis 0)."""
    R = values.shape[0]
    q = np.quantile(values, quantiles, axis=0)
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1) if R > 1 else np.zeros_like(mean)
    se = sd / np.sqrt(R)
    # independent draws: the error of the mean is sd / sqrt(R)
    assert np.allclose(se * np.sqrt(R), sd)
    return IrfSummary(tuple(quantiles), q, mean, se, R)


def bootstrap_quantile_se(values: np.ndarray, quantiles: Sequence[float], rng: np.random.Generator,
                          reps: int = 200) -> np.ndarray:
    R = values.shape[0]
    boots = np.empty((reps, len(quantiles)) + values.shape[1:])
    for b in range(reps):
        boots[b] = np.quantile(values[rng.integers(0, R, R)], quantiles, axis=0)
    return boots.std(axis=0, ddof=1)


# --- equivalence study -----------------------------------------------------


@dataclass
class EquivalenceReport:
    algorithms: tuple
    draws: dict
    stats: dict
    ks_pvalues: np.ndarray
    alpha: float
    quantile_levels: tuple
    quantiles: dict
    quantile_se: dict
    reference: str
    max_gap: float
    max_gap_index: tuple
    se_at_max_gap: float
    partial: bool = False

    @property
    def ks_threshold(self) -> float:
        return self.alpha / self.ks_pvalues.size

    @property
    def ks_pass(self) -> bool:
        return bool(self.ks_pvalues.min() > self.ks_threshold)

    @property
    def gap_pass(self) -> bool:
        return bool(self.max_gap < 2.0 * self.se_at_max_gap)

    @property
    def passed(self) -> bool:
        return self.ks_pass and self.gap_pass and not self.partial

    def summary(self) -> str:
        a, b = self.algorithms
        return (
            f"{a} vs {b}: {self.draws[a]}/{self.draws[b]} draws; "
            f"min KS p={self.ks_pvalues.min():.3g} (threshold {self.ks_threshold:.3g}); "
            f"max quantile gap={self.max_gap:.4g} vs 2*SE={2 * self.se_at_max_gap:.4g}"
            + (" [partial]" if self.partial else "")
        )


def equivalence_study(
    n: int,
    m: int,
    scheme: RestrictionSet,
    draws_per_algorithm: int,
    seed: int,
    H: int = 8,
    algorithms: tuple = ("proposed", "rwz"),
    exact: bool = False,
    cap: int = 10_000_000,
    p: int = 2,
    T_obs: int = 200,
    bootstrap_reps: int = 200,
    alpha: float = 0.01,
    quantiles: Sequence[float] = DEFAULT_QUANTILES,
    workers: int = 1,
) -> EquivalenceReport:
    """Compare two samplers on a plug-in (fixed-parameter) posterior.

    KS tests run on every identified impact entry; IRF quantile gaps are
    judged against the bootstrap standard error of the reference sampler's
    quantile (``rwz`` when present) at the entry with the largest gap.
    """
    if scheme.n != n or scheme.m != m:
        raise ConfigError("scheme dimensions do not match (n, m)")
    if not check_assumptions(scheme).holds or scheme.unrestricted_shocks():
        raise ConfigError("scheme fails the assumption check")
    if len(algorithms) != 2:
        raise ConfigError("exactly two algorithms are compared")
    _, _, data = simulate_dgp(DgpSpec(n, m, p, T_obs, restrictions=scheme), stream(seed, 3))
    posterior = fit_posterior(data, p, plug_in=True)
    H = max(H, scheme.max_dynamic_horizon)

    irfs, impacts, counts, stats = {}, {}, {}, {}
    partial = False
    for alg in algorithms:
        sampler = Sampler(posterior, scheme, alg, H, exact=exact and alg != "rwz")
        batch = draw_many(sampler, draws_per_algorithm, seed, workers, cap, key=(METHODS.index(alg),))
        partial |= batch.exhausted
        counts[alg] = len(batch.draws)
        stats[alg] = batch.stats
        impacts[alg] = np.array([d.impact[:, :m] for d in batch.draws]).reshape(-1, n, m)
        irfs[alg] = np.array([compute_irf(d.params, d.impact, m, H).values for d in batch.draws]).reshape(-1, n, m, H + 1)

    a, b = algorithms
    pvals = np.ones((n, m))
    if counts[a] and counts[b]:
        for i in range(n):
            for j in range(m):
                pvals[i, j] = sps.ks_2samp(impacts[a][:, i, j], impacts[b][:, i, j]).pvalue

    q = {alg: np.quantile(irfs[alg], quantiles, axis=0) if counts[alg] else None for alg in algorithms}
    se = {alg: bootstrap_quantile_se(irfs[alg], quantiles, stream(seed, 5, METHODS.index(alg)), bootstrap_reps)
          if counts[alg] > 1 else None for alg in algorithms}
    reference = "rwz" if "rwz" in algorithms else b
    if q[a] is not None and q[b] is not None:
        gap = np.abs(q[a] - q[b])
        idx = np.unravel_index(int(np.argmax(gap)), gap.shape)
        max_gap = float(gap[idx])
        se_at = float(se[reference][idx]) if se[reference] is not None else 0.0
    else:
        idx, max_gap, se_at = (), float("inf"), 0.0
    return EquivalenceReport(
        tuple(algorithms), counts, stats, pvals, alpha, tuple(quantiles), q, se,
        reference, max_gap, tuple(int(x) for x in idx), se_at, partial,
    )
