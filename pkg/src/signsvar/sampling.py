"""Haar draws and accept-reject samplers for impact matrices under impact restrictions.

Every candidate is a fresh pair ``(posterior draw, Haar draw)``; a rejected
posterior draw is never paired with a second rotation. Candidates are generated
in vectorized batches from one random stream and examined in order, so the
outcome depends only on the stream and the batch schedule.

Streams
-------
Replicable workers use counter-based streams derived from the master seed:
admissible draw ``d`` uses ``SeedSequence(seed, spawn_key=(0, *key, d))`` and
candidate block ``b`` of a fixed-budget run uses ``spawn_key=(1, *key, b)``.
The set of accepted draws therefore does not depend on how indices are
distributed across workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .posterior import NiwPosterior
from .restrictions import (
    RestrictionSet,
    check_assumptions,
    check_cross_shock,
    check_dynamic,
)
from .var import compute_irf

METHODS = ("proposed", "rwz", "fallback", "a0")
DEFAULT_CAP = 10_000_000
DEFAULT_ENUMERATION_LIMIT = 100_000
FIRST_BATCH = 16
MAX_BATCH = 4096
BLOCK = 65_536


class SamplingError(RuntimeError):
    pass


class AssumptionError(ValueError):
    """The restriction set fails the distinguishability check required by the strict path."""


class EnumerationLimitError(SamplingError):
    pass


class Exhausted(SamplingError):
    """No admissible draw within the candidate cap."""

    def __init__(self, stats: "DrawStats"):
        self.stats = stats
        super().__init__(f"no admissible draw within {stats.candidates} candidate pairs")


@dataclass
class DrawStats:
    candidates: int = 0
    admissible: int = 0
    rejected_impact: int = 0
    rejected_dynamic: int = 0
    rejected_cross: int = 0
    elapsed_seconds: float = field(default=0.0, compare=False)

    def __add__(self, other: "DrawStats") -> "DrawStats":
        return DrawStats(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def rejected(self) -> int:
        return self.rejected_impact + self.rejected_dynamic + self.rejected_cross

    @property
    def acceptance_rate(self) -> float:
        return self.admissible / self.candidates if self.candidates else 0.0

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["acceptance_probability"] = self.acceptance_rate
        return out


@dataclass(frozen=True, eq=False)
class AdmissibleDraw:
    """Accepted ``(params, impact)``.

    ``assignment[c] = (i, s)`` means column ``c`` of ``impact`` is ``s`` times
    column ``i`` of the candidate ``R``. Columns ``identified`` onwards are an
    arbitrary orthogonal completion. In A0 mode ``a0`` holds the restricted
    matrix and ``impact`` its inverse.
    """

    params: object
    impact: np.ndarray
    assignment: tuple
    stats: DrawStats
    identified: int
    a0: Optional[np.ndarray] = None

    @property
    def rotation(self) -> np.ndarray:
        """``Q* = L^{-1} impact`` with ``L`` the lower Cholesky factor of ``Sigma``."""
        L = np.linalg.cholesky(self.params.sigma)
        return np.linalg.solve(L, self.impact)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


def sample_haar_batch(n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent Haar-distributed ``n x n`` orthogonal matrices."""
    Z = rng.standard_normal((size, n, n))
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    bad = np.flatnonzero(np.abs(d).min(axis=-1) <= 1e-12)
    for b in bad:
        while True:
            q, r = np.linalg.qr(rng.standard_normal((n, n)))
            if np.abs(np.diag(r)).min() > 1e-12:
                Q[b], d[b] = q, np.diag(r)
                break
    return Q * np.sign(d)[..., None, :]


def sample_haar(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return sample_haar_batch(n, rng, 1)[0]


def max_assignment_count(n: int, m: int, strict: bool) -> int:
    """Upper bound on the number of shock-to-column assignments a candidate table admits.

    Strict tables have disjoint candidate sets, so the product of their sizes is
    largest for a balanced split of the ``n`` columns.
    """
    if strict:
        q, r = divmod(n, m)
        return (q + 1) ** r * q ** (m - r)
    return math.perm(n, m) * 2 ** m


def enumerate_assignments(codes: np.ndarray, limit: int = DEFAULT_ENUMERATION_LIMIT) -> list:
    """All injective shock-to-column assignments with signs consistent with a table.

    Returns a list of tuples ``((i_1, s_1), ..., (i_m, s_m))``.
    """
    m, n = codes.shape
    options = []
    for j in range(m):
        opts = []
        for i in np.flatnonzero(codes[j]):
            c = codes[j, i]
            if c == 2:
                opts += [(int(i), 1), (int(i), -1)]
            else:
                opts.append((int(i), int(c)))
        options.append(opts)
    out = []
    chosen = []
    used = set()

    def walk(j):
        if j == m:
            out.append(tuple(chosen))
            if len(out) > limit:
                raise EnumerationLimitError(f"more than {limit} admissible assignments")
            return
        for i, s in options[j]:
            if i in used:
                continue
            used.add(i)
            chosen.append((i, s))
            walk(j + 1)
            chosen.pop()
            used.discard(i)

    walk(0)
    return out


class Sampler:
    """Candidate search for one method over a posterior and restriction set."""

    def __init__(
        self,
        posterior: NiwPosterior,
        rset: RestrictionSet,
        method: str = "proposed",
        H_dyn: Optional[int] = None,
        exact: bool = False,
        enumeration_limit: int = DEFAULT_ENUMERATION_LIMIT,
    ):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
        if rset.n != posterior.n:
            raise ValueError(f"restriction set has n={rset.n} but the VAR has n={posterior.n}")
        need = rset.max_dynamic_horizon
        if H_dyn is None:
            H_dyn = need
        if H_dyn < need:
            raise ValueError(f"horizon {H_dyn} is below the largest restricted horizon {need}")
        if method in ("proposed", "a0") and not check_assumptions(rset).holds:
            raise AssumptionError(
                "restriction set does not separate every pair of shocks; use the fallback method"
            )
        if method == "a0" and rset.dynamic:
            raise ValueError("A0 mode supports impact restrictions only")
        self.posterior = posterior
        self.rset = rset
        self.method = method
        self.H_dyn = H_dyn
        self.exact = exact
        self.enumeration_limit = enumeration_limit
        self.n, self.m = rset.n, rset.m
        self.program = rset.program
        self.bound = max_assignment_count(self.n, self.m, method != "fallback")
        self._diag = np.arange(self.m)

    # -- candidate generation ------------------------------------------------

    def _candidates(self, rng: np.random.Generator, size: int):
        L = self.posterior.sigma_factors(rng, size)
        Q = sample_haar_batch(self.n, rng, size)
        if self.method == "a0":
            Linv = np.linalg.inv(L)
            prec = np.swapaxes(Linv, -1, -2) @ Linv
            C = np.linalg.cholesky(0.5 * (prec + np.swapaxes(prec, -1, -2)))
            R = C @ Q
        else:
            R = L @ Q
        return L, R, self.program.codes(R)

    def _feasible(self, codes: np.ndarray) -> np.ndarray:
        if self.method == "rwz":
            return (codes[:, self._diag, self._diag] >= 1).all(axis=1)
        return (codes != 0).any(axis=2).all(axis=1)

    # -- step 4 --------------------------------------------------------------

    def assign(self, codes: np.ndarray, rng: np.random.Generator) -> Optional[list]:
        """Pick ``(column, sign)`` per identified shock, or ``None`` to reject the pair."""
        if self.method == "rwz":
            return [(j, 1) for j in range(self.m)]
        if self.method == "fallback":
            options = enumerate_assignments(codes, self.enumeration_limit)
            if not options:
                return None
            if self.exact and rng.random() * self.bound >= len(options):
                return None
            return list(options[rng.integers(len(options))])

        table = np.where(codes == 2, 1, codes)
        sets = [np.flatnonzero(row) for row in table]
        if (np.count_nonzero(table, axis=0) > 1).any():
            raise SamplingError("candidate sets overlap although the restriction set passed the assumption check")
        if self.exact:
            size = math.prod(len(s) for s in sets)
            if rng.random() * self.bound >= size:
                return None
        out = []
        for j, s in enumerate(sets):
            i = int(s[rng.integers(len(s))])
            out.append((i, int(table[j, i])))
        return out

    def _complete(self, R: np.ndarray, chosen: list, rng: np.random.Generator):
        n = self.n
        if self.method == "rwz":
            return R.copy(), tuple((c, 1) for c in range(n))
        used = {i for i, _ in chosen}
        rest = np.array([i for i in range(n) if i not in used], dtype=int)
        rest = rng.permutation(rest)
        signs = 2 * rng.integers(0, 2, size=len(rest)) - 1
        assignment = list(chosen) + [(int(i), int(s)) for i, s in zip(rest, signs)]
        cols = np.array([i for i, _ in assignment])
        sgn = np.array([s for _, s in assignment], dtype=float)
        return R[:, cols] * sgn, tuple(assignment)

    def _try(self, L: np.ndarray, R: np.ndarray, codes: np.ndarray, rng: np.random.Generator):
        """Return ``(stage, result)``: stage in {"ok", "impact", "cross", "dynamic"}."""
        chosen = self.assign(codes, rng)
        if chosen is None:
            return "impact", None
        searched, assignment = self._complete(R, chosen, rng)
        if not check_cross_shock(self.rset, searched):
            return "cross", None
        coeffs = self.posterior.coefficients(L, rng)
        params = self.posterior.params_from(L, coeffs)
        a0 = None
        impact = searched
        if self.method == "a0":
            a0 = searched.T
            impact = np.linalg.inv(a0)
        if self.rset.dynamic:
            irf = compute_irf(params, impact, self.m, self.H_dyn)
            if not check_dynamic(self.rset, irf):
                return "dynamic", None
        return "ok", (params, impact, assignment, a0)

    # -- scanning ------------------------------------------------------------

    def scan(self, rng: np.random.Generator, budget: int, first_only: bool):
        """Examine up to ``budget`` candidates; returns ``(accepted, stats)``."""
        stats = DrawStats()
        accepted = []
        batch = FIRST_BATCH if first_only else min(BLOCK, MAX_BATCH)
        t0 = time.perf_counter()
        while stats.candidates < budget:
            size = min(batch, budget - stats.candidates)
            L, R, codes = self._candidates(rng, size)
            feasible = np.flatnonzero(self._feasible(codes))
            processed = size
            n_feasible = 0
            for b in feasible:
                n_feasible += 1
                stage, result = self._try(L[b], R[b], codes[b], rng)
                if stage == "ok":
                    stats.admissible += 1
                    accepted.append(result)
                    if first_only:
                        processed = int(b) + 1
                        break
                elif stage == "impact":
                    stats.rejected_impact += 1
                elif stage == "cross":
                    stats.rejected_cross += 1
                else:
                    stats.rejected_dynamic += 1
            stats.rejected_impact += processed - n_feasible
            stats.candidates += processed
            if first_only and accepted:
                break
            batch = min(2 * batch, MAX_BATCH)
        stats.elapsed_seconds = time.perf_counter() - t0
        return accepted, stats

    def draw(self, rng: np.random.Generator, cap: int = DEFAULT_CAP) -> AdmissibleDraw:
        if cap < 1:
            raise ValueError("cap must be >= 1")
        accepted, stats = self.scan(rng, cap, first_only=True)
        if not accepted:
            raise Exhausted(stats)
        params, impact, assignment, a0 = accepted[0]
        return AdmissibleDraw(params, impact, assignment, stats, self.m, a0)


def algorithm1_draw(posterior, rset, H_dyn=None, rng=None, cap=DEFAULT_CAP, exact=False) -> AdmissibleDraw:
    """One admissible draw by permutation and sign-switch search over ``R = L Q``.

    ``exact=True`` additionally accepts each pair with probability proportional
    to the number of admissible assignments, which makes the output uniform
    over the admissible rotations (the plain search weights each equivalence
    class equally).
    """
    rng = np.random.default_rng() if rng is None else rng
    return Sampler(posterior, rset, "proposed", H_dyn, exact).draw(rng, cap)


def rwz_draw(posterior, rset, H_dyn=None, rng=None, cap=DEFAULT_CAP) -> AdmissibleDraw:
    """One admissible draw by testing the fixed column-to-shock mapping of each ``R = L Q``."""
    rng = np.random.default_rng() if rng is None else rng
    return Sampler(posterior, rset, "rwz", H_dyn).draw(rng, cap)


def fallback_enumeration_draw(posterior, rset, H_dyn=None, rng=None, cap=DEFAULT_CAP,
                              enumeration_limit=DEFAULT_ENUMERATION_LIMIT, exact=False) -> AdmissibleDraw:
    """Like :func:`algorithm1_draw` but enumerates all admissible assignments; no assumption needed."""
    rng = np.random.default_rng() if rng is None else rng
    return Sampler(posterior, rset, "fallback", H_dyn, exact, enumeration_limit).draw(rng, cap)


def a0_mode_draw(posterior, rset, rng=None, cap=DEFAULT_CAP, exact=False) -> AdmissibleDraw:
    """Restrictions on ``A0 = B0^{-1}``: entry ``(j, i)`` of ``A0`` is restricted by record ``(i, j)``.

    The search runs over rows of ``Q Lbar`` (``Lbar`` the upper Cholesky factor
    of ``Sigma^{-1}``), implemented as columns of its transpose.
    """
    rng = np.random.default_rng() if rng is None else rng
    return Sampler(posterior, rset, "a0", None, exact).draw(rng, cap)


# --- replicable workers ----------------------------------------------------


@dataclass
class DrawBatch:
    draws: list
    stats: DrawStats
    exhausted: bool = False


def _draw_indices(sampler: Sampler, seed: int, key: tuple, indices, cap: int):
    out = []
    for d in indices:
        try:
            draw = sampler.draw(stream(seed, 0, *key, d), cap)
        except Exhausted as exc:
            out.append((d, None, exc.stats))
            break
        out.append((d, draw, draw.stats))
    return out


def draw_many(
    sampler: Sampler,
    count: int,
    seed: int,
    workers: int = 1,
    cap: int = DEFAULT_CAP,
    key: tuple = (),
) -> DrawBatch:
    """Collect ``count`` admissible draws; draw ``d`` always uses stream ``(seed, 0, *key, d)``.

    Stops at the first draw that exhausts its cap, so the returned prefix is the
    same for every worker count.
    """
    t0 = time.perf_counter()
    if workers <= 1 or count <= 1:
        results = _draw_indices(sampler, seed, key, range(count), cap)
    else:
        workers = min(workers, count)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_draw_indices, sampler, seed, key, range(w, count, workers), cap)
                       for w in range(workers)]
            results = [r for f in futures for r in f.result()]
        results.sort(key=lambda r: r[0])
    draws, stats, exhausted = [], DrawStats(), False
    for d, draw, s in results:
        if d != len(draws):
            break
        stats = stats + s
        if draw is None:
            exhausted = True
            break
        draws.append(draw)
    stats.elapsed_seconds = time.perf_counter() - t0
    return DrawBatch(draws, stats, exhausted)


def _count_blocks(sampler: Sampler, seed: int, key: tuple, blocks, budget: int, block: int):
    total = DrawStats()
    for b in blocks:
        size = min(block, budget - b * block)
        _, stats = sampler.scan(stream(seed, 1, *key, b), size, first_only=False)
        total = total + stats
    return total


def count_admissible(
    sampler: Sampler,
    candidates: int,
    seed: int,
    key: tuple = (),
    workers: int = 1,
    block: int = BLOCK,
    seconds: Optional[float] = None,
    target: Optional[int] = None,
) -> DrawStats:
    """Run a fixed budget of candidate pairs and tally outcomes.

    With ``seconds`` or ``target`` set, blocks run sequentially until the
    wall-clock budget is spent or ``target`` admissible draws are reached
    (``candidates`` then acts as an upper limit).
    """
    t0 = time.perf_counter()
    n_blocks = -(-candidates // block)
    if seconds is not None or target is not None:
        total = DrawStats()
        for b in range(n_blocks):
            if seconds is not None and time.perf_counter() - t0 >= seconds:
                break
            if target is not None and total.admissible >= target:
                break
            total = total + _count_blocks(sampler, seed, key, [b], candidates, block)
    elif workers <= 1:
        total = _count_blocks(sampler, seed, key, range(n_blocks), candidates, block)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_count_blocks, sampler, seed, key, range(w, n_blocks, workers), candidates, block)
                       for w in range(workers)]
            total = DrawStats()
            for f in futures:
                total = total + f.result()
    total.elapsed_seconds = time.perf_counter() - t0
    return total
