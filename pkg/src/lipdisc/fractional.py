"""Balanced fractional k-colorings with few fractional elements.

Two routes produce a fractional coloring whose multilinear values agree
across colors for every function in the family:

* an exact linear-algebra route for additive families (pivot a feasible
  table to an extreme point, which pins all but at most n(k-1) elements
  to simplex vertices), and
* a numerical search over unit-interval cut profiles for everything else.
  A profile cuts [0,1] into labeled segments; each element owns a 1/m
  interval, and its color weights are the labeled fractions of that
  interval, so at most one element per cut is fractional.

Colors are 0-based in memory; JSON uses 1-based labels.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NotAdditiveError
from .seeding import derive_rng
from .setfunctions import (
    SUPPORT_CAP,
    Additive,
    Family,
    SetFunction,
    multilinear_mc,
    support_masks_and_weights,
)

BOUND_TOL = 1e-12       # distance from 0/1 below which an entry counts as integral
BOUNDARY_SNAP = 1e-12   # cuts this close to an element boundary stay on it
MC_BUDGET = 50_000      # fixed Monte Carlo budget per (function, color) fallback


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class CutProfile:
    """Sorted cut positions in [0,1] plus a color label per segment."""

    k: int
    cuts: tuple[float, ...]
    labels: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("need at least two colors")
        if len(self.labels) != len(self.cuts) + 1:
            raise ValueError("labels must have one entry per segment")
        prev = 0.0
        for c in self.cuts:
            if not 0.0 < c < 1.0:
                raise ValueError("cuts must lie strictly inside (0, 1)")
            if c <= prev:
                raise ValueError("cuts must be strictly increasing")
            prev = c
        for lab in self.labels:
            if not 0 <= lab < self.k:
                raise ValueError(f"label {lab} outside 0..{self.k - 1}")


def canonical_profile(k: int, cuts: Sequence[float],
                      labels: Sequence[int]) -> CutProfile:
    """Normalize raw cut/label lists into a valid profile.

    Out-of-range cuts are clipped, zero-length segments dropped, and
    adjacent segments with equal labels merged, so every remaining cut is
    a genuine color change.
    """
    if len(labels) != len(cuts) + 1:
        raise ValueError("labels must have one entry per segment")
    pos = sorted(min(1.0, max(0.0, float(c))) for c in cuts)
    bounds = [0.0] + pos + [1.0]
    labs = list(labels)  # segment i sits between bounds[i] and bounds[i+1]
    segments: list[tuple[float, int]] = []  # (end, label), nonzero length only
    for i, lab in enumerate(labs):
        if bounds[i + 1] > bounds[i]:
            if segments and segments[-1][1] == lab:
                segments[-1] = (bounds[i + 1], lab)
            else:
                segments.append((bounds[i + 1], lab))
    if not segments:
        segments = [(1.0, labs[-1])]
    new_cuts = tuple(end for end, _ in segments[:-1])
    new_labels = tuple(lab for _, lab in segments)
    return CutProfile(k, new_cuts, new_labels)


@dataclass(frozen=True, eq=False)
class FractionalColoring:
    """Row-stochastic m x k weight table; rows at simplex vertices are integral."""

    k: int
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != self.k or w.shape[0] < 1:
            raise ValueError("weights must be an m x k table")
        if np.any(w < -BOUND_TOL) or np.any(w > 1.0 + BOUND_TOL):
            raise ValueError("weights must lie in [0, 1]")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows must sum to 1 within 1e-12")
        object.__setattr__(self, "weights", np.clip(w, 0.0, 1.0))

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def column(self, j: int) -> np.ndarray:
        """Marginal inclusion vector of color j."""
        return self.weights[:, j]

    def fractional_rows(self) -> np.ndarray:
        at_vertex = np.all((self.weights == 0.0) | (self.weights == 1.0), axis=1)
        return np.nonzero(~at_vertex)[0]

    @property
    def fractional_count(self) -> int:
        return int(self.fractional_rows().size)

    def is_integral(self) -> bool:
        return self.fractional_count == 0

    def rounded_colors(self) -> np.ndarray:
        """argmax color per row (exact coloring when integral)."""
        return np.argmax(self.weights, axis=1).astype(np.int64)


def integral_coloring_table(chi: Sequence[int], k: int) -> FractionalColoring:
    chi_arr = np.asarray(chi, dtype=np.int64)
    w = np.zeros((chi_arr.size, k), dtype=np.float64)
    w[np.arange(chi_arr.size), chi_arr] = 1.0
    return FractionalColoring(k, w)


@dataclass(frozen=True)
class FractionalReport:
    epsilon: float
    fractional_count: int
    iterations: int
    method: str
    success: bool
    eps_target: float


# ---------------------------------------------------------------------------
# cut-profile embedding

def embed(profile: CutProfile, m: int) -> FractionalColoring:
    """Fractional coloring induced by a cut profile on m elements.

    Element g owns [(g-1)/m, g/m]; its weight on color j is m times the
    length of that interval lying in segments labeled j.  Cuts within
    1e-12 of an element boundary are treated as sitting on it, so the
    element stays integral.  An element is fractional only when a cut
    falls strictly inside its interval.
    """
    cuts = list(profile.cuts)
    for i, c in enumerate(cuts):
        snapped = round(c * m) / m
        if abs(c - snapped) <= BOUNDARY_SNAP:
            cuts[i] = snapped
    weights = np.zeros((m, profile.k), dtype=np.float64)
    for g in range(m):
        lo, hi = g / m, (g + 1) / m
        first = bisect.bisect_right(cuts, lo)
        last = bisect.bisect_left(cuts, hi)
        interior = [c for c in cuts[first:last] if lo < c < hi]
        if not interior:
            mid = 0.5 * (lo + hi)
            weights[g, profile.labels[bisect.bisect_right(cuts, mid)]] = 1.0
            continue
        points = [lo] + interior + [hi]
        row = np.zeros(profile.k, dtype=np.float64)
        for a, b in zip(points[:-1], points[1:]):
            seg = bisect.bisect_right(cuts, 0.5 * (a + b))
            row[profile.labels[seg]] += (b - a) * m
        weights[g] = row / row.sum()
    return FractionalColoring(profile.k, weights)


# ---------------------------------------------------------------------------
# balance objective

def color_value(f: SetFunction, coloring: FractionalColoring, j: int,
                seed: int = 0, func_index: int = 0,
                support_cap: int = SUPPORT_CAP) -> float:
    """Multilinear value of f on color j's marginals; exact when the
    fractional support permits, Monte Carlo with a fixed budget otherwise."""
    x = coloring.column(j)
    frac = int(np.count_nonzero((x > 0.0) & (x < 1.0)))
    if frac <= support_cap:
        masks, w = support_masks_and_weights(x, support_cap)
        return float(w @ f.value_many(masks))
    est, _ = multilinear_mc(f, x, MC_BUDGET,
                            seed=seed * 1_000_003 + func_index * 1009 + j)
    return est


def balance_objective(F: Family, coloring: FractionalColoring,
                      seed: int = 0) -> float:
    """Largest gap between any two colors' values of any family function."""
    worst = 0.0
    for i, f in enumerate(F.functions):
        vals = [color_value(f, coloring, j, seed=seed, func_index=i)
                for j in range(coloring.k)]
        worst = max(worst, max(vals) - min(vals))
    return worst


def verify_fractional(F: Family, coloring: FractionalColoring,
                      eps: float) -> tuple[bool, int]:
    """Check the balance gap against eps and the fractional count against n(k-1)."""
    count = coloring.fractional_count
    ok = (balance_objective(F, coloring) <= eps
          and count <= F.n * (coloring.k - 1))
    return ok, count


# ---------------------------------------------------------------------------
# exact route for additive families

def _null_vector(A: np.ndarray) -> Optional[np.ndarray]:
    """A unit vector in the null space of A, or None if A has full column rank."""
    if A.shape[1] == 0:
        return None
    u, s, vt = np.linalg.svd(A, full_matrices=True)
    rank_tol = max(A.shape) * (s[0] if s.size else 0.0) * np.finfo(np.float64).eps
    rank = int(np.sum(s > max(rank_tol, 1e-13)))
    if rank >= A.shape[1]:
        return None
    vec = vt[-1]
    lead = np.argmax(np.abs(vec) > 1e-9)
    if vec[lead] < 0:
        vec = -vec
    return vec


def solve_lp_additive(F: Family, k: int
                      ) -> tuple[FractionalColoring, FractionalReport]:
    """Exactly balanced fractional coloring for an all-additive family.

    Starts from the uniform table (feasible by symmetry) and walks null
    space directions of the active equality system until the remaining
    interior variables are independent.  At such an extreme point at most
    n(k-1) rows can be fractional; a final pass snaps rows to vertices
    when doing so moves no function value by more than 1e-12.
    """
    for f in F.functions:
        if not isinstance(f, Additive):
            raise NotAdditiveError(f"function of kind {f.kind!r} in LP route")
    if k < 2:
        raise ValueError("need at least two colors")
    m, n = F.m, F.n
    nvars = m * k
    coeff = np.stack([f.coefficients for f in F.functions])  # (n, m)
    rows = []
    rhs = []
    for g in range(m):
        r = np.zeros(nvars)
        r[g * k:(g + 1) * k] = 1.0
        rows.append(r)
        rhs.append(1.0)
    for i in range(n):
        for j in range(1, k):
            r = np.zeros(nvars)
            r[j::k] += coeff[i]
            r[0::k] -= coeff[i]
            rows.append(r)
            rhs.append(0.0)
    A = np.stack(rows)
    x = np.full(nvars, 1.0 / k)

    iters = 0
    for _ in range(nvars + 10):
        interior = np.nonzero((x > BOUND_TOL) & (x < 1.0 - BOUND_TOL))[0]
        direction = _null_vector(A[:, interior])
        if direction is None:
            break
        d = np.zeros(nvars)
        d[interior] = direction
        with np.errstate(divide="ignore"):
            steps_up = np.where(d > 1e-12, (1.0 - x) / np.maximum(d, 1e-300), np.inf)
            steps_dn = np.where(d < -1e-12, x / np.maximum(-d, 1e-300), np.inf)
        t = min(steps_up.min(), steps_dn.min())
        if not np.isfinite(t) or t <= 0:
            break
        x = np.clip(x + t * d, 0.0, 1.0)
        iters += 1

    w = x.reshape(m, k)
    w[w < BOUND_TOL] = 0.0
    w[w > 1.0 - BOUND_TOL] = 1.0
    # snap rows whose rounding moves every function value by <= 1e-12
    sens = np.max(np.abs(coeff), axis=0)  # (m,)
    for g in range(m):
        jstar = int(np.argmax(w[g]))
        delta = np.abs(w[g] - np.eye(k)[jstar]).max()
        if sens[g] * delta <= 1e-12:
            w[g] = 0.0
            w[g, jstar] = 1.0
    for g in range(m):  # repair row sums without disturbing exact entries
        others = w[g].sum() - w[g].max()
        w[g, np.argmax(w[g])] = 1.0 - others
    coloring = FractionalColoring(k, w)
    eps = balance_objective(F, coloring)
    report = FractionalReport(
        epsilon=eps,
        fractional_count=coloring.fractional_count,
        iterations=iters,
        method="lp",
        success=eps <= 1e-9,
        eps_target=1e-9,
    )
    return coloring, report


# ---------------------------------------------------------------------------
# cut search for general families

def _is_prime(k: int) -> bool:
    if k < 2:
        return False
    for p in range(2, int(math.isqrt(k)) + 1):
        if k % p == 0:
            return False
    return True


def default_eps_target(bound: float) -> float:
    return min(1e-3, 0.01 * bound)


class _SearchDone(Exception):
    pass


class _Search:
    """Budgeted best-of tracker; the candidate sequence is deterministic in
    the seed and independent of the budget, so the best epsilon found is
    non-increasing as the budget grows."""

    def __init__(self, F: Family, k: int, budget: int, eps_target: float):
        self.F = F
        self.k = k
        self.budget = budget
        self.eps_target = eps_target
        self.evals = 0
        self.best_eps = math.inf
        self.best_profile: Optional[CutProfile] = None
        self.best_coloring: Optional[FractionalColoring] = None

    def score(self, k: int, cuts: Sequence[float], labels: Sequence[int]) -> float:
        if self.evals >= self.budget:
            raise _SearchDone
        self.evals += 1
        profile = canonical_profile(k, cuts, labels)
        coloring = embed(profile, self.F.m)
        eps = balance_objective(self.F, coloring)
        if eps < self.best_eps:
            self.best_eps = eps
            self.best_profile = profile
            self.best_coloring = coloring
        if self.best_eps <= self.eps_target:
            raise _SearchDone
        return eps


def _golden_refine(search: _Search, cuts: list[float], labels: list[int],
                   index: int, lo: float, hi: float, iters: int) -> tuple[float, float]:
    """Golden-section minimization of the balance gap over one cut position."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi

    def at(pos: float) -> float:
        trial = list(cuts)
        trial[index] = pos
        return search.score(search.k, trial, labels)

    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = at(c), at(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = at(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = at(d)
    return (c, fc) if fc <= fd else (d, fd)


def solve_cut_search(F: Family, k: int, budget: int = 4000, seed: int = 0,
                     eps_target: Optional[float] = None
                     ) -> tuple[CutProfile, FractionalColoring, FractionalReport]:
    """Search for a cut profile whose embedding balances all colors.

    Multi-start over random cut placements with labels cycling through the
    colors, refined by per-cut golden-section line search and perturbed by
    a simulated-annealing phase with an absolute cooling schedule.  The
    search stops at eps_target or when the evaluation budget runs out
    (non-fatal: the best profile found is returned with success=False).

    An exactly balanced profile is guaranteed to exist for prime k only;
    non-prime k emits a warning and the search proceeds best-effort.
    """
    if k < 2:
        raise ValueError("need at least two colors")
    if budget < 1:
        raise ValueError("budget must be at least 1 evaluation")
    if not _is_prime(k):
        warnings.warn(f"k={k} is not prime: a balanced cut profile may not exist",
                      stacklevel=2)
    from .rounding import discrepancy_bound  # local import, no cycle at module load

    if eps_target is None:
        eps_target = default_eps_target(discrepancy_bound(F.n, k))
    ncuts = F.n * (k - 1)
    search = _Search(F, k, budget, eps_target)

    try:
        # trivial single-segment profile first: settles constant families
        search.score(k, [], [0])
        restart = 0
        while True:
            rng = derive_rng(seed, 0xC7, restart)
            if restart == 0:
                cuts = [(i + 1) / (ncuts + 1) for i in range(ncuts)]
            else:
                cuts = sorted(rng.random(ncuts).tolist())
            labels = [i % k for i in range(ncuts + 1)]
            current = search.score(k, cuts, labels)

            # greedy label pass: try each segment in every other color
            for seg in range(ncuts + 1):
                base_label = labels[seg]
                for cand in range(k):
                    if cand == base_label:
                        continue
                    labels[seg] = cand
                    eps = search.score(k, cuts, labels)
                    if eps < current:
                        current = eps
                        base_label = cand
                    labels[seg] = base_label

            # coordinate sweeps of golden-section refinement
            for sweep in range(3):
                improved = False
                for i in range(ncuts):
                    lo = cuts[i - 1] if i > 0 else 0.0
                    hi = cuts[i + 1] if i + 1 < ncuts else 1.0
                    pos, eps = _golden_refine(search, cuts, labels, i, lo, hi,
                                              iters=42)
                    if eps < current - 1e-15:
                        current = eps
                        improved = True
                    cuts[i] = pos
                if not improved:
                    break

            # annealing walk with an absolute schedule (budget-independent)
            temp0, decay = 0.25, 0.93
            state_cuts, state_labels, state_eps = list(cuts), list(labels), current
            for step in range(50):
                temp = temp0 * decay ** step
                trial_cuts = list(state_cuts)
                trial_labels = list(state_labels)
                move = rng.integers(0, 3)
                if move == 0 and ncuts:
                    i = int(rng.integers(0, ncuts))
                    trial_cuts[i] = min(1.0, max(0.0, trial_cuts[i]
                                                 + rng.normal(0.0, temp)))
                    trial_cuts.sort()
                elif move == 1:
                    seg = int(rng.integers(0, ncuts + 1))
                    trial_labels[seg] = int(rng.integers(0, k))
                elif ncuts:
                    seg = int(rng.integers(0, ncuts))
                    trial_labels[seg], trial_labels[seg + 1] = (
                        trial_labels[seg + 1], trial_labels[seg])
                eps = search.score(k, trial_cuts, trial_labels)
                if eps < state_eps or rng.random() < math.exp(
                        -(eps - state_eps) / max(temp, 1e-9)):
                    state_cuts, state_labels, state_eps = (
                        trial_cuts, trial_labels, eps)

            # polish the annealed state if it beat the sweep result
            if state_eps < current:
                cuts, labels, current = state_cuts, state_labels, state_eps
                for i in range(ncuts):
                    lo = cuts[i - 1] if i > 0 else 0.0
                    hi = cuts[i + 1] if i + 1 < ncuts else 1.0
                    pos, eps = _golden_refine(search, cuts, labels, i, lo, hi,
                                              iters=42)
                    cuts[i] = pos
            restart += 1
    except _SearchDone:
        pass

    profile = search.best_profile
    coloring = search.best_coloring
    assert profile is not None and coloring is not None
    report = FractionalReport(
        epsilon=search.best_eps,
        fractional_count=coloring.fractional_count,
        iterations=search.evals,
        method="cut_search",
        success=search.best_eps <= eps_target,
        eps_target=eps_target,
    )
    return profile, coloring, report


def solve_fractional(F: Family, k: int, method: str = "auto",
                     budget: int = 4000, seed: int = 0,
                     eps_target: Optional[float] = None
                     ) -> tuple[FractionalColoring, FractionalReport]:
    """Dispatch to the LP route for additive families, cut search otherwise."""
    if method == "auto":
        method = ("lp" if all(isinstance(f, Additive) for f in F.functions)
                  else "cuts")
    if method == "lp":
        return solve_lp_additive(F, k)
    if method == "cuts":
        _, coloring, report = solve_cut_search(F, k, budget=budget, seed=seed,
                                               eps_target=eps_target)
        return coloring, report
    raise ValueError(f"unknown method {method!r}")
