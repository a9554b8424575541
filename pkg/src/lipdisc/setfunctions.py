"""Ground sets, subsets as bitmasks, and evaluatable set-function kinds.

Subsets of a ground set with m elements are plain Python ints used as
bitmasks: bit g (0-based) set means element g+1 is in the set.  All JSON
and CLI surfaces present elements 1-based; everything in memory is
0-based.

The function kinds here form a test menu of 1-Lipschitz-by-construction
families (additive, vector-sum under the max norm, coverage, budgeted
additive, distance to a monotone upward-closed family, and explicit
tables), together with exact and Monte Carlo evaluation of the
multilinear extension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import IndexOutOfRangeError, SupportTooLargeError, TooLargeError
from .seeding import derive_rng

TABLE_MAX_M = 20          # explicit tables and exhaustive scans stay <= 2^20 entries
SUPPORT_CAP = 20          # exact multilinear enumeration cap on fractional coordinates
EQ_TOL = 1e-12            # tolerance for structured identities
ACC_TOL = 1e-9            # tolerance for accumulated sums


# ---------------------------------------------------------------------------
# ground set and bitmask helpers

def full_mask(m: int) -> int:
    return (1 << m) - 1


def complement(mask: int, m: int) -> int:
    return full_mask(m) & ~mask


def subset_from_elements(elements: Iterable[int], m: int) -> int:
    """Bitmask from 1-based element labels."""
    mask = 0
    for e in elements:
        if not 1 <= e <= m:
            raise IndexOutOfRangeError(f"element {e} outside 1..{m}")
        mask |= 1 << (e - 1)
    return mask


def elements_of(mask: int) -> tuple[int, ...]:
    """1-based element labels of a bitmask, ascending."""
    out = []
    g = 0
    while mask:
        if mask & 1:
            out.append(g + 1)
        mask >>= 1
        g += 1
    return tuple(out)


def popcount_array(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(masks)


@dataclass(frozen=True)
class GroundSet:
    """m elements, 0-based bit positions, presented 1-based externally."""

    m: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("ground set needs at least one element")

    def validate_subset(self, mask: int) -> None:
        if mask < 0 or mask >> self.m:
            raise IndexOutOfRangeError(
                f"mask {mask:#x} references elements beyond m={self.m}"
            )

    @property
    def full(self) -> int:
        return full_mask(self.m)

    def all_masks(self) -> np.ndarray:
        if self.m > TABLE_MAX_M:
            raise TooLargeError(f"enumerating 2^{self.m} subsets exceeds cap")
        return np.arange(1 << self.m, dtype=np.uint64)


def _bit_column(masks: np.ndarray, g: int) -> np.ndarray:
    return ((masks >> np.uint64(g)) & np.uint64(1)).astype(np.float64)


# ---------------------------------------------------------------------------
# set-function kinds

class SetFunction:
    """Deterministic real-valued function on subsets of a ground set.

    Subclasses implement `_value_many` on uint64 mask arrays; scalar
    evaluation validates the mask range and delegates.  `lipschitz` is the
    declared constant used by checks, not a verified property.
    """

    kind: str = "abstract"

    def __init__(self, m: int, lipschitz: float = 1.0,
                 relevant: Optional[frozenset[int]] = None) -> None:
        if m < 1:
            raise ValueError("m must be >= 1")
        if lipschitz < 0:
            raise ValueError("declared Lipschitz constant must be >= 0")
        self.m = m
        self.lipschitz = float(lipschitz)
        self.relevant = relevant  # declared relevant elements, 0-based, or None

    # -- evaluation ---------------------------------------------------------

    def value(self, mask: int) -> float:
        if mask < 0 or mask >> self.m:
            raise IndexOutOfRangeError(
                f"mask {mask:#x} references elements beyond m={self.m}"
            )
        return float(self._value_many(np.array([mask], dtype=np.uint64))[0])

    def value_many(self, masks: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; masks are assumed in range."""
        return self._value_many(np.asarray(masks, dtype=np.uint64))

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- structure ----------------------------------------------------------

    def structural_relevant(self) -> Optional[frozenset[int]]:
        """Exact relevant-element set when derivable from structure, else None."""
        return None

    def structurally_monotone(self) -> Optional[bool]:
        """True if monotone by construction, None if unknown."""
        return None

    def sensitivity_exact(self) -> Optional[float]:
        """Exact max single-element sensitivity when structure gives it cheaply."""
        return None

    def scaled(self, factor: float) -> Optional["SetFunction"]:
        """Kind-preserving copy of f/factor, or None if the kind has no scale knob."""
        return None


class Additive(SetFunction):
    """f(S) = sum of per-element coefficients over S."""

    kind = "additive"

    def __init__(self, coefficients: Sequence[float],
                 lipschitz: Optional[float] = None,
                 relevant: Optional[frozenset[int]] = None) -> None:
        coeffs = np.asarray(coefficients, dtype=np.float64)
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("coefficients must be a nonempty 1-d sequence")
        lip = float(np.max(np.abs(coeffs))) if lipschitz is None else lipschitz
        super().__init__(coeffs.size, lip, relevant)
        self.coefficients = coeffs

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        vals = np.zeros(masks.shape, dtype=np.float64)
        for g in range(self.m):
            c = self.coefficients[g]
            if c != 0.0:
                vals += c * _bit_column(masks, g)
        return vals

    def structural_relevant(self) -> frozenset[int]:
        return frozenset(int(g) for g in np.nonzero(self.coefficients)[0])

    def structurally_monotone(self) -> bool:
        return bool(np.all(self.coefficients >= 0))

    def sensitivity_exact(self) -> float:
        return float(np.max(np.abs(self.coefficients)))

    def scaled(self, factor: float) -> "Additive":
        return Additive(self.coefficients / factor, lipschitz=1.0,
                        relevant=self.relevant)


class LinfVectorSum(SetFunction):
    """f(S) = max-norm of the sum of per-element vectors over S."""

    kind = "linf_vector_sum"

    def __init__(self, vectors: Sequence[Sequence[float]],
                 lipschitz: Optional[float] = None,
                 relevant: Optional[frozenset[int]] = None) -> None:
        vecs = np.asarray(vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[0] < 1:
            raise ValueError("vectors must be a nonempty m x d array")
        lip = float(np.max(np.abs(vecs))) if lipschitz is None else lipschitz
        super().__init__(vecs.shape[0], lip, relevant)
        self.vectors = vecs

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        sums = np.zeros((masks.size, self.vectors.shape[1]), dtype=np.float64)
        for g in range(self.m):
            v = self.vectors[g]
            if np.any(v != 0.0):
                sums += _bit_column(masks, g)[:, None] * v[None, :]
        return np.max(np.abs(sums), axis=1)

    def structural_relevant(self) -> frozenset[int]:
        nz = np.any(self.vectors != 0.0, axis=1)
        return frozenset(int(g) for g in np.nonzero(nz)[0])

    def sensitivity_exact(self) -> float:
        # the delta from adding g is at most ||v_g||_inf, attained on the empty set
        return float(np.max(np.abs(self.vectors)))

    def scaled(self, factor: float) -> "LinfVectorSum":
        return LinfVectorSum(self.vectors / factor, lipschitz=1.0,
                             relevant=self.relevant)


class Coverage(SetFunction):
    """Fraction of a finite universe covered by the union of per-element sets.

    Normalizing by the universe size keeps the single-element sensitivity
    at most 1, so these are 1-Lipschitz without rescaling.
    """

    kind = "coverage"

    def __init__(self, cover: Sequence[Iterable[int]], universe_size: int,
                 relevant: Optional[frozenset[int]] = None) -> None:
        if universe_size < 1:
            raise ValueError("universe must be nonempty")
        cover_masks = []
        for sets in cover:
            cm = 0
            for item in sets:
                if not 0 <= item < universe_size:
                    raise ValueError(f"universe item {item} outside 0..{universe_size - 1}")
                cm |= 1 << item
            cover_masks.append(cm)
        if not cover_masks:
            raise ValueError("cover must be nonempty")
        super().__init__(len(cover_masks), 1.0, relevant)
        self.universe_size = universe_size
        self.cover_masks = tuple(cover_masks)

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        if self.universe_size <= 64:
            unions = np.zeros(masks.shape, dtype=np.uint64)
            for g in range(self.m):
                cm = self.cover_masks[g]
                if cm:
                    sel = (masks >> np.uint64(g)) & np.uint64(1) == 1
                    unions[sel] |= np.uint64(cm)
            return popcount_array(unions) / float(self.universe_size)
        # big-universe fallback on Python ints
        out = np.empty(masks.size, dtype=np.float64)
        for i, mask in enumerate(masks.tolist()):
            u = 0
            g = 0
            rest = mask
            while rest:
                if rest & 1:
                    u |= self.cover_masks[g]
                rest >>= 1
                g += 1
            out[i] = u.bit_count() / self.universe_size
        return out

    def structural_relevant(self) -> frozenset[int]:
        return frozenset(g for g, cm in enumerate(self.cover_masks) if cm)

    def structurally_monotone(self) -> bool:
        return True

    def sensitivity_exact(self) -> float:
        # attained when g is added to the empty set
        return max(cm.bit_count() for cm in self.cover_masks) / self.universe_size


class BudgetedAdditive(SetFunction):
    """f(S) = min(additive sum over S, budget)."""

    kind = "budgeted_additive"

    def __init__(self, coefficients: Sequence[float], budget: float,
                 lipschitz: Optional[float] = None,
                 relevant: Optional[frozenset[int]] = None) -> None:
        coeffs = np.asarray(coefficients, dtype=np.float64)
        if coeffs.ndim != 1 or coeffs.size < 1:
            raise ValueError("coefficients must be a nonempty 1-d sequence")
        lip = float(np.max(np.abs(coeffs))) if lipschitz is None else lipschitz
        super().__init__(coeffs.size, lip, relevant)
        self.coefficients = coeffs
        self.budget = float(budget)

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        sums = np.zeros(masks.shape, dtype=np.float64)
        for g in range(self.m):
            c = self.coefficients[g]
            if c != 0.0:
                sums += c * _bit_column(masks, g)
        return np.minimum(sums, self.budget)

    def structural_relevant(self) -> Optional[frozenset[int]]:
        if self.budget <= 0:
            return None  # the cap can silence coefficients; needs an exhaustive scan
        return frozenset(int(g) for g in np.nonzero(self.coefficients)[0])

    def structurally_monotone(self) -> Optional[bool]:
        return True if bool(np.all(self.coefficients >= 0)) else None

    def scaled(self, factor: float) -> "BudgetedAdditive":
        return BudgetedAdditive(self.coefficients / factor, self.budget / factor,
                                lipschitz=1.0, relevant=self.relevant)


class DistToUpset(SetFunction):
    """Hamming distance to the upward closure of a list of generator sets.

    1-Lipschitz and integer-valued by construction.  Generators are
    canonicalized to an antichain (supersets dropped); a dense value table
    can be attached as an evaluation memo for small m.
    """

    kind = "dist_to_upset"

    def __init__(self, m: int, generators: Sequence[int],
                 table: Optional[np.ndarray] = None,
                 relevant: Optional[frozenset[int]] = None) -> None:
        gens = sorted(set(int(g) for g in generators),
                      key=lambda g: (g.bit_count(), g))
        if not gens:
            raise ValueError("at least one generator set is required")
        minimal: list[int] = []
        for g in gens:
            if g >> m:
                raise IndexOutOfRangeError(f"generator {g:#x} outside ground set")
            if not any(q & g == q for q in minimal):
                minimal.append(g)
        super().__init__(m, 1.0, relevant)
        self.generators = tuple(minimal)
        self._table = None if table is None else np.asarray(table)

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        if self._table is not None:
            return self._table[masks.astype(np.int64)].astype(np.float64)
        gen_arr = np.array(self.generators, dtype=np.uint64)
        out = np.empty(masks.size, dtype=np.float64)
        chunk = max(1, (1 << 22) // max(1, gen_arr.size))
        for lo in range(0, masks.size, chunk):
            part = masks[lo:lo + chunk]
            missing = popcount_array((~part[:, None]) & gen_arr[None, :])
            out[lo:lo + chunk] = missing.min(axis=1)
        return out

    def structural_relevant(self) -> frozenset[int]:
        # with an antichain of generators, exactly their union is relevant
        union = 0
        for g in self.generators:
            union |= g
        return frozenset(i for i in range(self.m) if union >> i & 1)


class Tabulated(SetFunction):
    """Explicit value table over all 2^m subsets, m <= 20."""

    kind = "tabulated"

    def __init__(self, m: int, table: Sequence[float],
                 lipschitz: float = 1.0,
                 relevant: Optional[frozenset[int]] = None) -> None:
        if m > TABLE_MAX_M:
            raise TooLargeError(f"tabulated functions are capped at m={TABLE_MAX_M}")
        tab = np.asarray(table, dtype=np.float64)
        if tab.shape != (1 << m,):
            raise ValueError(f"table must have exactly 2^{m} entries")
        super().__init__(m, lipschitz, relevant)
        self.table = tab

    def _value_many(self, masks: np.ndarray) -> np.ndarray:
        return self.table[masks.astype(np.int64)]

    def structural_relevant(self) -> frozenset[int]:
        idx = np.arange(1 << self.m, dtype=np.uint64)
        rel = []
        for g in range(self.m):
            without = idx[(idx >> np.uint64(g)) & np.uint64(1) == 0]
            if np.any(self.table[without.astype(np.int64)]
                      != self.table[(without | np.uint64(1 << g)).astype(np.int64)]):
                rel.append(g)
        return frozenset(rel)

    def scaled(self, factor: float) -> "Tabulated":
        return Tabulated(self.m, self.table / factor, lipschitz=1.0,
                         relevant=self.relevant)


@dataclass(frozen=True)
class Family:
    """An ordered family of set functions over a common ground set."""

    ground: GroundSet
    functions: tuple[SetFunction, ...]

    def __post_init__(self) -> None:
        if not self.functions:
            raise ValueError("a family needs at least one function")
        for f in self.functions:
            if f.m != self.ground.m:
                raise ValueError("all functions must share the family ground set")

    @property
    def n(self) -> int:
        return len(self.functions)

    @property
    def m(self) -> int:
        return self.ground.m


def family(functions: Sequence[SetFunction]) -> Family:
    return Family(GroundSet(functions[0].m), tuple(functions))


# ---------------------------------------------------------------------------
# Lipschitz checking

@dataclass(frozen=True)
class LipschitzCheck:
    """Outcome of a Lipschitz scan.

    `witness` is (subset mask, 1-based element, gap) for a violating
    neighbor pair, or None.  Sampled mode is one-sided: it can miss
    violations, so `mode` must travel with the verdict.
    """

    passed: bool
    mode: str
    witness: Optional[tuple[int, int, float]]
    pairs_checked: int


def _neighbor_scan(f: SetFunction) -> tuple[float, tuple[int, int, float]]:
    """Max |f(S) - f(S+g)| over all neighbor pairs, plus the argmax pair."""
    if f.m > TABLE_MAX_M:
        raise TooLargeError(f"exhaustive neighbor scan needs m <= {TABLE_MAX_M}")
    idx = np.arange(1 << f.m, dtype=np.uint64)
    values = f.value_many(idx)
    worst_gap = -1.0
    worst = (0, 1, 0.0)
    for g in range(f.m):
        without = idx[(idx >> np.uint64(g)) & np.uint64(1) == 0]
        gaps = np.abs(values[(without | np.uint64(1 << g)).astype(np.int64)]
                      - values[without.astype(np.int64)])
        pos = int(np.argmax(gaps))
        if gaps[pos] > worst_gap:
            worst_gap = float(gaps[pos])
            worst = (int(without[pos]), g + 1, float(gaps[pos]))
    return worst_gap, worst


def check_lipschitz(f: SetFunction, mode: str = "exhaustive",
                    trials: int = 10000, seed: int = 0) -> LipschitzCheck:
    """Verify |f(S) - f(S+g)| <= declared constant over neighbor pairs.

    Exhaustive mode scans every pair (requires m <= 20) and is a
    certificate either way.  Sampled mode draws (S, g) pairs at random and
    can only certify failure.
    """
    tol = f.lipschitz + EQ_TOL
    if mode == "exhaustive":
        if f.m > TABLE_MAX_M:
            raise TooLargeError(f"exhaustive check needs m <= {TABLE_MAX_M}")
        worst_gap, worst = _neighbor_scan(f)
        pairs = (1 << (f.m - 1)) * f.m
        if worst_gap > tol:
            return LipschitzCheck(False, "exhaustive", worst, pairs)
        return LipschitzCheck(True, "exhaustive", None, pairs)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    rng = derive_rng(seed, 0x11C5)
    masks = rng.integers(0, 1 << f.m, size=trials, dtype=np.uint64)
    gs = rng.integers(0, f.m, size=trials)
    masks &= ~(np.uint64(1) << gs.astype(np.uint64))  # scan from the g-free side
    base = f.value_many(masks)
    bumped = f.value_many(masks | (np.uint64(1) << gs.astype(np.uint64)))
    gaps = np.abs(bumped - base)
    pos = int(np.argmax(gaps))
    if gaps[pos] > tol:
        witness = (int(masks[pos]), int(gs[pos]) + 1, float(gaps[pos]))
        return LipschitzCheck(False, "sampled", witness, trials)
    return LipschitzCheck(True, "sampled", None, trials)


# ---------------------------------------------------------------------------
# multilinear extension

def as_marginals(x: Sequence[float], m: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (m,):
        raise ValueError(f"expected a length-{m} vector")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("marginals must lie in [0, 1]")
    return arr


def indicator_point(mask: int, m: int) -> np.ndarray:
    x = np.zeros(m, dtype=np.float64)
    for g in range(m):
        if mask >> g & 1:
            x[g] = 1.0
    return x


def support_masks_and_weights(x: np.ndarray,
                              support_cap: int = SUPPORT_CAP
                              ) -> tuple[np.ndarray, np.ndarray]:
    """All subset masks reachable under independent inclusion with marginals x,
    paired with their product probabilities.

    Integral coordinates are fixed; only strictly fractional ones are
    enumerated, so the arrays have 2^q entries for q fractional coordinates.
    """
    frac = np.nonzero((x > 0.0) & (x < 1.0))[0]
    if frac.size > support_cap:
        raise SupportTooLargeError(
            f"{frac.size} fractional coordinates exceed the cap of {support_cap}"
        )
    base = 0
    for g in np.nonzero(x == 1.0)[0]:
        base |= 1 << int(g)
    masks = np.array([base], dtype=np.uint64)
    weights = np.ones(1, dtype=np.float64)
    for g in frac:
        p = x[g]
        masks = np.concatenate([masks, masks | np.uint64(1 << int(g))])
        weights = np.concatenate([weights * (1.0 - p), weights * p])
    return masks, weights


def multilinear_exact(f: SetFunction, x: Sequence[float],
                      support_cap: int = SUPPORT_CAP) -> float:
    """Exact expectation of f under independent inclusion with marginals x."""
    arr = as_marginals(x, f.m)
    masks, weights = support_masks_and_weights(arr, support_cap)
    return float(weights @ f.value_many(masks))


def multilinear_mc(f: SetFunction, x: Sequence[float], samples: int,
                   seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of the multilinear extension.

    Sampling is blocked, with one derived stream per (seed, block), so the
    estimate is identical however blocks are scheduled.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    arr = as_marginals(x, f.m)
    shifts = np.arange(f.m, dtype=np.uint64)
    block = 4096
    values = np.empty(samples, dtype=np.float64)
    for b, lo in enumerate(range(0, samples, block)):
        size = min(block, samples - lo)
        rng = derive_rng(seed, 0x3C, b)
        bits = rng.random((size, f.m)) < arr
        masks = (bits.astype(np.uint64) << shifts).sum(axis=1, dtype=np.uint64)
        values[lo:lo + size] = f.value_many(masks)
    est = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(samples))
    return est, stderr


# ---------------------------------------------------------------------------
# rescaling

def rescale_to_unit_lipschitz(f: SetFunction) -> tuple[SetFunction, float]:
    """Divide f by its exact max single-element sensitivity L; returns (f/L, L).

    Structured kinds give L in closed form; otherwise an exhaustive
    neighbor scan (m <= 20) finds it.  A zero function is returned
    unchanged with factor 1.
    """
    sens = f.sensitivity_exact()
    if sens is None:
        sens, _ = _neighbor_scan(f)  # raises for m > cap via value_many size
    if sens <= 0.0:
        return f, 1.0
    scaled = f.scaled(sens)
    if scaled is None:
        # kinds without a scale knob are materialized as a table
        if f.m > TABLE_MAX_M:
            raise TooLargeError("cannot materialize a scaled copy above the table cap")
        table = f.value_many(np.arange(1 << f.m, dtype=np.uint64)) / sens
        scaled = Tabulated(f.m, table, lipschitz=1.0, relevant=f.relevant)
    return scaled, float(sens)


# ---------------------------------------------------------------------------
# misc

def masks_of_coloring(chi: np.ndarray, k: int) -> list[int]:
    """Bitmask of each color class of a 0-based coloring array."""
    masks = [0] * k
    for g, c in enumerate(chi.tolist()):
        masks[c] |= 1 << g
    return masks


def subsets_of_mask(mask: int, size: int) -> Iterable[int]:
    """All sub-bitmasks of `mask` with exactly `size` bits set."""
    bits = [1 << g for g in range(mask.bit_length()) if mask >> g & 1]
    for combo in itertools.combinations(bits, size):
        sub = 0
        for b in combo:
            sub |= b
        yield sub
