"""Boolean-cube machinery: vertices, biased measures, samplers and influences.

A vertex of the n-dimensional Boolean cube encodes a subset of n items as a
bitmask.  Bit i of the mask is component i of the vertex; in string form the
component with index 0 is written leftmost, so ``Vertex.from_string("101")``
has bits 0 and 2 set.

Boolean functions over the cube are represented by any callable object with
an ``n`` attribute that maps a bitmask to 0 or 1.  Functions that can produce
their full truth table cheaply may expose a ``truth_table()`` method; the
exact-influence routines use it when present.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import BudgetError

# Exhaustive 2**n work is refused above this dimension.
ENUMERATION_CAP = 22

WORKERS_ENV_VAR = "MAXCON_WORKERS"


def resolve_workers(workers: int | None) -> int:
    """Resolve a worker count, falling back to the environment default."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


# --------------------------------------------------------------------------
# Vertices
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Vertex:
    """A vertex of the n-dimensional Boolean cube, stored as a bitmask."""

    bits: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"dimension must be nonnegative, got {self.n}")
        if not 0 <= self.bits < (1 << self.n):
            raise ValueError(f"bits {self.bits:#x} out of range for n={self.n}")

    @property
    def level(self) -> int:
        """Number of set components (the Hamming weight)."""
        return self.bits.bit_count()

    def bit(self, i: int) -> int:
        self._check_index(i)
        return (self.bits >> i) & 1

    def flip(self, i: int) -> "Vertex":
        """Return the vertex with component i toggled."""
        self._check_index(i)
        return Vertex(self.bits ^ (1 << i), self.n)

    def intersect(self, other: "Vertex") -> "Vertex":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return Vertex(self.bits & other.bits, self.n)

    def issubset(self, other: "Vertex") -> bool:
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        return self.bits & ~other.bits == 0

    def indices(self) -> tuple[int, ...]:
        """Indices of the set components, ascending."""
        return tuple(i for i in range(self.n) if (self.bits >> i) & 1)

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "Vertex":
        bits = 0
        for i in indices:
            if not 0 <= i < n:
                raise IndexError(f"index {i} out of range for n={n}")
            bits |= 1 << i
        return cls(bits, n)

    @classmethod
    def from_string(cls, s: str) -> "Vertex":
        """Parse a bitstring; the character at string position i is component i."""
        if set(s) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {s!r}")
        bits = 0
        for i, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << i
        return cls(bits, len(s))

    def __str__(self) -> str:
        return "".join("1" if (self.bits >> i) & 1 else "0" for i in range(self.n))

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"component {i} out of range for n={self.n}")


def flip(v: Vertex, i: int) -> Vertex:
    """Toggle component i of a vertex; an involution."""
    return v.flip(i)


def as_mask(subset: "Vertex | int | Iterable[int]", n: int) -> int:
    """Coerce a vertex, bitmask or index iterable to a bitmask of width n."""
    if isinstance(subset, Vertex):
        if subset.n != n:
            raise ValueError(f"vertex dimension {subset.n} != {n}")
        return subset.bits
    if isinstance(subset, (int, np.integer)):
        bits = int(subset)
        if not 0 <= bits < (1 << n):
            raise ValueError(f"mask {bits:#x} out of range for n={n}")
        return bits
    return Vertex.from_indices(subset, n).bits


# --------------------------------------------------------------------------
# Measures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BernoulliMeasure:
    """Product measure on the cube where each bit is 1 with probability q."""

    q: float

    def __post_init__(self) -> None:
        _check_q(self.q)

    @property
    def q_minus(self) -> float:
        return -math.sqrt((1.0 - self.q) / self.q)

    @property
    def q_plus(self) -> float:
        return math.sqrt(self.q / (1.0 - self.q))

    def weight(self, v: Vertex) -> float:
        return measure(v, self.q)


def _check_q(q) -> None:
    if not 0 < q < 1:
        raise ValueError(f"q must lie in (0, 1), got {q}")


def measure(v: Vertex, q) -> "float | Fraction":
    """Probability of vertex v under the product measure with bit bias q.

    Accepts a ``Fraction`` q and then returns an exact rational value.
    """
    _check_q(q)
    k = v.level
    return q**k * (1 - q) ** (v.n - k)


def level_weights(n: int, q) -> list:
    """Per-level vertex weights q**l * (1-q)**(n-l) for l = 0..n."""
    _check_q(q)
    return [q**l * (1 - q) ** (n - l) for l in range(n + 1)]


# --------------------------------------------------------------------------
# Samplers
# --------------------------------------------------------------------------


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def substream(seed, key: int) -> np.random.Generator:
    """Deterministic child stream for (seed, key).

    Derivation depends only on the pair, not on the order in which keys are
    requested, so per-index estimation is reproducible under any schedule.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + (key,)
        )
    else:
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(key,))
    return np.random.default_rng(ss)


def sample_bernoulli(n: int, q: float, rng) -> Vertex:
    """Draw a vertex with independent Bernoulli(q) bits."""
    _check_q(q)
    gen = _as_generator(rng)
    row = gen.random(n) < q
    bits = 0
    for i in np.flatnonzero(row):
        bits |= 1 << int(i)
    return Vertex(bits, n)

def sample_level(n: int, k: int, rng) -> Vertex:
    """Draw a uniformly random vertex with exactly k set bits."""
    if not 0 <= k <= n:
        raise ValueError(f"level {k} out of range for n={n}")
    gen = _as_generator(rng)
    picks = gen.choice(n, size=k, replace=False)
    bits = 0
    for i in picks:
        bits |= 1 << int(i)
    return Vertex(bits, n)


# --------------------------------------------------------------------------
# Boolean functions, truth tables
# --------------------------------------------------------------------------


@runtime_checkable
class BooleanFunction(Protocol):
    n: int

    def __call__(self, bits: int) -> int: ...


@dataclass(frozen=True)
class TabulatedFunction:
    """Boolean function backed by an explicit truth table."""

    table: np.ndarray
    n: int

    def __post_init__(self) -> None:
        if self.table.shape != (1 << self.n,):
            raise ValueError("table length must be 2**n")

    def __call__(self, bits: int) -> int:
        return int(self.table[bits])

    def truth_table(self) -> np.ndarray:
        return self.table

    @classmethod
    def from_function(cls, f: BooleanFunction) -> "TabulatedFunction":
        return cls(truth_table(f), f.n)


@dataclass(frozen=True)
class RestrictedFunction:
    """A Boolean function on the sub-cube spanned by selected parent indices.

    Component j of the restricted cube maps to parent index ``index_map[j]``;
    all other parent components are fixed to 0.
    """

    parent: Callable[[int], int]
    index_map: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.index_map)

    def __call__(self, bits: int) -> int:
        expanded = 0
        rest = bits
        while rest:
            low = rest & -rest
            expanded |= 1 << self.index_map[low.bit_length() - 1]
            rest ^= low
        return self.parent(expanded)


def _check_cap(n: int, cap: int = ENUMERATION_CAP) -> None:
    if n > cap:
        raise BudgetError(
            f"exhaustive enumeration over 2**{n} vertices exceeds the cap of 2**{cap}"
        )


def truth_table(f: BooleanFunction, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Full truth table of f as a uint8 array indexed by bitmask."""
    own = getattr(f, "truth_table", None)
    if own is not None:
        table = np.asarray(own(), dtype=np.uint8)
        return table
    _check_cap(f.n, cap)
    return np.fromiter((f(bits) for bits in range(1 << f.n)), dtype=np.uint8)


@lru_cache(maxsize=8)
def level_table(n: int) -> np.ndarray:
    """levels[m] = popcount(m) for every mask m < 2**n."""
    _check_cap(n)
    lv = np.zeros(1, dtype=np.uint8)
    for _ in range(n):
        lv = np.concatenate([lv, lv + 1])
    return lv


def upward_closure_table(n: int, generators: Iterable[int]) -> np.ndarray:
    """Truth table of the monotone function generated by the given masks.

    f(b) = 1 iff some generator is a subset of b.
    """
    _check_cap(n)
    table = np.zeros(1 << n, dtype=np.uint8)
    for g in generators:
        table[int(g)] = 1
    for i in range(n):
        block = 1 << i
        view = table.reshape(-1, 2 * block)
        view[:, block:] |= view[:, :block]
    return table


# --------------------------------------------------------------------------
# Exact influences and first-order Fourier coefficients
# --------------------------------------------------------------------------


def flip_profile(f: BooleanFunction, i: int, table: np.ndarray | None = None) -> np.ndarray:
    """Per-level counts of vertices whose value changes when bit i is flipped.

    Entry l counts the vertices b at level l with f(b) != f(b ^ (1 << i)).
    These integer counts determine the exact influence under any level-based
    measure, so the biased and slice-uniform variants share this primitive.
    """
    tbl = table if table is not None else truth_table(f)
    n = f.n
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for n={n}")
    idx = np.arange(1 << n, dtype=np.int64)
    diff = tbl != tbl[idx ^ (1 << i)]
    return np.bincount(level_table(n)[diff], minlength=n + 1).astype(np.int64)


def exact_weighted_influence(
    f: BooleanFunction, i: int, q, table: np.ndarray | None = None
) -> "float | Fraction":
    """Measure of the flip-sensitive set of bit i under bit bias q.

    Exact rational output when q is a ``Fraction``.
    """
    _check_q(q)
    profile = flip_profile(f, i, table)
    weights = level_weights(f.n, q)
    total = sum(int(c) * w for c, w in zip(profile, weights))
    if isinstance(q, Fraction):
        return total
    return float(total)


def exact_fourier_first_order(
    f: BooleanFunction, i: int, q: float, table: np.ndarray | None = None
) -> float:
    """First-order Fourier coefficient of f on bit i in the biased parity basis."""
    _check_q(q)
    q = float(q)
    tbl = table if table is not None else truth_table(f)
    n = f.n
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for n={n}")
    idx = np.arange(1 << n, dtype=np.int64)
    ones = tbl != 0
    bit_set = (idx >> i) & 1 == 1
    levels = level_table(n)
    c_set = np.bincount(levels[ones & bit_set], minlength=n + 1)
    c_unset = np.bincount(levels[ones & ~bit_set], minlength=n + 1)
    weights = level_weights(n, q)
    m = BernoulliMeasure(q)
    s_set = sum(int(c) * w for c, w in zip(c_set, weights))
    s_unset = sum(int(c) * w for c, w in zip(c_unset, weights))
    return m.q_minus * s_set + m.q_plus * s_unset


# --------------------------------------------------------------------------
# Influence reports and sampled estimators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InfluenceReport:
    """Per-index influence scores with their sampling provenance."""

    measure: str  # "bernoulli" | "hamming" | "exact"
    q_or_level: float | int
    h: int
    seed: int | None
    scores: Mapping[int, float]
    n: int
    mode: str | None = None

    def ranked_indices(self) -> list[int]:
        """Indices by decreasing score; ties broken by ascending index."""
        return sorted(self.scores, key=lambda i: (-self.scores[i], i))

    def to_json_dict(self) -> dict:
        out = {
            "measure": self.measure,
            "q_or_level": self.q_or_level,
            "h": self.h,
            "seed": self.seed,
            "scores": [
                {"index": int(i), "value": float(v)} for i, v in sorted(self.scores.items())
            ],
        }
        if self.mode is not None:
            out["mode"] = self.mode
        return out

    @classmethod
    def from_json_dict(cls, d: dict, n: int | None = None) -> "InfluenceReport":
        scores = {int(e["index"]): float(e["value"]) for e in d["scores"]}
        dim = n if n is not None else (max(scores) + 1 if scores else 0)
        return cls(
            measure=d["measure"],
            q_or_level=d["q_or_level"],
            h=int(d["h"]),
            seed=d.get("seed"),
            scores=scores,
            n=dim,
            mode=d.get("mode"),
        )


def exact_influence_report(
    f: BooleanFunction, q, indices: Sequence[int] | None = None
) -> InfluenceReport:
    """Exact influences for the given indices (all of them by default)."""
    tbl = truth_table(f)
    idx = range(f.n) if indices is None else indices
    scores = {int(i): float(exact_weighted_influence(f, int(i), q, tbl)) for i in idx}
    return InfluenceReport(
        measure="exact", q_or_level=float(q), h=0, seed=None, scores=scores, n=f.n
    )


def _map_indices(fn, indices, workers):
    nworkers = resolve_workers(workers)
    if nworkers <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        return list(pool.map(fn, indices))


def _flip_value(f, bits: int, fb: int, i: int) -> int:
    """f at the i-flip of bits, using monotonicity to skip implied calls.

    Dropping a bit from a 0-vertex stays 0; adding a bit to a 1-vertex stays 1.
    """
    if fb == 0 and (bits >> i) & 1:
        return 0
    if fb == 1 and not (bits >> i) & 1:
        return 1
    return f(bits ^ (1 << i))


def estimate_influence_bernoulli(
    f: BooleanFunction,
    indices: Sequence[int],
    q: float,
    h: int,
    seed,
    mode: str = "paper",
    workers: int | None = None,
) -> InfluenceReport:
    """Sampled influence under bit bias q from h/2 draws paired with their flips.

    For each index the base vertices are drawn from the product measure and the
    second half of the sample is their i-flips.  In "paper" mode each term is
    additionally weighted by the drawn vertex's own measure and the sum is
    divided by h; in "unbiased" mode the measure factor is dropped and the sum
    is divided by the actual sample count 2*(h//2), so at q = 1/2 the mean is
    an unbiased estimate of the first-order Fourier coefficient before the
    final -1/sqrt(q(1-q)) scaling.

    Each index consumes an independent substream derived from (seed, index),
    so results are identical for any worker count.
    """
    _check_q(q)
    if h < 2:
        raise ValueError(f"sample count h must be at least 2, got {h}")
    if mode not in ("paper", "unbiased"):
        raise ValueError(f"unknown estimator mode {mode!r}")
    n = f.n
    m = BernoulliMeasure(q)
    q_minus, q_plus = m.q_minus, m.q_plus
    weights = level_weights(n, float(q)) if mode == "paper" else None
    half = h // 2
    denom = h if mode == "paper" else 2 * half
    scale = -1.0 / (denom * math.sqrt(q * (1.0 - q)))

    def one_index(i: int) -> tuple[int, float]:
        if not 0 <= i < n:
            raise IndexError(f"index {i} out of range for n={n}")
        gen = substream(seed, i)
        rows = gen.random((half, n)) < q
        acc = 0.0
        for row in rows:
            bits = 0
            for j in np.flatnonzero(row):
                bits |= 1 << int(j)
            fb = f(bits)
            fc = _flip_value(f, bits, fb, i)
            bit_i = (bits >> i) & 1
            flipped = bits ^ (1 << i)
            chi_b = q_minus if bit_i else q_plus
            chi_c = q_plus if bit_i else q_minus
            if mode == "paper":
                acc += fb * chi_b * weights[bits.bit_count()]
                acc += fc * chi_c * weights[flipped.bit_count()]
            else:
                acc += fb * chi_b + fc * chi_c
        return i, (scale * acc) + 0.0

    scores = dict(_map_indices(one_index, list(indices), workers))
    base_seed = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    return InfluenceReport(
        measure="bernoulli",
        q_or_level=float(q),
        h=h,
        seed=base_seed,
        scores=scores,
        n=n,
        mode=mode,
    )


def estimate_influence_hamming(
    f: BooleanFunction,
    indices: Sequence[int],
    k: int,
    h: int,
    seed,
    workers: int | None = None,
) -> InfluenceReport:
    """Fraction of h uniform level-k vertices whose value flips with bit i.

    Scores are left unnormalised (fractions of h rather than slice measures)
    since only their relative order is consumed.  Flips cross to level k-1 or
    k+1 depending on the sampled bit.
    """
    n = f.n
    if not 0 <= k <= n:
        raise ValueError(f"level {k} out of range for n={n}")
    if h < 1:
        raise ValueError(f"sample count h must be at least 1, got {h}")

    def one_index(i: int) -> tuple[int, float]:
        if not 0 <= i < n:
            raise IndexError(f"index {i} out of range for n={n}")
        gen = substream(seed, i)
        hits = 0
        for _ in range(h):
            picks = gen.choice(n, size=k, replace=False)
            bits = 0
            for j in picks:
                bits |= 1 << int(j)
            fb = f(bits)
            if fb != _flip_value(f, bits, fb, i):
                hits += 1
        return i, hits / h

    scores = dict(_map_indices(one_index, list(indices), workers))
    base_seed = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    return InfluenceReport(
        measure="hamming", q_or_level=int(k), h=h, seed=base_seed, scores=scores, n=n
    )
