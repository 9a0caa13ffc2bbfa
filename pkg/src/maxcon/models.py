"""Linear-residual model fitting and the subset-feasibility oracle.

The residual of point i under parameters theta is |a_i . theta - y_i|.  A
subset of points is feasible at threshold eps when its best Chebyshev
(minimax) fit has value <= eps.  Subsets of size <= p are treated as feasible
without solving: p points can be interpolated by a p-parameter model in
general position, and the combinatorial dimension of the problem is p + 1.

Feasibility of a subset is monotone under inclusion, which makes the
indicator of infeasibility a monotone Boolean function on the cube of data
subsets.  By Helly's theorem for the convex residual slabs in R^p, a subset
is infeasible iff it contains an infeasible subset of size p + 1, which the
truth-table tabulation exploits.
"""

from __future__ import annotations

import itertools
import math
import threading
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from . import cube
from .cube import as_mask, upward_closure_table
from .errors import BudgetError, ContractError, SolverError

# Relative tolerance for membership in the active set of a minimax fit.
ACTIVE_SET_RTOL = 1e-8

# Default refusal threshold for enumerating all (p+1)-subsets.
DEFAULT_MAX_BASES = 200_000


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


def _frozen_array(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LinearDataset:
    """n data points with feature rows a_i and scalar responses y_i."""

    features: np.ndarray
    responses: np.ndarray

    def __post_init__(self) -> None:
        feats = _frozen_array(self.features)
        resp = _frozen_array(self.responses)
        if feats.ndim != 2:
            raise ValueError("features must be a 2d array")
        if resp.ndim != 1:
            raise ValueError("responses must be a 1d array")
        if feats.shape[0] != resp.shape[0]:
            raise ValueError("features and responses disagree on n")
        if feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("need n >= 1 points and p >= 1 features")
        if not (np.isfinite(feats).all() and np.isfinite(resp).all()):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "responses", resp)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def rows(self, indices) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(indices, dtype=np.intp)
        return self.features[idx], self.responses[idx]


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector of a p-dimensional linear model."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        th = _frozen_array(self.theta)
        if th.ndim != 1:
            raise ValueError("theta must be a 1d vector")
        if not np.isfinite(th).all():
            raise ValueError("theta entries must be finite")
        object.__setattr__(self, "theta", th)


def _as_theta(theta) -> np.ndarray:
    if isinstance(theta, ModelParams):
        return theta.theta
    arr = np.asarray(theta, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("theta must be a 1d vector")
    return arr


@dataclass(frozen=True)
class MinimaxFit:
    """Result of a Chebyshev fit: parameters, optimal value, active points."""

    theta: ModelParams
    value: float
    active_set: tuple[int, ...]


# --------------------------------------------------------------------------
# Residuals and minimax fitting
# --------------------------------------------------------------------------


def residual(dataset: LinearDataset, i: int, theta) -> float:
    """Absolute residual |a_i . theta - y_i| of point i."""
    if not 0 <= i < dataset.n:
        raise IndexError(f"point index {i} out of range for n={dataset.n}")
    th = _as_theta(theta)
    if th.shape != (dataset.p,):
        raise ValueError(f"theta must have length {dataset.p}")
    r = float(abs(dataset.features[i] @ th - dataset.responses[i]))
    if not math.isfinite(r):
        raise ValueError("residual is not finite; malformed input")
    return r


def residuals(dataset: LinearDataset, theta) -> np.ndarray:
    """All absolute residuals under theta."""
    th = _as_theta(theta)
    return np.abs(dataset.features @ th - dataset.responses)


def _chebyshev_lp(A: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Solve min_theta max_i |A theta - y| as an LP; returns (value, theta, resid)."""
    m, p = A.shape
    c = np.zeros(p + 1)
    c[-1] = 1.0
    col = -np.ones((m, 1))
    a_ub = np.block([[A, col], [-A, col]])
    b_ub = np.concatenate([y, -y])
    bounds = [(None, None)] * p + [(0.0, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"Chebyshev LP failed with status {res.status}: {res.message}")
    theta = np.asarray(res.x[:p], dtype=np.float64)
    resid = np.abs(A @ theta - y)
    return float(resid.max()), theta, resid


def _exchange_feasibility(
    A: np.ndarray, y: np.ndarray, eps: float, theta0: np.ndarray | None, max_iter: int = 8
) -> tuple[int | None, np.ndarray | None]:
    """Certified feasibility of max |A theta - y| <= eps by reference ascent.

    Maintains a reference of p+1 points.  The reference's own minimax value
    h = |v . y_R| / ||v||_1 (v spanning the null space of A_R transposed) is a
    lower bound for the whole system, so h > eps certifies infeasibility; a
    levelled solution whose residuals all fit within eps certifies
    feasibility.  Otherwise the worst point enters the reference by a dual
    ratio test and the bound ascends.  Returns (None, None) instead of
    guessing whenever the arithmetic turns degenerate or the iteration cap is
    hit, so every produced answer carries an explicit certificate:
    (1, reference_rows) or (0, theta).  Infeasible queries typically certify
    within a few exchanges; the cap keeps feasible-side probes cheap.
    """
    m, p = A.shape
    if m < p + 1:
        return None, None
    if m == p + 1:
        ref = np.arange(m)
    else:
        if theta0 is None:
            theta0, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = np.abs(A @ theta0 - y)
        ref = np.sort(np.argpartition(resid, m - p - 1)[m - p - 1 :])
    k = p + 1
    square = np.empty((k, k))
    basis = np.empty((k, k))
    enter = np.empty(k)
    for _ in range(max_iter):
        a_ref = A[ref]
        # null vector of the reference feature block's transpose
        square[:, :p] = a_ref
        square[:, p] = 0.0
        square[0, p] = 1.0
        try:
            nullvec = np.linalg.solve(square.T, np.eye(k)[p])
        except np.linalg.LinAlgError:
            return None, None
        scale = np.abs(nullvec).sum()
        if not np.isfinite(scale) or scale < 1e-12:
            return None, None
        corr = float(nullvec @ y[ref])
        if abs(corr) / scale > eps:
            return 1, ref
        sigma = np.sign(nullvec) * (1.0 if corr >= 0 else -1.0)
        if np.any(sigma == 0):
            return None, None
        square[:, :p] = a_ref
        square[:, p] = -sigma
        try:
            sol = np.linalg.solve(square, y[ref])
        except np.linalg.LinAlgError:
            return None, None
        theta = sol[:p]
        full_resid = A @ theta - y
        w = int(np.argmax(np.abs(full_resid)))
        if abs(full_resid[w]) <= eps:
            return 0, theta
        # dual ratio test: bring w in, drop the reference member that keeps
        # the multipliers nonnegative
        lam = np.abs(nullvec) / scale
        basis[:p, :] = sigma * a_ref.T
        basis[p, :] = 1.0
        enter[:p] = np.sign(full_resid[w]) * A[w]
        enter[p] = 1.0
        try:
            mu = np.linalg.solve(basis, enter)
        except np.linalg.LinAlgError:
            return None, None
        positive = mu > 1e-12
        if not positive.any():
            return None, None
        ratios = np.where(positive, lam / np.where(positive, mu, 1.0), np.inf)
        ref = ref.copy()
        ref[int(np.argmin(ratios))] = w
    return None, None


def minimax_fit(dataset: LinearDataset, subset: Iterable[int] | None = None) -> MinimaxFit:
    """Chebyshev fit over a subset of points (all points by default).

    The reported value is the largest achieved residual of the optimal
    parameters, and the active set holds the subset members whose residual is
    within a relative tolerance of that value.
    """
    if subset is None:
        idx = tuple(range(dataset.n))
    else:
        idx = tuple(sorted(set(int(i) for i in subset)))
    if not idx:
        raise ContractError("minimax_fit requires a nonempty subset")
    if idx[0] < 0 or idx[-1] >= dataset.n:
        raise IndexError("subset index out of range")
    A, y = dataset.rows(idx)
    value, theta, resid = _chebyshev_lp(A, y)
    tau = ACTIVE_SET_RTOL * (1.0 + value)
    active = tuple(idx[j] for j in np.flatnonzero(resid >= value - tau))
    return MinimaxFit(theta=ModelParams(theta), value=value, active_set=active)


def basis(dataset: LinearDataset, subset: Iterable[int], epsilon: float) -> tuple[int, ...]:
    """Active support of the minimax fit of an infeasible subset.

    In general position this has at most p + 1 members; degenerate data can
    yield more, and every member is kept as an influence candidate.
    """
    fit = minimax_fit(dataset, subset)
    if fit.value <= epsilon:
        raise ContractError(
            f"basis requires an infeasible subset (minimax value {fit.value} <= {epsilon})"
        )
    return fit.active_set


# --------------------------------------------------------------------------
# Batched Chebyshev fits over all (p+1)-subsets
# --------------------------------------------------------------------------


def _sign_patterns(m: int) -> np.ndarray:
    """All sign vectors of length m with leading +1, shape (2**(m-1), m)."""
    pats = np.arange(1 << (m - 1))
    signs = np.ones((len(pats), m))
    for i in range(1, m):
        signs[:, i] = 1.0 - 2.0 * ((pats >> (i - 1)) & 1)
    return signs


def _chebyshev_combos(
    A: np.ndarray, y: np.ndarray, combos: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev values and parameters for many (p+1)-point subsets at once.

    For p + 1 points the optimum is attained at a vertex where every point's
    residual equals +-t, so solving the square system [A | -s] x = y for each
    sign pattern s and taking the candidate with the smallest verified maximum
    residual recovers the exact fit.  Exactly singular systems are skipped via
    an identity substitute (their verified residuals never win), and subsets
    singular under every pattern fall back to the LP.
    """
    S, m = combos.shape
    p = m - 1
    signs = _sign_patterns(m)
    P = signs.shape[0]
    values = np.empty(S)
    thetas = np.empty((S, p))
    chunk = max(1, int(2_000_000 // max(P * m * m, 1)))
    for lo in range(0, S, chunk):
        sel = combos[lo : lo + chunk]
        A_sub = A[sel]  # (s, m, p)
        y_sub = y[sel]  # (s, m)
        s = sel.shape[0]
        M = np.empty((s, P, m, m))
        M[..., :p] = A_sub[:, None, :, :]
        M[..., p] = -signs[None, :, :]
        dets = np.linalg.det(M)
        singular = dets == 0.0
        if singular.any():
            M[singular] = np.eye(m)
        x = np.linalg.solve(M, np.broadcast_to(y_sub[:, None, :, None], (s, P, m, 1)))
        th = x[..., :p, 0]  # (s, P, p)
        pred = np.einsum("smp,sKp->sKm", A_sub, th)
        achieved = np.abs(pred - y_sub[:, None, :]).max(axis=-1)
        achieved = np.where(np.isnan(achieved) | singular, np.inf, achieved)
        best = np.argmin(achieved, axis=1)
        rows = np.arange(s)
        values[lo : lo + s] = achieved[rows, best]
        thetas[lo : lo + s] = th[rows, best]
        degenerate = np.flatnonzero(singular.all(axis=1))
        for d in degenerate:
            val, theta, _ = _chebyshev_lp(A_sub[d], y_sub[d])
            values[lo + d] = val
            thetas[lo + d] = theta
    return values, thetas


# --------------------------------------------------------------------------
# Feasibility oracle
# --------------------------------------------------------------------------


def _mask_rows(mask: int, n: int) -> np.ndarray:
    nbytes = (n + 7) // 8
    packed = np.frombuffer(mask.to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(packed, bitorder="little")[:n])


class FeasibilityOracle:
    """Monotone Boolean infeasibility indicator over subsets of a dataset.

    Evaluating a subset returns 1 iff its minimax value exceeds epsilon.
    Subsets of size <= p return 0 without solving.  Results are memoised, and
    three exact certificate layers answer most queries without a full LP:

    - feasibility: cached parameter vectors (kept ranked by how many points
      of the whole dataset they cover, and polished by re-fits on their own
      consensus) whose residuals on the queried points are all within epsilon;
    - infeasibility: cached small infeasible cores contained in the query;
    - either: the certified exchange ascent, which terminates only with an
      explicit infeasible core or an explicit within-epsilon parameter vector.

    Only queries where the ascent goes degenerate pay for a full-size LP, and
    every answer is backed by the same exact criteria the LP would apply.
    Concurrent queries are permitted; counters are updated under a lock.
    """

    def __init__(
        self,
        dataset: LinearDataset,
        epsilon: float,
        cache: bool = True,
        theta_cache_size: int = 24,
        witness_cache_size: int = 128,
    ) -> None:
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.dataset = dataset
        self.epsilon = float(epsilon)
        self._memo: dict[int, int] | None = {} if cache else None
        self._theta_cache_size = theta_cache_size
        self._thetas: list[tuple[int, np.ndarray]] = []  # (coverage, theta), best first
        self._witnesses: deque[int] = deque(maxlen=witness_cache_size)
        self._lock = threading.Lock()
        self._evals = 0
        self._lp_solves = 0
        self._core_tests = 0

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def p(self) -> int:
        return self.dataset.p

    @property
    def evaluations(self) -> int:
        """Number of feasibility queries answered."""
        return self._evals

    @property
    def lp_solves(self) -> int:
        """Number of queries that required a full-size LP solve."""
        return self._lp_solves

    @property
    def core_tests(self) -> int:
        """Number of certified exchange-ascent solves attempted."""
        return self._core_tests

    def reset_counters(self) -> None:
        with self._lock:
            self._evals = 0
            self._lp_solves = 0
            self._core_tests = 0

    def __call__(self, subset) -> int:
        mask = as_mask(subset, self.n)
        with self._lock:
            self._evals += 1
        if mask.bit_count() <= self.p:
            return 0
        if self._memo is not None:
            hit = self._memo.get(mask)
            if hit is not None:
                return hit
        for w in tuple(self._witnesses):
            if w & mask == w:
                self._remember(mask, 1)
                return 1
        rows = _mask_rows(mask, self.n)
        A = self.dataset.features[rows]
        y = self.dataset.responses[rows]
        best_theta = None
        for _, theta in tuple(self._thetas):
            if np.abs(A @ theta - y).max() <= self.epsilon:
                self._remember(mask, 0)
                return 0
            if best_theta is None:
                best_theta = theta
        with self._lock:
            self._core_tests += 1
        verdict, evidence = _exchange_feasibility(A, y, self.epsilon, best_theta)
        if verdict == 1:
            witness = 0
            for j in evidence:
                witness |= 1 << int(rows[j])
            self._witnesses.appendleft(witness)
            self._remember(mask, 1)
            return 1
        if verdict == 0:
            self._consider_theta(evidence, polish=False)
            self._remember(mask, 0)
            return 0
        with self._lock:
            self._lp_solves += 1
        value, theta, resid = _chebyshev_lp(A, y)
        if value <= self.epsilon:
            # keep the raw fit too: it may cover a borderline point that the
            # coverage-polished variant gives up
            self._consider_theta(theta, polish=False)
            self._consider_theta(theta)
            self._remember(mask, 0)
            return 0
        tau = ACTIVE_SET_RTOL * (1.0 + value)
        witness = 0
        for j in np.flatnonzero(resid >= value - tau):
            witness |= 1 << int(rows[j])
        self._witnesses.appendleft(witness)
        self._remember(mask, 1)
        return 1

    def _remember(self, mask: int, bit: int) -> None:
        if self._memo is not None:
            self._memo[mask] = bit

    def _consider_theta(self, theta: np.ndarray, polish: bool = True) -> None:
        """Cache a feasibility certificate, ranked by dataset coverage.

        When polishing, least-squares re-fits on the parameters' own
        consensus set lift a subset-tight fit toward global coverage, and a
        final minimax re-fit near the coverage frontier centres the residual
        band.  Unpolished fits are kept as well: a tilted fit that absorbs a
        borderline point covers future queries containing that point.
        """
        feats, resp = self.dataset.features, self.dataset.responses
        resid = np.abs(feats @ theta - resp)
        cov = int((resid <= self.epsilon).sum())
        if len(self._thetas) >= self._theta_cache_size and cov < self._thetas[-1][0] - 5:
            return
        if polish:
            for _ in range(2):
                members = resid <= self.epsilon
                if members.sum() <= self.p:
                    break
                refit, *_ = np.linalg.lstsq(feats[members], resp[members], rcond=None)
                r2 = np.abs(feats @ refit - resp)
                c2 = int((r2 <= self.epsilon).sum())
                if c2 > cov:
                    theta, cov, resid = refit, c2, r2
                else:
                    break
            best_cov = self._thetas[0][0] if self._thetas else 0
            if cov >= best_cov - 2 and cov > self.p:
                members = np.flatnonzero(resid <= self.epsilon)
                _, refit, _ = _chebyshev_lp(feats[members], resp[members])
                r2 = np.abs(feats @ refit - resp)
                c2 = int((r2 <= self.epsilon).sum())
                if c2 > cov:
                    theta, cov = refit, c2
        with self._lock:
            if self._thetas and cov <= self._thetas[-1][0] and len(self._thetas) >= self._theta_cache_size:
                return
            self._thetas.append((cov, theta))
            self._thetas.sort(key=lambda e: -e[0])
            del self._thetas[self._theta_cache_size :]

    def truth_table(self, cap: int = cube.ENUMERATION_CAP) -> np.ndarray:
        """Exact truth table over all 2**n subsets.

        Fits every (p+1)-subset once and closes upward: a subset is infeasible
        iff it contains an infeasible (p+1)-subset (Helly in R^p), so no
        larger fits are needed.
        """
        n, p = self.n, self.p
        if n > cap:
            raise BudgetError(f"truth table over 2**{n} vertices exceeds cap 2**{cap}")
        if n <= p:
            return np.zeros(1 << n, dtype=np.uint8)
        combos = np.array(list(itertools.combinations(range(n), p + 1)), dtype=np.intp)
        values, _ = _chebyshev_combos(self.dataset.features, self.dataset.responses, combos)
        bad = combos[values > self.epsilon]
        generators = [int(np.bitwise_or.reduce(1 << row.astype(np.int64))) for row in bad]
        return upward_closure_table(n, generators)


def feasibility(oracle: FeasibilityOracle, subset) -> int:
    """Evaluate the oracle on a subset: 0 feasible, 1 infeasible."""
    return oracle(subset)


# --------------------------------------------------------------------------
# Exact MaxCon oracles (desk scale)
# --------------------------------------------------------------------------


def exact_maxcon_bases(
    dataset: LinearDataset, epsilon: float, max_bases: int = DEFAULT_MAX_BASES
) -> tuple[tuple[int, ...], ModelParams]:
    """Ground-truth consensus by enumerating every (p+1)-subset fit.

    Each subset's minimax parameters are scored by their consensus over the
    whole dataset; the largest consensus wins, ties broken by enumeration
    order.  With n <= p + 1 the full index set is returned.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n, p = dataset.n, dataset.p
    if n <= p + 1:
        fit = minimax_fit(dataset)
        return tuple(range(n)), fit.theta
    count = math.comb(n, p + 1)
    if count > max_bases:
        raise BudgetError(
            f"enumerating {count} candidate bases exceeds the cap of {max_bases}"
        )
    combos = np.array(list(itertools.combinations(range(n), p + 1)), dtype=np.intp)
    values, thetas = _chebyshev_combos(dataset.features, dataset.responses, combos)
    best_count = -1
    best_theta: np.ndarray | None = None
    chunk = 20_000
    for lo in range(0, len(combos), chunk):
        th = thetas[lo : lo + chunk]
        resid = np.abs(dataset.features @ th.T - dataset.responses[:, None])
        counts = (resid <= epsilon).sum(axis=0)
        j = int(np.argmax(counts))
        if counts[j] > best_count:
            best_count = int(counts[j])
            best_theta = th[j].copy()
    inliers = np.flatnonzero(np.abs(dataset.features @ best_theta - dataset.responses) <= epsilon)
    return tuple(int(i) for i in inliers), ModelParams(best_theta)


def exact_maxcon_enumerate(f, cap: int = cube.ENUMERATION_CAP) -> tuple[int, ...]:
    """Maximum-cardinality feasible subset by descending-level enumeration.

    Works on any monotone Boolean function over the cube (a feasibility
    oracle or a synthetic function).  Among the feasible vertices of maximal
    level the one whose index tuple is lexicographically smallest is
    returned, matching a level-by-level scan in combination order.
    """
    n = f.n
    if n > cap:
        raise BudgetError(f"enumeration over 2**{n} vertices exceeds cap 2**{cap}")
    table = cube.truth_table(f, cap)
    feasible = table == 0
    levels = cube.level_table(n)
    top = int(levels[feasible].max())
    cands = np.flatnonzero(feasible & (levels == top)).astype(np.int64)
    out: list[int] = []
    for _ in range(top):
        lows = cands & -cands
        low = int(lows.min())
        out.append(low.bit_length() - 1)
        cands = cands[lows == low] ^ low
    return tuple(out)


# --------------------------------------------------------------------------
# Dataset CSV format: header x1,...,xp,y
# --------------------------------------------------------------------------


def save_dataset_csv(dataset: LinearDataset, path) -> None:
    header = ",".join([f"x{i + 1}" for i in range(dataset.p)] + ["y"])
    body = np.column_stack([dataset.features, dataset.responses])
    np.savetxt(path, body, delimiter=",", header=header, comments="", fmt="%.17g")


def load_dataset_csv(path) -> LinearDataset:
    with open(path) as fh:
        header = fh.readline().strip()
    cols = header.split(",")
    if len(cols) < 2 or cols[-1] != "y" or cols[:-1] != [f"x{i + 1}" for i in range(len(cols) - 1)]:
        raise ValueError(f"unexpected dataset header {header!r}; want x1,...,xp,y")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return LinearDataset(features=body[:, :-1], responses=body[:, -1])
