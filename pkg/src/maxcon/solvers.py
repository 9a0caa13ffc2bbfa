"""Consensus-maximisation solvers.

The influence-guided solvers start from the full dataset, fit a minimax
model, estimate the influence of every basis (active-set) point on the
infeasibility indicator restricted to the surviving points, and remove the
point with the largest influence until the survivors are feasible.  A greedy
local-expansion pass then adds back any point whose inclusion keeps the set
feasible.  The two variants differ only in the sampling measure used for the
influence estimates: biased product sampling ("wi") or uniform sampling on a
fixed Hamming level slightly above the combinatorial dimension ("mbf").

RANSAC and its locally-optimised variant serve as baselines, with
iteration-, wall-clock- and confidence-based stopping.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .cube import RestrictedFunction, estimate_influence_bernoulli, estimate_influence_hamming
from .errors import ContractError, SolverError
from .models import FeasibilityOracle, LinearDataset, minimax_fit, residuals
from .models import _mask_rows  # shared bitmask helper

RECOMMENDED_Q_MAX = 0.4
RECOMMENDED_SAMPLES = (100, 500)


@dataclass
class SolverConfig:
    """Knobs for the influence-guided solvers.

    The recommended operating ranges ((p+1)/n <= q <= 0.4 and
    100 <= samples <= 500) are enforced unless ``allow_extreme`` is set.
    ``q=None`` picks 0.3 clamped into the recommended range.
    """

    epsilon: float
    q: float | None = None
    samples: int = 300
    hamming_level_offset: int = 1
    local_expansion: str = "post_loop"  # post_loop | per_iteration | off
    estimator_mode: str = "paper"  # paper | unbiased
    seed: int = 0
    time_budget: float | None = None
    workers: int | None = None
    allow_extreme: bool = False

    def validate(self, n: int, p: int) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.local_expansion not in ("post_loop", "per_iteration", "off"):
            raise ValueError(f"unknown local_expansion {self.local_expansion!r}")
        if self.estimator_mode not in ("paper", "unbiased"):
            raise ValueError(f"unknown estimator_mode {self.estimator_mode!r}")
        if self.hamming_level_offset < 0:
            raise ValueError("hamming_level_offset must be nonnegative")
        if self.q is not None and not 0 < self.q < 1:
            raise ValueError("q must lie in (0, 1)")
        if self.allow_extreme:
            return
        lo, hi = self.recommended_q_range(n, p)
        if self.q is not None and not lo <= self.q <= hi:
            raise ValueError(
                f"q={self.q} outside the recommended range [{lo:.4g}, {hi:.4g}]; "
                "set allow_extreme=True to override"
            )
        if not RECOMMENDED_SAMPLES[0] <= self.samples <= RECOMMENDED_SAMPLES[1]:
            raise ValueError(
                f"samples={self.samples} outside the recommended range "
                f"{RECOMMENDED_SAMPLES}; set allow_extreme=True to override"
            )

    @staticmethod
    def recommended_q_range(n: int, p: int) -> tuple[float, float]:
        lo = min((p + 1) / n, RECOMMENDED_Q_MAX)
        return lo, RECOMMENDED_Q_MAX

    def resolved_q(self, n: int, p: int) -> float:
        if self.q is not None:
            return self.q
        lo, hi = self.recommended_q_range(n, p)
        return min(max(0.3, lo), hi)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SolveResult:
    """A solver outcome; the inlier set is always verified feasible."""

    method: str
    inlier_set: tuple[int, ...]
    theta: np.ndarray
    consensus_size: int
    iterations: int
    oracle_evaluations: int
    runtime: float
    seed: int | None
    config: dict
    budget_exhausted: bool = False

    def to_json_dict(self) -> dict:
        out = {
            "method": self.method,
            "consensus_size": self.consensus_size,
            "inlier_indices": [int(i) for i in self.inlier_set],
            "theta": [float(t) for t in self.theta],
            "iterations": self.iterations,
            "oracle_evaluations": self.oracle_evaluations,
            "runtime_ms": self.runtime * 1e3,
            "seed": self.seed,
            "config": self.config,
        }
        if self.budget_exhausted:
            out["budget_exhausted"] = True
        return out


def _mask_of(indices: Iterable[int], n: int) -> int:
    mask = 0
    for i in indices:
        if not 0 <= i < n:
            raise IndexError(f"index {i} out of range for n={n}")
        mask |= 1 << int(i)
    return mask


def _expand_pass(oracle: FeasibilityOracle, mask: int) -> int:
    """One candidate scan in index order, keeping each addition that stays feasible."""
    for c in range(oracle.n):
        if not (mask >> c) & 1:
            cand = mask | (1 << c)
            if oracle(cand) == 0:
                mask = cand
    return mask


def local_expansion(
    dataset: LinearDataset,
    epsilon: float,
    inliers: Iterable[int],
    oracle: FeasibilityOracle | None = None,
) -> tuple[int, ...]:
    """Greedily add points that keep the set feasible; one pass in index order.

    The input set must be feasible.  The output is a feasible superset and a
    fixed point of the pass itself.
    """
    if oracle is None:
        oracle = FeasibilityOracle(dataset, epsilon)
    mask = _mask_of(inliers, oracle.n)
    if oracle(mask) != 0:
        raise ContractError("local_expansion requires a feasible inlier set")
    mask = _expand_pass(oracle, mask)
    return tuple(int(i) for i in _mask_rows(mask, oracle.n))


def _verify_feasible(dataset: LinearDataset, inliers: tuple[int, ...], epsilon: float):
    """Independent post-hoc feasibility check; returns the verifying fit."""
    fit = minimax_fit(dataset, inliers)
    if len(inliers) > dataset.p and fit.value > epsilon:
        raise SolverError(
            f"solver returned an infeasible set (minimax {fit.value} > {epsilon})"
        )
    return fit


def _influence_loop(dataset: LinearDataset, config: SolverConfig, kind: str) -> SolveResult:
    n, p = dataset.n, dataset.p
    if n <= p:
        raise ContractError(f"need n > p, got n={n}, p={p}")
    config.validate(n, p)
    eps = config.epsilon
    oracle = FeasibilityOracle(dataset, eps)
    q = config.resolved_q(n, p)
    t0 = time.perf_counter()
    mask = (1 << n) - 1
    iterations = 0
    fits = 0
    exhausted = False
    while mask.bit_count() > p:
        idx = tuple(int(i) for i in _mask_rows(mask, n))
        fit = minimax_fit(dataset, idx)
        fits += 1
        if fit.value <= eps:
            break
        if config.time_budget is not None and time.perf_counter() - t0 > config.time_budget:
            # out of time: fall back to the consensus of the current fit
            exhausted = True
            keep = np.flatnonzero(residuals(dataset, fit.theta) <= eps)
            mask = _mask_of((int(i) for i in keep), n)
            break
        sub = RestrictedFunction(oracle, idx)
        pos_of = {d: j for j, d in enumerate(idx)}
        positions = [pos_of[b] for b in fit.active_set]
        iter_seed = np.random.SeedSequence(entropy=config.seed, spawn_key=(iterations,))
        if kind == "wi":
            report = estimate_influence_bernoulli(
                sub, positions, q, config.samples, iter_seed,
                mode=config.estimator_mode, workers=config.workers,
            )
            scores = report.scores
        else:
            m = len(idx)
            level = min(p + 1 + config.hamming_level_offset, m - 1)
            if level < p + 1:
                scores = {pos: 0.0 for pos in positions}
            else:
                report = estimate_influence_hamming(
                    sub, positions, level, config.samples, iter_seed,
                    workers=config.workers,
                )
                scores = report.scores
        victim_pos = min(positions, key=lambda t: (-scores[t], t))
        mask &= ~(1 << idx[victim_pos])
        iterations += 1
        if config.local_expansion == "per_iteration":
            mask = _expand_pass(oracle, mask)
    if config.local_expansion != "off" and not exhausted:
        mask = _expand_pass(oracle, mask)
    inliers = tuple(int(i) for i in _mask_rows(mask, n))
    fit = _verify_feasible(dataset, inliers, eps)
    runtime = time.perf_counter() - t0
    return SolveResult(
        method=kind,
        inlier_set=inliers,
        theta=fit.theta.theta,
        consensus_size=len(inliers),
        iterations=iterations,
        oracle_evaluations=oracle.evaluations + fits,
        runtime=runtime,
        seed=config.seed,
        config=config.to_dict(),
        budget_exhausted=exhausted,
    )


def wi_maxcon(dataset: LinearDataset, config: SolverConfig) -> SolveResult:
    """Influence-guided consensus maximisation with biased product sampling."""
    return _influence_loop(dataset, config, "wi")


def mbf_maxcon(dataset: LinearDataset, config: SolverConfig) -> SolveResult:
    """Influence-guided consensus maximisation with fixed-Hamming-level sampling.

    The sampling level is p + 1 + hamming_level_offset, clamped below the
    size of the surviving set.
    """
    return _influence_loop(dataset, config, "mbf")


# --------------------------------------------------------------------------
# RANSAC baselines
# --------------------------------------------------------------------------


@dataclass
class RansacBudget:
    """Stopping rule: fixed iterations, wall clock, or confidence-adaptive."""

    iterations: int | None = None
    time: float | None = None
    confidence: float | None = None
    max_iterations: int = 100_000

    def __post_init__(self) -> None:
        if self.iterations is None and self.time is None and self.confidence is None:
            raise ValueError("budget needs iterations, time or confidence")
        if self.confidence is not None and not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


def _as_budget(budget) -> RansacBudget:
    if isinstance(budget, RansacBudget):
        return budget
    if isinstance(budget, (int, np.integer)):
        return RansacBudget(iterations=int(budget))
    if isinstance(budget, dict):
        return RansacBudget(**budget)
    raise TypeError(f"cannot interpret budget {budget!r}")


def ransac(
    dataset: LinearDataset,
    epsilon: float,
    budget,
    rng,
    refinement_depth: int = 0,
    _method: str = "ransac",
) -> SolveResult:
    """Hypothesise-and-verify consensus maximisation from random p-subsets.

    Each hypothesis is the exact linear solve through p sampled points;
    singular subsets are skipped but still consume budget.  With a confidence
    budget the iteration target adapts to the best inlier ratio found so far.
    A positive refinement depth re-fits each new best hypothesis on its
    consensus set by a minimax fit, which is the locally-optimised variant.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n, p = dataset.n, dataset.p
    if n < p:
        raise ContractError(f"need n >= p, got n={n}, p={p}")
    b = _as_budget(budget)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    feats, resp = dataset.features, dataset.responses
    t0 = time.perf_counter()
    best_count = 0
    best_theta: np.ndarray | None = None
    it = 0
    skipped = 0
    evals = 0
    exhausted = False
    target = b.iterations if b.iterations is not None else b.max_iterations
    target = min(target, b.max_iterations)
    adaptive = math.inf if b.confidence is not None else None
    while it < target and (adaptive is None or it < adaptive):
        if b.time is not None and time.perf_counter() - t0 > b.time:
            exhausted = True
            break
        pick = gen.choice(n, size=p, replace=False)
        it += 1
        evals += 1
        A = feats[pick]
        try:
            theta = np.linalg.solve(A, resp[pick])
        except np.linalg.LinAlgError:
            skipped += 1
            continue
        if not np.isfinite(theta).all():
            skipped += 1
            continue
        count = int((np.abs(feats @ theta - resp) <= epsilon).sum())
        if count > best_count:
            best_count, best_theta = count, theta
            for _ in range(refinement_depth):
                members = np.flatnonzero(np.abs(feats @ best_theta - resp) <= epsilon)
                fit = minimax_fit(dataset, (int(i) for i in members))
                evals += 1
                refined = int((np.abs(feats @ fit.theta.theta - resp) <= epsilon).sum())
                if refined > best_count:
                    best_count, best_theta = refined, fit.theta.theta
                else:
                    break
            if b.confidence is not None:
                w = best_count / n
                if w >= 1.0:
                    adaptive = it
                elif w > 0:
                    denom = math.log(1.0 - w**p) if w**p < 1.0 else -math.inf
                    if denom < 0:
                        adaptive = math.ceil(math.log(1.0 - b.confidence) / denom)
    if best_theta is None:
        inliers: tuple[int, ...] = ()
        theta_out = np.zeros(p)
    else:
        inliers = tuple(
            int(i) for i in np.flatnonzero(np.abs(feats @ best_theta - resp) <= epsilon)
        )
        theta_out = best_theta
    if inliers:
        _verify_feasible(dataset, inliers, epsilon)
    runtime = time.perf_counter() - t0
    return SolveResult(
        method=_method,
        inlier_set=inliers,
        theta=theta_out,
        consensus_size=len(inliers),
        iterations=it,
        oracle_evaluations=evals,
        runtime=runtime,
        seed=int(seed) if seed is not None else None,
        config={
            "epsilon": epsilon,
            "budget": asdict(b),
            "refinement_depth": refinement_depth,
            "skipped_hypotheses": skipped,
        },
        budget_exhausted=exhausted,
    )


def lo_ransac(
    dataset: LinearDataset, epsilon: float, budget, rng, refinement_depth: int = 2
) -> SolveResult:
    """RANSAC with a minimax re-fit of each new best consensus set."""
    return ransac(
        dataset, epsilon, budget, rng, refinement_depth=refinement_depth, _method="lo-ransac"
    )
