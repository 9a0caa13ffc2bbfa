"""Two-view correspondence ingestion into linear-residual datasets.

Both reductions fix the last matrix entry to 1, which turns the epipolar
constraint and the direct-linear-transform equations into plain linear
regression rows over the remaining 8 unknowns.  Matches whose true last
entry is near 0 are ill-conditioned under this gauge; the optional
normalisation re-centres and re-scales coordinates per view (mean 0, RMS
sqrt(2)) before building rows, changing the residual units accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import LinearDataset


@dataclass(frozen=True)
class CorrespondenceSet:
    """Point matches between two views, one (x1, y1, x2, y2) row per match."""

    matches: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matches, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != 4:
            raise ValueError("matches must be an (m, 4) array of x1,y1,x2,y2")
        if not np.isfinite(m).all():
            raise ValueError("match coordinates must be finite")
        m.flags.writeable = False
        object.__setattr__(self, "matches", m)

    @property
    def count(self) -> int:
        return self.matches.shape[0]


def save_correspondences_csv(corr: CorrespondenceSet, path) -> None:
    np.savetxt(path, corr.matches, delimiter=",", header="x1,y1,x2,y2", comments="", fmt="%.17g")


def load_correspondences_csv(path) -> CorrespondenceSet:
    with open(path) as fh:
        header = fh.readline().strip()
    if header != "x1,y1,x2,y2":
        raise ValueError(f"unexpected correspondence header {header!r}; want x1,y1,x2,y2")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return CorrespondenceSet(body)


def _normalise(points: np.ndarray) -> np.ndarray:
    """Similarity-normalise 2d points to mean 0 and RMS radius sqrt(2)."""
    centred = points - points.mean(axis=0)
    rms = np.sqrt((centred**2).sum(axis=1).mean())
    scale = np.sqrt(2.0) / rms if rms > 0 else 1.0
    return centred * scale


def linearise_fundamental(corr: CorrespondenceSet, normalise: bool = False) -> LinearDataset:
    """One regression row per match from the bilinear epipolar constraint.

    With the (3,3) entry of the matrix fixed to 1 and moved to the response
    side, each match (x1,y1) <-> (x2,y2) contributes the row
    (x1*x2, x1*y2, x1, y1*x2, y1*y2, y1, x2, y2) with response -1, so the
    8 regression parameters are the remaining matrix entries in row order.
    """
    if corr.count < 8:
        raise ValueError(f"need at least 8 matches, got {corr.count}")
    p1 = corr.matches[:, 0:2]
    p2 = corr.matches[:, 2:4]
    if normalise:
        p1 = _normalise(p1)
        p2 = _normalise(p2)
    x1, y1 = p1[:, 0], p1[:, 1]
    x2, y2 = p2[:, 0], p2[:, 1]
    rows = np.column_stack([x1 * x2, x1 * y2, x1, y1 * x2, y1 * y2, y1, x2, y2])
    responses = -np.ones(corr.count)
    return LinearDataset(rows, responses)


def linearise_homography(corr: CorrespondenceSet, normalise: bool = False) -> LinearDataset:
    """Two regression rows per match from the direct linear transform.

    With the (3,3) entry fixed to 1 the projection of (x, y) onto (u, v)
    gives the rows
        (x, y, 1, 0, 0, 0, -u*x, -u*y) with response u
        (0, 0, 0, x, y, 1, -v*x, -v*y) with response v
    over the remaining 8 entries in row order.  Rows for match j are at
    positions 2j and 2j + 1.
    """
    if corr.count < 4:
        raise ValueError(f"need at least 4 matches, got {corr.count}")
    src = corr.matches[:, 0:2]
    dst = corr.matches[:, 2:4]
    if normalise:
        src = _normalise(src)
        dst = _normalise(dst)
    x, y = src[:, 0], src[:, 1]
    u, v = dst[:, 0], dst[:, 1]
    zeros = np.zeros_like(x)
    ones = np.ones_like(x)
    row_u = np.column_stack([x, y, ones, zeros, zeros, zeros, -u * x, -u * y])
    row_v = np.column_stack([zeros, zeros, zeros, x, y, ones, -v * x, -v * y])
    rows = np.empty((2 * corr.count, 8))
    rows[0::2] = row_u
    rows[1::2] = row_v
    responses = np.empty(2 * corr.count)
    responses[0::2] = u
    responses[1::2] = v
    return LinearDataset(rows, responses)


def match_consensus(inlier_rows, n_matches: int) -> tuple[int, ...]:
    """Matches whose both doubled rows are inliers (per-match threshold rule)."""
    rows = set(int(i) for i in inlier_rows)
    return tuple(
        j for j in range(n_matches) if 2 * j in rows and 2 * j + 1 in rows
    )
