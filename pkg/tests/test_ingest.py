import numpy as np
import pytest

from maxcon.ingest import (
    CorrespondenceSet,
    linearise_fundamental,
    linearise_homography,
    load_correspondences_csv,
    match_consensus,
    save_correspondences_csv,
)
from maxcon.models import minimax_fit, residuals


def random_fundamental(rng):
    """A 3x3 matrix with unit (3,3) entry, mildly scaled for conditioning."""
    F = rng.uniform(-1, 1, size=(3, 3))
    F /= F[2, 2]
    return F


def matches_on_epipolar_lines(F, count, rng, noise=0.0):
    """Correspondences satisfying p1' F p2 = noise_i exactly.

    p2 is sampled; p1 is placed on the epipolar line F p2 and then shifted
    along the line normal (in x, y only) by the requested algebraic amount.
    """
    rows = []
    while len(rows) < count:
        p2 = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), 1.0])
        line = F @ p2
        if abs(line[1]) < 1e-3:
            continue
        x1 = rng.uniform(-2, 2)
        y1 = -(line[0] * x1 + line[2]) / line[1]
        if abs(y1) > 50:
            continue
        p1 = np.array([x1, y1, 1.0])
        delta = noise if np.isscalar(noise) else noise[len(rows)]
        norm2 = line[0] ** 2 + line[1] ** 2
        p1[:2] += delta * line[:2] / norm2
        rows.append([p1[0], p1[1], p2[0], p2[1]])
    return CorrespondenceSet(np.array(rows))


def project_homography(H, count, rng):
    src = rng.uniform(-2, 2, size=(count, 2))
    rows = []
    for x, y in src:
        tx = H @ np.array([x, y, 1.0])
        rows.append([x, y, tx[0] / tx[2], tx[1] / tx[2]])
    return CorrespondenceSet(np.array(rows))


# ---------------------------------------------------------------------------
# Fundamental-matrix reduction
# ---------------------------------------------------------------------------


def test_fundamental_row_for_identical_match():
    x, y = 1.5, -2.0
    corr = CorrespondenceSet(np.array([[x, y, x, y]] * 8))
    ds = linearise_fundamental(corr)
    expected = [x * x, x * y, x, y * x, y * y, y, x, y]
    assert ds.features[0] == pytest.approx(expected)
    assert ds.responses[0] == -1.0
    assert ds.p == 8


def test_fundamental_perfect_matches_have_zero_residual():
    rng = np.random.default_rng(0)
    F = random_fundamental(rng)
    corr = matches_on_epipolar_lines(F, 20, rng)
    ds = linearise_fundamental(corr)
    theta = F.reshape(-1)[:8]
    assert residuals(ds, theta).max() < 1e-9
    assert minimax_fit(ds).value < 1e-9


def test_fundamental_algebraic_noise_is_residual():
    rng = np.random.default_rng(1)
    F = random_fundamental(rng)
    deltas = rng.uniform(-0.05, 0.05, 12)
    corr = matches_on_epipolar_lines(F, 12, rng, noise=deltas)
    ds = linearise_fundamental(corr)
    theta = F.reshape(-1)[:8]
    assert residuals(ds, theta) == pytest.approx(np.abs(deltas), abs=1e-9)


def test_fundamental_requires_eight_matches():
    corr = CorrespondenceSet(np.zeros((7, 4)))
    with pytest.raises(ValueError):
        linearise_fundamental(corr)


def test_fundamental_normalised_keeps_exactness():
    rng = np.random.default_rng(2)
    F = random_fundamental(rng)
    corr = matches_on_epipolar_lines(F, 16, rng)
    ds = linearise_fundamental(corr, normalise=True)
    assert minimax_fit(ds).value < 1e-9


# ---------------------------------------------------------------------------
# Homography reduction
# ---------------------------------------------------------------------------


def test_homography_identity_matches():
    rng = np.random.default_rng(3)
    corr = project_homography(np.eye(3), 6, rng)
    ds = linearise_homography(corr)
    assert ds.n == 12  # doubled rows
    theta = np.array([1.0, 0, 0, 0, 1.0, 0, 0, 0])
    assert residuals(ds, theta).max() < 1e-12
    assert minimax_fit(ds).value < 1e-9


def test_homography_general_exactness_and_row_layout():
    rng = np.random.default_rng(4)
    H = np.array([[1.1, 0.1, 0.3], [-0.2, 0.9, -0.1], [0.01, -0.02, 1.0]])
    corr = project_homography(H, 10, rng)
    ds = linearise_homography(corr)
    theta = H.reshape(-1)[:8]
    assert residuals(ds, theta).max() < 1e-9
    # row 2j carries the u equation: zero block in features[3:6]
    assert np.all(ds.features[0::2, 3:6] == 0)
    assert np.all(ds.features[1::2, 0:3] == 0)


def test_homography_requires_four_matches():
    with pytest.raises(ValueError):
        linearise_homography(CorrespondenceSet(np.zeros((3, 4))))


def test_match_consensus_pairs_rows():
    assert match_consensus([0, 1, 2, 5], 3) == (0,)
    assert match_consensus([0, 1, 2, 3], 2) == (0, 1)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def test_correspondence_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    corr = project_homography(np.eye(3), 5, rng)
    path = tmp_path / "matches.csv"
    save_correspondences_csv(corr, path)
    back = load_correspondences_csv(path)
    np.testing.assert_allclose(back.matches, corr.matches)
    bad = tmp_path / "bad.csv"
    bad.write_text("u1,v1,u2,v2\n1,2,3,4\n")
    with pytest.raises(ValueError):
        load_correspondences_csv(bad)


def test_correspondence_validation():
    with pytest.raises(ValueError):
        CorrespondenceSet(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        CorrespondenceSet(np.array([[1.0, 2.0, np.nan, 0.0]]))
