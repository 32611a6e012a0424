"""Batch kernels for the Monte Carlo supremum search and bulk verification.

Two interchangeable backends provide the per-pair distance and
distance-ratio evaluations that dominate sampling runtime:

- ``rotsense._kernels`` — compiled (Cython) fused loops;
- the numpy implementations in this module.

The compiled backend is selected at import time when the extension built;
set ``ROTSENSE_PURE_PYTHON=1`` to force the numpy fallback. Both backends
evaluate the same formulas in the same per-element order and agree to a
few ulps; ``benchmarks/bench_kernels.py`` compares their throughput.

Pairs whose Euclidean parameter distance falls below ``DEGENERATE_EPS``
represent the excluded p1 == p2 case and evaluate to NaN.
"""

from __future__ import annotations

import os

import numpy as np

DEGENERATE_EPS = 1e-12

try:  # pragma: no cover - exercised only when the extension is present
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

_FORCE_PURE = os.environ.get("ROTSENSE_PURE_PYTHON", "") not in ("", "0")
ACTIVE_BACKEND = "numpy" if (_compiled is None or _FORCE_PURE) else "compiled"


def backend_name() -> str:
    """Name of the kernel backend selected at import time."""
    return ACTIVE_BACKEND


def _c2(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _np_exp_to_quat(s: np.ndarray) -> np.ndarray:
    t = np.sqrt(np.einsum("ij,ij->i", s, s))
    k = np.divide(np.sin(0.5 * t), t, out=np.zeros_like(t), where=t > 0.0)
    return np.concatenate([np.cos(0.5 * t)[:, None], k[:, None] * s], axis=1)


def np_dist_exp_batch(s1, s2) -> np.ndarray:
    """Rotational distance for each row pair of exponential coordinates.

    Chord form of 2*acos(|a|) with a the dot product of the corresponding
    quaternions; see ``rotations.dist_exp``.
    """
    s1 = np.atleast_2d(np.asarray(s1, dtype=np.float64))
    s2 = np.atleast_2d(np.asarray(s2, dtype=np.float64))
    return np_dist_quat_batch(_np_exp_to_quat(s1), _np_exp_to_quat(s2))


def np_dist_quat_batch(q1, q2) -> np.ndarray:
    """Rotational distance for each row pair of unit quaternions.

    Chord form of 2*acos(|q1 . q2|); see ``rotations.dist_quat``.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=np.float64))
    q2 = np.atleast_2d(np.asarray(q2, dtype=np.float64))
    sign = np.where(np.einsum("ij,ij->i", q1, q2) < 0.0, -1.0, 1.0)
    q2s = q2 * sign[:, None]
    dn = np.linalg.norm(q2s - q1, axis=1)
    sn = np.linalg.norm(q2s + q1, axis=1)
    return 4.0 * np.arctan2(dn, sn)


def np_ratio_exp_batch(s1, s2) -> np.ndarray:
    """dist/Euclidean ratio per pair of exponential coordinates (NaN when degenerate)."""
    s1 = np.atleast_2d(np.asarray(s1, dtype=np.float64))
    s2 = np.atleast_2d(np.asarray(s2, dtype=np.float64))
    euclid = np.linalg.norm(s2 - s1, axis=1)
    dist = np_dist_exp_batch(s1, s2)
    return np.divide(dist, euclid, out=np.full_like(euclid, np.nan), where=euclid >= DEGENERATE_EPS)


def np_ratio_quat_batch(q1, q2) -> np.ndarray:
    """dist/Euclidean ratio per quaternion pair (NaN when degenerate).

    Inputs may be non-unit: the rotational distance is taken between the
    normalized vectors while the Euclidean distance uses the raw vectors,
    which is the unconstrained-quaternion convention. For unit inputs the
    two conventions coincide.
    """
    q1 = np.atleast_2d(np.asarray(q1, dtype=np.float64))
    q2 = np.atleast_2d(np.asarray(q2, dtype=np.float64))
    euclid = np.linalg.norm(q2 - q1, axis=1)
    u1 = q1 / np.linalg.norm(q1, axis=1, keepdims=True)
    u2 = q2 / np.linalg.norm(q2, axis=1, keepdims=True)
    dist = np_dist_quat_batch(u1, u2)
    return np.divide(dist, euclid, out=np.full_like(euclid, np.nan), where=euclid >= DEGENERATE_EPS)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def dist_exp_batch(s1, s2) -> np.ndarray:
    if ACTIVE_BACKEND == "compiled":
        return _compiled.dist_exp_batch(_c2(np.atleast_2d(s1)), _c2(np.atleast_2d(s2)))
    return np_dist_exp_batch(s1, s2)


def dist_quat_batch(q1, q2) -> np.ndarray:
    if ACTIVE_BACKEND == "compiled":
        return _compiled.dist_quat_batch(_c2(np.atleast_2d(q1)), _c2(np.atleast_2d(q2)))
    return np_dist_quat_batch(q1, q2)


def ratio_exp_batch(s1, s2) -> np.ndarray:
    if ACTIVE_BACKEND == "compiled":
        return _compiled.ratio_exp_batch(_c2(np.atleast_2d(s1)), _c2(np.atleast_2d(s2)))
    return np_ratio_exp_batch(s1, s2)


def ratio_quat_batch(q1, q2) -> np.ndarray:
    if ACTIVE_BACKEND == "compiled":
        return _compiled.ratio_quat_batch(_c2(np.atleast_2d(q1)), _c2(np.atleast_2d(q2)))
    return np_ratio_quat_batch(q1, q2)


# ---------------------------------------------------------------------------
# Batch conversions and sampling helpers (numpy in both backends; these are
# cheap relative to the ratio kernels and keep sampled values identical
# across backends)
# ---------------------------------------------------------------------------

def normalize_rows(v) -> np.ndarray:
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def random_unit_quats(rng: np.random.Generator, n: int) -> np.ndarray:
    """n quaternions uniform on the 3-sphere (normalized 4D Gaussians)."""
    return normalize_rows(rng.standard_normal((n, 4)))


def quat_to_exp_batch(q) -> np.ndarray:
    """Exponential coordinates in the pi-ball for each unit quaternion row."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    q = q * np.where(q[:, :1] < 0.0, -1.0, 1.0)
    sin_half = np.linalg.norm(q[:, 1:], axis=1)
    theta = 2.0 * np.arctan2(sin_half, q[:, 0])
    safe = np.where(sin_half > 0.0, sin_half, 1.0)
    axis = q[:, 1:] / safe[:, None]
    return theta[:, None] * axis


def quat_to_matrix_batch(q) -> np.ndarray:
    """Rotation matrix for each unit quaternion row, shape (n, 3, 3)."""
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    out = np.empty((q.shape[0], 3, 3))
    out[:, 0, 0] = 1 - 2 * (y * y + z * z)
    out[:, 0, 1] = 2 * (x * y - z * w)
    out[:, 0, 2] = 2 * (x * z + y * w)
    out[:, 1, 0] = 2 * (x * y + z * w)
    out[:, 1, 1] = 1 - 2 * (x * x + z * z)
    out[:, 1, 2] = 2 * (y * z - x * w)
    out[:, 2, 0] = 2 * (x * z - y * w)
    out[:, 2, 1] = 2 * (y * z + x * w)
    out[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def dist_matrices_batch(r1, r2) -> np.ndarray:
    """Rotational distance per pair of stacked rotation matrices."""
    r1 = np.asarray(r1, dtype=np.float64)
    r2 = np.asarray(r2, dtype=np.float64)
    tr = np.einsum("nij,nij->n", r1, r2)
    return np.arccos(np.clip(0.5 * (tr - 1.0), -1.0, 1.0))
