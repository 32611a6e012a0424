"""Distance ratio constants of rotation parameterizations.

The distance ratio constant of a parameterization is the supremum, over
all distinct parameter pairs, of rotational distance divided by Euclidean
parameter distance. This module provides:

- the analytic constants (1 for exponential coordinates, constrained or
  not; pi/sqrt(2) for unit quaternions; infinity for unconstrained
  quaternions);
- the pairwise ratio function for each parameterization;
- planar reductions that collapse the supremum search to one or three
  scalar variables;
- a seeded Monte Carlo supremum search with deterministic multi-worker
  merging;
- the divergence demonstrations for unconstrained quaternions and the
  unit-normalization map.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegeneratePairError, InvalidArgumentError, UnboundedConstantError
from .rotations import RawQuaternion, UnitQuaternion, dist_quat, normalize

DEGENERATE_EPS = kernels.DEGENERATE_EPS

# Pairs per RNG chunk. Fixed regardless of worker count so that the merged
# supremum is identical to the single-threaded result for the same seed.
CHUNK_SIZE = 1 << 16

MU_QUATERNION = math.pi / math.sqrt(2.0)


class Parameterization(enum.Enum):
    """Rotation parameter sets with derived distance ratio constants."""

    EXP_COORDS = "exp-coords"
    EXP_COORDS_UNCONSTRAINED = "exp-unconstrained"
    QUATERNION = "quaternion"
    QUATERNION_UNCONSTRAINED = "quaternion-unconstrained"


def analytic_mu(p: Parameterization) -> float:
    """Analytic distance ratio constant of a parameterization."""
    if p in (Parameterization.EXP_COORDS, Parameterization.EXP_COORDS_UNCONSTRAINED):
        return 1.0
    if p is Parameterization.QUATERNION:
        return MU_QUATERNION
    if p is Parameterization.QUATERNION_UNCONSTRAINED:
        return math.inf
    raise InvalidArgumentError(f"unknown parameterization {p!r}")


@dataclass(frozen=True)
class PlanarExpPair:
    """Planar coordinates of an exponential-coordinate pair.

    ``t`` encodes the axis separation, t = (1 - e1.e2)/2, so t=0 means
    parallel axes and t=1 antiparallel.
    """

    theta1: float
    theta2: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.theta1) and self.theta1 >= 0.0):
            raise InvalidArgumentError("theta1 must be finite and >= 0")
        if not (math.isfinite(self.theta2) and self.theta2 >= 0.0):
            raise InvalidArgumentError("theta2 must be finite and >= 0")
        if not (0.0 <= self.t <= 1.0):
            raise InvalidArgumentError("t must lie in [0, 1]")


@dataclass(frozen=True)
class ChordParam:
    """Chord length between two unit quaternions, in (0, 2]."""

    c: float

    def __post_init__(self):
        if not (0.0 < self.c <= 2.0):
            raise InvalidArgumentError("chord length must lie in (0, 2]")


@dataclass(frozen=True)
class DrcEstimate:
    """Result of a Monte Carlo supremum search over a parameterization."""

    parameterization: Parameterization
    samples: int
    sup_ratio: float
    argmax_pair: tuple[np.ndarray, np.ndarray]
    rng_seed: int

    def to_json_dict(self) -> dict:
        return {
            "parameterization": self.parameterization.value,
            "samples": self.samples,
            "sup_ratio": self.sup_ratio,
            "argmax_pair": [list(self.argmax_pair[0]), list(self.argmax_pair[1])],
            "rng_seed": self.rng_seed,
        }


# ---------------------------------------------------------------------------
# Pairwise ratio
# ---------------------------------------------------------------------------

def _pair_vectors(p1, p2, size: int):
    v1 = np.asarray(p1, dtype=np.float64)
    v2 = np.asarray(p2, dtype=np.float64)
    if v1.shape != (size,) or v2.shape != (size,):
        raise InvalidArgumentError(f"parameters must be {size}-vectors")
    if not (np.all(np.isfinite(v1)) and np.all(np.isfinite(v2))):
        raise InvalidArgumentError("parameters must be finite")
    return v1, v2


def ratio(p1, p2, p: Parameterization) -> float:
    """Rotational distance over Euclidean distance for one parameter pair.

    For unconstrained quaternions the rotational distance is that of the
    normalized vectors while the Euclidean distance uses the raw vectors.
    """
    size = 3 if p in (Parameterization.EXP_COORDS, Parameterization.EXP_COORDS_UNCONSTRAINED) else 4
    v1, v2 = _pair_vectors(p1, p2, size)
    euclid = float(np.linalg.norm(v2 - v1))
    if euclid < DEGENERATE_EPS:
        raise DegeneratePairError("parameter pair is Euclidean-degenerate")
    if size == 3:
        dist = float(kernels.np_dist_exp_batch(v1[None, :], v2[None, :])[0])
    else:
        u1 = normalize(RawQuaternion(v1))
        u2 = normalize(RawQuaternion(v2))
        dist = dist_quat(u1, u2)
    return dist / euclid


# ---------------------------------------------------------------------------
# Planar reductions
# ---------------------------------------------------------------------------

def _planar_exp_arrays(theta1, theta2, t):
    """Vectorized Euclidean and rotational distances of planar triples."""
    euclid = np.sqrt((theta1 - theta2) ** 2 + 4.0 * theta1 * theta2 * t)
    inner = t * np.cos(0.5 * (theta1 + theta2)) + (1.0 - t) * np.cos(0.5 * (theta1 - theta2))
    dist = 2.0 * np.arccos(np.clip(np.abs(inner), -1.0, 1.0))
    return euclid, dist


def planar_ratio_exp(pp: PlanarExpPair) -> float:
    """Distance ratio of an exponential-coordinate pair in planar form."""
    euclid, dist = _planar_exp_arrays(
        np.float64(pp.theta1), np.float64(pp.theta2), np.float64(pp.t)
    )
    if euclid < DEGENERATE_EPS:
        raise DegeneratePairError("planar triple is Euclidean-degenerate")
    return float(dist / euclid)


def _planar_quat_values(c):
    c = np.asarray(c, dtype=np.float64)
    lower = 4.0 * np.arcsin(0.5 * c) / c
    upper = (2.0 * math.pi - 4.0 * np.arcsin(0.5 * c)) / c
    return np.where(c <= math.sqrt(2.0), lower, upper)


def planar_ratio_quat(c) -> float:
    """Distance ratio of a unit-quaternion pair as a function of chord length."""
    cp = c if isinstance(c, ChordParam) else ChordParam(float(c))
    return float(_planar_quat_values(cp.c))


# ---------------------------------------------------------------------------
# Monte Carlo supremum
# ---------------------------------------------------------------------------

def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    # Counter-based Philox keyed per chunk: workers can evaluate chunks in
    # any order and still reproduce the single-threaded stream exactly.
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index,))
    return np.random.Generator(np.random.Philox(seq))


def _sample_pair_ratios(
    p: Parameterization,
    rng: np.random.Generator,
    count: int,
    shift_fraction: float,
    scale_floor,
):
    """Sample `count` parameter pairs and evaluate their ratios."""
    q = kernels.random_unit_quats(rng, 2 * count)
    q1, q2 = q[:count], q[count:]
    if p is Parameterization.QUATERNION:
        return kernels.ratio_quat_batch(q1, q2), q1, q2
    if p is Parameterization.QUATERNION_UNCONSTRAINED:
        scales = scale_floor + (1.0 - scale_floor) * rng.random((2, count))
        v1 = q1 * scales[0][:, None]
        v2 = q2 * scales[1][:, None]
        return kernels.ratio_quat_batch(v1, v2), v1, v2
    s1 = kernels.quat_to_exp_batch(q1)
    s2 = kernels.quat_to_exp_batch(q2)
    if p is Parameterization.EXP_COORDS_UNCONSTRAINED and shift_fraction > 0.0:
        # Push a fraction of the samples out of the pi-ball by adding full
        # turns to the angle; the represented rotation is unchanged.
        s = np.concatenate([s1, s2])
        mask = rng.random(2 * count) < shift_fraction
        turns = rng.integers(1, 3, size=2 * count)
        theta = np.linalg.norm(s, axis=1)
        mask &= theta > 1e-9
        scale = np.ones(2 * count)
        np.divide(theta + 2.0 * math.pi * turns, theta, out=scale, where=mask)
        s *= scale[:, None]
        s1, s2 = s[:count], s[count:]
    return kernels.ratio_exp_batch(s1, s2), s1, s2


def _chunk_supremum(args):
    p, seed, chunk_index, count, shift_fraction, scale_floor = args
    rng = _chunk_rng(seed, chunk_index)
    ratios, v1, v2 = _sample_pair_ratios(p, rng, count, shift_fraction, scale_floor)
    if np.all(np.isnan(ratios)):
        return -math.inf, None, None
    i = int(np.nanargmax(ratios))
    return float(ratios[i]), v1[i].copy(), v2[i].copy()


def _achiever_pairs(p: Parameterization, scale_floor):
    """Known analytic maximizer families, appended to every search."""
    if p in (Parameterization.EXP_COORDS, Parameterization.EXP_COORDS_UNCONSTRAINED):
        zero = np.zeros(3)
        return [
            (np.array([0.0, 0.0, th]), zero)
            for th in (0.1, 0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi, math.pi)
        ]
    q1 = np.array([1.0, 0.0, 0.0, 0.0])
    q2 = np.array([0.0, 1.0, 0.0, 0.0])
    if p is Parameterization.QUATERNION:
        return [(q1, q2)]
    return [(scale_floor * q1, scale_floor * q2)]


def monte_carlo_sup(
    p: Parameterization,
    n: int,
    seed: int,
    jobs: int = 1,
    shift_fraction: float = 0.25,
    scale_floor: float | None = None,
    inject_achievers: bool = True,
) -> DrcEstimate:
    """Supremum of the distance ratio over ``n`` seeded random pairs.

    The sampler draws uniform random rotations (normalized 4D Gaussians on
    the 3-sphere), maps them into the requested parameter set, and tracks
    the running supremum and its argmax pair. Known analytic maximizer
    families are appended so the supremum's lower edge is attained, not
    merely approached. Work is split into fixed-size chunks with
    independent counter-based RNG streams; the result is identical for any
    ``jobs`` value.

    Unconstrained quaternions have an infinite constant, so a supremum
    over samples is meaningless and the call is refused unless a positive
    ``scale_floor`` bounds the sampled vector norms away from zero.
    """
    if n < 1:
        raise InvalidArgumentError("sample count must be >= 1")
    if p is Parameterization.QUATERNION_UNCONSTRAINED:
        if scale_floor is None or not (0.0 < scale_floor <= 1.0):
            raise UnboundedConstantError(
                "unconstrained quaternions have an infinite distance ratio "
                "constant; supply scale_floor in (0, 1] to sample a "
                "norm-bounded subset"
            )
    n_chunks = (n + CHUNK_SIZE - 1) // CHUNK_SIZE
    tasks = [
        (p, seed, i, min(CHUNK_SIZE, n - i * CHUNK_SIZE), shift_fraction, scale_floor)
        for i in range(n_chunks)
    ]
    if jobs > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_chunk_supremum, tasks, chunksize=4))
    else:
        results = [_chunk_supremum(t) for t in tasks]

    best = -math.inf
    best_pair = None
    for value, v1, v2 in results:  # chunk order, strict improvement: deterministic
        if value > best:
            best, best_pair = value, (v1, v2)
    if inject_achievers:
        for v1, v2 in _achiever_pairs(p, scale_floor):
            value = ratio(v1, v2, p)
            if value > best:
                best, best_pair = value, (v1, v2)
    if best_pair is None:
        raise InvalidArgumentError("all sampled pairs were degenerate")
    return DrcEstimate(
        parameterization=p,
        samples=n,
        sup_ratio=best,
        argmax_pair=(np.asarray(best_pair[0]), np.asarray(best_pair[1])),
        rng_seed=seed,
    )


# ---------------------------------------------------------------------------
# Grid search over the planar reductions
# ---------------------------------------------------------------------------

def _golden_max(f, lo: float, hi: float, iters: int = 80):
    """Golden-section maximization of a unimodal scalar function."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def planar_sup_search(p: Parameterization, grid_resolution: int):
    """Grid search plus one local refinement over the planar reduction.

    Exponential coordinates search (theta1, theta2, t) on
    [0, 2pi]^2 x [0, 1]; quaternions search the chord length c on (0, 2].
    Returns ``(sup_value, argmax)`` where the argmax is an
    (theta1, theta2, t) array or a chord length scalar.
    """
    if grid_resolution < 2:
        raise InvalidArgumentError("grid resolution must be >= 2")
    if p is Parameterization.QUATERNION:
        cs = np.linspace(2.0 / grid_resolution, 2.0, grid_resolution)
        vals = _planar_quat_values(cs)
        i = int(np.argmax(vals))
        lo = cs[max(i - 1, 0)]
        hi = cs[min(i + 1, grid_resolution - 1)]
        c_ref, v_ref = _golden_max(lambda c: float(_planar_quat_values(c)), lo, hi)
        if v_ref >= vals[i]:
            return float(v_ref), float(c_ref)
        return float(vals[i]), float(cs[i])
    if p not in (Parameterization.EXP_COORDS, Parameterization.EXP_COORDS_UNCONSTRAINED):
        raise InvalidArgumentError(f"planar search does not support {p.value}")

    thetas = np.linspace(0.0, 2.0 * math.pi, grid_resolution)
    ts = np.linspace(0.0, 1.0, grid_resolution)
    best_val = -math.inf
    best_arg = None
    t2g, tg = np.meshgrid(thetas, ts, indexing="ij")  # (theta2, t) plane
    for th1 in thetas:  # slab over theta1 keeps peak memory at O(grid^2)
        euclid, dist = _planar_exp_arrays(np.float64(th1), t2g, tg)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios = np.where(euclid >= DEGENERATE_EPS, dist / euclid, -math.inf)
        j = int(np.argmax(ratios))
        if ratios.flat[j] > best_val:
            best_val = float(ratios.flat[j])
            best_arg = np.array([th1, t2g.flat[j], tg.flat[j]])

    def eval_triple(th1, th2, t):
        euclid, dist = _planar_exp_arrays(np.float64(th1), np.float64(th2), np.float64(t))
        if euclid < DEGENERATE_EPS:
            return -math.inf
        return float(dist / euclid)

    # One coordinate-wise refinement pass within +/- one grid step.
    step_theta = thetas[1] - thetas[0]
    step_t = ts[1] - ts[0]
    arg = best_arg.copy()
    bounds = [
        (max(arg[0] - step_theta, 0.0), min(arg[0] + step_theta, 2.0 * math.pi)),
        (max(arg[1] - step_theta, 0.0), min(arg[1] + step_theta, 2.0 * math.pi)),
        (max(arg[2] - step_t, 0.0), min(arg[2] + step_t, 1.0)),
    ]
    for axis in range(3):
        def f(x, axis=axis):
            trial = arg.copy()
            trial[axis] = x
            return eval_triple(*trial)

        x_ref, v_ref = _golden_max(f, *bounds[axis])
        if v_ref > best_val:
            best_val = v_ref
            arg[axis] = x_ref
            best_arg = arg.copy()
    return best_val, best_arg


# ---------------------------------------------------------------------------
# Divergence demonstrations
# ---------------------------------------------------------------------------

def divergence_demo(q1: RawQuaternion, q2: RawQuaternion, eps_list) -> list[tuple[float, float]]:
    """Distance ratio of a shrinking unconstrained-quaternion pair.

    Scaling both vectors by eps leaves the rotational distance unchanged
    while the Euclidean distance shrinks linearly, so the ratio grows
    exactly as 1/eps.
    """
    if dist_quat(normalize(q1), normalize(q2)) <= 1e-6:
        raise InvalidArgumentError("inputs represent the same rotation; the ratio cannot diverge")
    rows = []
    for eps in eps_list:
        eps = float(eps)
        if not (eps > 0.0 and math.isfinite(eps)):
            raise InvalidArgumentError("scale factors must be positive and finite")
        rows.append((eps, ratio(eps * q1.v, eps * q2.v, Parameterization.QUATERNION_UNCONSTRAINED)))
    return rows


def unit_norm_divergence_demo(u1, u2, eps_list) -> list[tuple[float, float]]:
    """Euclidean expansion ratio of the unit-normalization map at scale eps.

    Normalization maps eps*u back to u, so the output distance is fixed
    while the input distance shrinks: the ratio is 1/eps, demonstrating an
    infinite Euclidean Lipschitz constant.
    """
    v1, v2 = _pair_vectors(u1, u2, 4)
    for v in (v1, v2):
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise InvalidArgumentError("inputs must be unit 4-vectors")
    if np.linalg.norm(v2 - v1) < DEGENERATE_EPS:
        raise InvalidArgumentError("inputs must be distinct")
    rows = []
    for eps in eps_list:
        eps = float(eps)
        if not (eps > 0.0 and math.isfinite(eps)):
            raise InvalidArgumentError("scale factors must be positive and finite")
        f1 = (eps * v1) / np.linalg.norm(eps * v1)
        f2 = (eps * v2) / np.linalg.norm(eps * v2)
        rows.append((eps, float(np.linalg.norm(f2 - f1) / np.linalg.norm(eps * v2 - eps * v1))))
    return rows
