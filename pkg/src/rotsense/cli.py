"""Command-line frontend.

Structured JSON goes to stdout, a short human-readable summary to stderr.
Every command echoes its parameters; deterministic commands reproduce
their result payload bit-exactly when re-run with identical parameters
(wall time is reported outside the payload). Floats are serialized with 17
significant digits; distinct error classes map to distinct nonzero exit
codes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import model_io, network, rotations
from .distance_ratio import (
    Parameterization,
    analytic_mu,
    divergence_demo,
    monte_carlo_sup,
    planar_sup_search,
    unit_norm_divergence_demo,
)
from .errors import InvalidArgumentError, RotsenseError, UnboundedConstantError

_PARAM_CHOICES = {p.value: p for p in Parameterization}


# ---------------------------------------------------------------------------
# JSON output
# ---------------------------------------------------------------------------

class _Float17Encoder(json.JSONEncoder):
    """JSON encoder printing floats with 17 significant digits.

    Non-finite floats (mu = infinity, say) become the strings "inf",
    "-inf", "nan" so the output stays standard JSON.
    """

    def iterencode(self, o, _one_shot=False):
        def floatstr(x):
            if x != x:
                return '"nan"'
            if x == math.inf:
                return '"inf"'
            if x == -math.inf:
                return '"-inf"'
            return format(x, ".17g")

        indent = self.indent
        if indent is not None and not isinstance(indent, str):
            indent = " " * indent
        return json.encoder._make_iterencode(
            {} if self.check_circular else None,
            self.default,
            json.encoder.encode_basestring_ascii,
            indent,
            floatstr,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            _one_shot,
        )(o, 0)


def _dumps(obj) -> str:
    return json.dumps(obj, cls=_Float17Encoder, indent=2)


def _emit(command: str, parameters: dict, result, started: float) -> None:
    payload = {
        "command": command,
        "parameters": parameters,
        "result": result,
        "wall_time_s": time.perf_counter() - started,
    }
    print(_dumps(payload))


# ---------------------------------------------------------------------------
# Argument parsing helpers
# ---------------------------------------------------------------------------

def _parse_vector(text: str, name: str) -> np.ndarray:
    """Parse a comma-separated literal or an @file path into a float vector."""
    if text.startswith("@"):
        path = text[1:]
        try:
            with open(path) as fh:
                content = fh.read()
        except OSError as exc:
            raise InvalidArgumentError(f"{name}: cannot read {path!r}: {exc}") from exc
        tokens = content.replace(",", " ").split()
    else:
        tokens = [t for t in text.split(",") if t.strip()]
    values = []
    for pos, token in enumerate(tokens):
        try:
            values.append(float(token))
        except ValueError as exc:
            raise InvalidArgumentError(
                f"{name}: element {pos} ({token!r}) is not a number"
            ) from exc
    return np.array(values)


def _parse_eps_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _default_jobs() -> int:
    env = os.environ.get("ROTSENSE_JOBS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _param(value: str) -> Parameterization:
    return _PARAM_CHOICES[value]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_dist(args) -> int:
    started = time.perf_counter()
    v1 = _parse_vector(args.p1, "p1")
    v2 = _parse_vector(args.p2, "p2")
    if args.repr == "exp":
        d = rotations.dist_exp(rotations.ExpCoords(v1), rotations.ExpCoords(v2))
    elif args.repr == "quat":
        d = rotations.dist_quat(
            rotations.UnitQuaternion(*v1), rotations.UnitQuaternion(*v2)
        )
    else:
        if v1.size != 9 or v2.size != 9:
            raise InvalidArgumentError("matrix inputs need 9 row-major entries")
        d = rotations.dist_matrices(
            rotations.RotationMatrix(v1.reshape(3, 3)),
            rotations.RotationMatrix(v2.reshape(3, 3)),
        )
    params = {"repr": args.repr, "p1": list(v1), "p2": list(v2)}
    _emit("dist", params, {"distance_rad": d}, started)
    print(f"rotational distance: {d:.12g} rad", file=sys.stderr)
    return 0


def _cmd_drc(args) -> int:
    started = time.perf_counter()
    p = _param(args.param)
    est = monte_carlo_sup(p, n=args.n, seed=args.seed, jobs=args.jobs)
    params = {"param": p.value, "n": args.n, "seed": args.seed, "jobs": args.jobs}
    result = est.to_json_dict()
    result["analytic_mu"] = analytic_mu(p)
    _emit("drc", params, result, started)
    print(
        f"sup ratio over {args.n} samples: {est.sup_ratio:.12g} "
        f"(analytic mu = {analytic_mu(p):.12g})",
        file=sys.stderr,
    )
    return 0


def _cmd_drc_planar(args) -> int:
    started = time.perf_counter()
    p = _param(args.param)
    value, arg = planar_sup_search(p, args.grid)
    argument = list(arg) if isinstance(arg, np.ndarray) else arg
    params = {"param": p.value, "grid": args.grid}
    result = {
        "sup_ratio": value,
        "argmax": argument,
        "analytic_mu": analytic_mu(p),
    }
    _emit("drc-planar", params, result, started)
    print(f"planar sup ratio: {value:.12g} at {argument}", file=sys.stderr)
    return 0


def _cmd_lipschitz(args) -> int:
    started = time.perf_counter()
    model = model_io.load_model(args.manifest)
    reports = [network.network_euclidean_bound(model, tol=args.tol, subnet="full")]
    if args.split_pose_head:
        position, rotation = network.split_pose_head(model)
        reports.append(network.network_euclidean_bound(position, tol=args.tol, subnet="position"))
        reports.append(network.network_euclidean_bound(rotation, tol=args.tol, subnet="rotation"))
    params = {"manifest": args.manifest, "tol": args.tol, "split_pose_head": args.split_pose_head}
    result = {"reports": [r.to_json_dict() for r in reports]}
    _emit("lipschitz", params, result, started)
    for r in reports:
        print(f"{r.subnet}: product bound {r.product_bound:.12g}", file=sys.stderr)
    return 0


def _cmd_perturb(args) -> int:
    started = time.perf_counter()
    p = _param(args.param)
    if (args.epsilon is None) == (args.target_radians is None):
        raise InvalidArgumentError("supply exactly one of --epsilon or --target-radians")
    if (args.L_e is None) == (args.manifest is None):
        raise InvalidArgumentError("supply exactly one of --L-e or --manifest")
    if args.manifest is not None:
        model = model_io.load_model(args.manifest)
        last = model.layers[-1] if model.layers else None
        if isinstance(last, network.FullyConnected) and last.out_features == 6:
            _, rotation = network.split_pose_head(model)
            L_e = network.network_euclidean_bound(rotation, tol=args.tol).product_bound
            source = "rotation-subnet"
        else:
            L_e = network.network_euclidean_bound(model, tol=args.tol).product_bound
            source = "full-network"
    else:
        L_e = args.L_e
        source = "given"
    params = {
        "param": p.value,
        "epsilon": args.epsilon,
        "target_radians": args.target_radians,
        "L_e": L_e,
        "L_e_source": source,
    }
    if args.epsilon is not None:
        eps = _parse_eps_list(args.epsilon)
        if len(eps) != 1:
            raise InvalidArgumentError("perturb takes a single --epsilon value")
        bound = network.perturbation_bound(eps[0], L_e, p)
        result = bound.to_json_dict()
        summary = (
            f"output rotational distance <= {bound.output_radius:.12g} rad "
            f"({'useful' if bound.useful else 'NOT useful: >= pi'})"
        )
    else:
        epsilon, unbounded = network.inverse_perturbation(args.target_radians, L_e, p)
        bound = network.perturbation_bound(0.0 if unbounded else epsilon, L_e, p)
        result = bound.to_json_dict()
        result["epsilon"] = math.inf if unbounded else epsilon
        result["unbounded_radius"] = unbounded
        summary = f"inputs within epsilon = {result['epsilon']:.12g} stay within target"
    _emit("perturb", params, result, started)
    print(summary, file=sys.stderr)
    return 0


def _cmd_demo_divergence(args) -> int:
    started = time.perf_counter()
    eps_list = _parse_eps_list(args.epsilon)
    if args.kind == "unconstrained-quat":
        v1 = _parse_vector(args.p1, "p1") if args.p1 else np.array([1.0, 0.0, 0.0, 0.0])
        v2 = _parse_vector(args.p2, "p2") if args.p2 else np.array([0.0, 1.0, 0.0, 0.0])
        rows = divergence_demo(
            rotations.RawQuaternion(v1), rotations.RawQuaternion(v2), eps_list
        )
        label = "distance ratio"
    else:
        v1 = _parse_vector(args.p1, "p1") if args.p1 else np.array([1.0, 0.0, 0.0, 0.0])
        v2 = _parse_vector(args.p2, "p2") if args.p2 else np.array([0.0, 1.0, 0.0, 0.0])
        rows = unit_norm_divergence_demo(v1, v2, eps_list)
        label = "Euclidean expansion ratio"
    params = {"kind": args.kind, "epsilon": eps_list, "p1": list(v1), "p2": list(v2)}
    result = {"table": [{"epsilon": e, "ratio": r} for e, r in rows]}
    _emit("demo-divergence", params, result, started)
    for e, r in rows:
        print(f"eps = {e:.3g}: {label} = {r:.12g}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotsense",
        description="Rotational distances, distance ratio constants, and "
        "provable rotational sensitivity bounds for pose networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dist = sub.add_parser("dist", help="rotational distance between two rotations")
    p_dist.add_argument("repr", choices=["matrix", "exp", "quat"])
    p_dist.add_argument("p1", help="comma-separated values or @file")
    p_dist.add_argument("p2", help="comma-separated values or @file")
    p_dist.set_defaults(func=_cmd_dist)

    p_drc = sub.add_parser("drc", help="Monte Carlo distance-ratio supremum")
    p_drc.add_argument("param", choices=sorted(_PARAM_CHOICES))
    p_drc.add_argument("--n", type=lambda s: int(float(s)), default=10**6)
    p_drc.add_argument("--seed", type=int, default=0)
    p_drc.add_argument("--jobs", type=int, default=_default_jobs())
    p_drc.set_defaults(func=_cmd_drc)

    p_planar = sub.add_parser("drc-planar", help="grid search over the planar reduction")
    p_planar.add_argument("param", choices=sorted(_PARAM_CHOICES))
    p_planar.add_argument("--grid", type=lambda s: int(float(s)), default=1000)
    p_planar.set_defaults(func=_cmd_drc_planar)

    p_lip = sub.add_parser("lipschitz", help="per-layer and whole-network Euclidean bounds")
    p_lip.add_argument("manifest")
    p_lip.add_argument("--split-pose-head", action="store_true")
    p_lip.add_argument("--tol", type=float, default=1e-9)
    p_lip.set_defaults(func=_cmd_lipschitz)

    p_pert = sub.add_parser("perturb", help="rotational output bound for an input radius")
    p_pert.add_argument("--epsilon", default=None)
    p_pert.add_argument("--target-radians", type=float, default=None)
    p_pert.add_argument("--L-e", dest="L_e", type=float, default=None)
    p_pert.add_argument("--manifest", default=None)
    p_pert.add_argument("--param", default="exp-unconstrained", choices=sorted(_PARAM_CHOICES))
    p_pert.add_argument("--tol", type=float, default=1e-9)
    p_pert.set_defaults(func=_cmd_perturb)

    p_demo = sub.add_parser("demo-divergence", help="1/eps divergence demonstrations")
    p_demo.add_argument("kind", choices=["unconstrained-quat", "unit-norm"])
    p_demo.add_argument("--epsilon", default="1,0.1,0.01,0.001")
    p_demo.add_argument("p1", nargs="?", default=None)
    p_demo.add_argument("p2", nargs="?", default=None)
    p_demo.set_defaults(func=_cmd_demo_divergence)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RotsenseError as exc:
        error = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, UnboundedConstantError):
            error["mu"] = math.inf
        print(_dumps({"error": error}))
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return type(exc).exit_code


if __name__ == "__main__":
    sys.exit(main())
