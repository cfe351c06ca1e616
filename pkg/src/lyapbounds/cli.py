"""Batch CLI: validate, graph, estimate, bounds, perturb.

Every command is a pure function of the config bytes and flags: output JSON
is key-sorted, carries no timestamps, and repeated runs are byte-identical.
Exit codes: 0 success, 2 validation failure, 3 assumption/structural
failure, 4 sandwich violation, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

from .bounds import bound_sandwich_check
from .config import AnalysisConfig, load_config, run_checks
from .errors import LyapBoundsError, ValidationError
from .estimators import top_exponent, top_exponent_series
from .perturbation import (
    explicit_family,
    invariant_subspace_identity_check,
    rank_m_duality,
    rank_m_scaled_bounds,
    rank_one_scaled_bounds,
    rank_one_spectrum,
)
from .shapes import analyze_structure, build_shape_graph, entropy_refinement, graph_to_json_dict

SEED_ENV = "LYAPBOUNDS_SEED"


def _jsonify(obj):
    """JSON-safe copy: non-finite floats become explicit string sentinels."""
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return "-inf" if obj < 0 else ("inf" if obj > 0 else "nan")
    return obj


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(_jsonify(doc), sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _seed_override(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env else None


def _load(args) -> AnalysisConfig:
    cfg = load_config(args.config)
    if args.n is not None:
        cfg.estimation.n = args.n
    if args.replicas is not None:
        cfg.estimation.replicas = args.replicas
    if args.renorm_every is not None:
        cfg.estimation.renorm_every = args.renorm_every
    if args.zero_tol is not None:
        cfg.tolerances.zero_tol = args.zero_tol
    return cfg


def _driving_family(cfg: AnalysisConfig):
    return cfg.family if cfg.family is not None else explicit_family(cfg.perturbation)


def cmd_validate(args) -> int:
    checks = run_checks(Path(args.config).read_text(encoding="utf-8"))
    for c in checks:
        line = f"{c.name}: {c.status}" + (f" ({c.detail})" if c.detail else "")
        print(line)
    _emit({"checks": [c.to_json_dict() for c in checks]}, args.out)
    return 0 if all(c.status == "pass" for c in checks) else 2


def cmd_graph(args) -> int:
    cfg = _load(args)
    if cfg.shape_set is None:
        raise ValidationError("graph command needs a shape_set in the config")
    graph = build_shape_graph(cfg.shape_set)
    report = analyze_structure(graph)
    doc = graph_to_json_dict(graph, report)
    ent = entropy_refinement(graph)
    doc["entropy"] = {
        "log_k": ent.log_k,
        "log_k_star": ent.log_k_star,
        "log_rho_m": ent.log_rho_m,
        "log_max_outdegree": ent.log_max_outdegree,
    }
    if args.render:
        for v in doc["vertices"]:
            print(f"vertex {v}")
        for e in doc["edges"]:
            print(f"  {e['from']} --{e['label']}--> {e['to']}")
    _emit(doc, args.out)
    return 0


def cmd_estimate(args) -> int:
    cfg = _load(args)
    fam = _driving_family(cfg)
    est = cfg.estimation
    seed = cfg.run_seed(_seed_override(args))
    result = top_exponent(fam, est.n, est.replicas, est.renorm_every, seed=seed)
    if args.csv:
        steps, rows = top_exponent_series(fam, est.n, est.replicas, est.renorm_every, seed=seed)
        with open(args.csv, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["n", "running_estimate"] + [f"replica_{r + 1}" for r in range(rows.shape[1])]
            )
            for step, row in zip(steps, rows):
                writer.writerow([step, repr(float(row.mean()))] + [repr(float(x)) for x in row])
    _emit({"estimate": result.to_json_dict(), "seed": seed}, args.out)
    return 0


def cmd_bounds(args) -> int:
    cfg = _load(args)
    if cfg.family is None or cfg.shape_set is None:
        raise ValidationError("bounds command needs family and shape_set in the config")
    est = cfg.estimation
    seed = cfg.run_seed(_seed_override(args))
    report = bound_sandwich_check(
        cfg.family,
        cfg.shape_set,
        est.n,
        est.replicas,
        est.renorm_every,
        seed=seed,
        sandwich_tol=cfg.tolerances.sandwich_tol,
        zero_tol=cfg.tolerances.zero_tol,
    )
    doc = report.to_json_dict()
    doc["seed"] = seed
    doc["verdict"] = "pass"
    _emit(doc, args.out)
    return 0


def cmd_perturb(args) -> int:
    cfg = _load(args)
    if cfg.perturbation is None:
        raise ValidationError("perturb command needs a perturbation spec in the config")
    spec = cfg.perturbation
    est = cfg.estimation
    seed = cfg.run_seed(_seed_override(args))
    identity_base = spec.base is None
    if spec.rank == 1 and identity_base:
        check = invariant_subspace_identity_check(
            spec, n=est.n, replicas=est.replicas, seed=seed
        )
        doc = {
            "mode": "rank-one-exact-spectrum",
            "spectrum": rank_one_spectrum(spec),
            "identity_check": check.to_json_dict(),
        }
    elif spec.rank == 1:
        doc = {"mode": "rank-one-scaled-sandwich", "bound": rank_one_scaled_bounds(spec).to_json_dict()}
    elif identity_base:
        rep = rank_m_duality(spec, n=est.n, replicas=est.replicas, seed=seed)
        doc = {"mode": "low-rank-duality", "duality": rep.to_json_dict()}
    else:
        rep = rank_m_scaled_bounds(spec, n=est.n, replicas=est.replicas, seed=seed)
        doc = {"mode": "low-rank-scaled-sandwich", "bound": rep.to_json_dict()}
    doc["seed"] = seed
    _emit(doc, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lyapbounds",
        description="Growth-rate estimators and structural bounds for matrix products",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (
        ("validate", cmd_validate),
        ("graph", cmd_graph),
        ("estimate", cmd_estimate),
        ("bounds", cmd_bounds),
        ("perturb", cmd_perturb),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--replicas", type=int, default=None)
        p.add_argument("--renorm-every", dest="renorm_every", type=int, default=None)
        p.add_argument("--zero-tol", dest="zero_tol", type=float, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--csv", default=None)
        if name == "graph":
            p.add_argument("--render", action="store_true")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LyapBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
