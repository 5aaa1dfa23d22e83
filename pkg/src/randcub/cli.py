"""Command-line entry point ``randcub``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import cubature as cub
from . import harness
from .basis import basis_from_config, family_from_config
from .least_squares import build_design
from .sampling import sample_mu, sample_sigma


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _emit(text: str, out) -> None:
    if out:
        harness.write_text(out, text)
    else:
        sys.stdout.write(text)


def _node_csv(nodes, columns: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    d = nodes.shape[1]
    writer.writerow(["index"] + [f"y_{q + 1}" for q in range(d)] + list(columns))
    cols = list(columns.values())
    for i, y in enumerate(nodes):
        writer.writerow([i] + ["%.17g" % v for v in y] + ["%.17g" % c[i] for c in cols])
    return buf.getvalue()


def _gram_dump(G, deviation) -> str:
    return harness.dump_json({"gram": np.asarray(G).tolist(), "gram_deviation": float(deviation)})


def cmd_sample(args) -> int:
    basis = basis_from_config(_load_json(args.config))
    draw = sample_mu if args.source == "mu" else sample_sigma
    s = draw(basis, args.m, args.seed)
    _emit(_node_csv(s.nodes, {"w": s.w_values}), args.out)
    return 0


def cmd_weights(args) -> int:
    cfg = _load_json(args.config)
    basis = basis_from_config(cfg)
    delta = args.delta if args.delta is not None else float(cfg.get("delta", cub.DEFAULT_DELTA))
    rule = cub.cubature_rule(basis, args.m, args.seed, delta)
    _emit(_node_csv(rule.nodes, {"w": rule.w_values, "alpha": rule.weights}), args.out)
    if args.dump_gram:
        system = build_design(basis, sample_sigma(basis, args.m, args.seed))
        harness.write_text(args.dump_gram, _gram_dump(system.G, rule.gram_deviation))
    return 0


def cmd_integrate(args) -> int:
    cfg = _load_json(args.config)
    basis = basis_from_config(cfg)
    spec = cfg.get("integrand", {"name": "product_exponential"})
    f = harness.integrand_registry(spec["name"], spec.get("params"), basis)
    delta = args.delta if args.delta is not None else float(cfg.get("delta", cub.DEFAULT_DELTA))
    rec, _ = cub.estimate(args.estimator, basis, args.m, args.seed, f, delta)
    sys.stdout.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    if args.dump_gram and args.estimator in ("ls", "conditioned"):
        system = build_design(basis, sample_sigma(basis, args.m, args.seed))
        harness.write_text(args.dump_gram, _gram_dump(system.G, rec.gram_deviation))
    return 0


def _experiment(args) -> harness.ExperimentConfig:
    cfg = harness.ExperimentConfig.load(args.config)
    if args.out:
        cfg.output = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_convergence(args) -> int:
    cfg = _experiment(args)
    _, summary = harness.run_convergence(cfg, threads=args.threads)
    if not cfg.output:
        sys.stdout.write(harness.dump_json(summary))
    return 0


def cmd_positivity(args) -> int:
    cfg = _experiment(args)
    summary = harness.run_positivity(cfg, contrast_m=args.contrast_m)
    if not cfg.output:
        sys.stdout.write(harness.dump_json(summary))
    return 0


def cmd_budget(args) -> int:
    family = family_from_config({"family": args.family, "theta1": args.theta1, "theta2": args.theta2})
    rows = harness.budget_table(args.n, args.r, args.delta, family)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if v is None else v for k, v in row.items()})
    _emit(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randcub", description="Randomized polynomial cubature.")
    sub = p.add_subparsers(dest="command", required=True)

    def node_cmd(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON file with 'basis' and 'index_set'")
        sp.add_argument("--m", type=int, required=True)
        sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(func=func)
        return sp

    sp = node_cmd("sample", cmd_sample, "draw nodes and write index, y_1..y_d, w")
    sp.add_argument("--source", choices=("sigma", "mu"), default="sigma")
    sp.add_argument("--out")

    sp = node_cmd("weights", cmd_weights, "draw nodes and write cubature weights")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--out")
    sp.add_argument("--dump-gram", metavar="PATH", help="write G and its deviation as JSON")

    sp = node_cmd("integrate", cmd_integrate, "print one EstimateRecord as JSON")
    sp.add_argument("--estimator", choices=cub.ESTIMATORS, default="conditioned")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--dump-gram", metavar="PATH", help="write G and its deviation as JSON")

    for name, func in (("convergence", cmd_convergence), ("positivity", cmd_positivity)):
        sp = sub.add_parser(name, help=f"run a {name} experiment from a JSON config")
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--out", help="override the output path")
        sp.set_defaults(func=func)
        if name == "convergence":
            sp.add_argument("--threads", type=int)
        else:
            sp.add_argument("--contrast-m", type=int, nargs="*")

    sp = sub.add_parser("budget", help="print the sample-budget table as CSV")
    sp.add_argument("--n", type=int, nargs="+", required=True)
    sp.add_argument("--r", type=float, nargs="+", default=[cub.DEFAULT_R])
    sp.add_argument("--delta", type=float, nargs="+", default=[cub.DEFAULT_DELTA])
    sp.add_argument("--family", default="legendre")
    sp.add_argument("--theta1", type=float, default=0.0)
    sp.add_argument("--theta2", type=float, default=0.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_budget)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"randcub: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
