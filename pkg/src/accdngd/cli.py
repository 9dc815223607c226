"""Command-line entry point: ``accdngd {run,certify,presets,sigma}``.

Exit codes: 0 success, 1 divergence or certification violations, 2 usage or I/O errors.
"""
from __future__ import annotations

import argparse
import itertools
import logging
import sys

from . import __version__
from .exceptions import AccDNGDError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# numbered names kept for the documented interface; each has a descriptive alias
CERT_TARGETS = {
    "5": "sc-radius",
    "8-10": "nsc-perron",
    "12": "momentum",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _kv(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise AccDNGDError(f"expected key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


def _floats(params, key, default):
    raw = params.pop(key, None)
    if raw is None:
        return default
    return tuple(float(v) for v in raw.split(","))


def cmd_run(args) -> int:
    from .config import load_config
    from .runner import emit_csv, output_dir, run

    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = output_dir(cfg, args.out)
    result = run(cfg)
    try:
        emit_csv(result, out)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"sigma={result.sigma:.6g} L={result.L:.6g} mu={result.mu:.6g} fstar={result.fstar:.6g}")
    for a in result.algorithms:
        s = a.summary
        err = s.get("final_avg_obj_err", float("nan"))
        print(f"{a.label:<28} {a.status:<10} t={s.get('final_t', '')!s:<7} err={err:.3e} "
              f"slope={s.get('loglog_slope', float('nan')):.3f}")
    print(f"wrote {out}")
    return EXIT_FAIL if result.diverged else EXIT_OK


def cmd_certify(args) -> int:
    from .spectral import CERT_GRID, certify_momentum_decay, certify_nsc_gain_perron, certify_sc_gain_radius

    target = CERT_TARGETS.get(args.lemma, args.lemma)
    p = _kv(args.params)
    samples = int(p.pop("samples", 100))
    seed = int(p.pop("seed", 0))
    tol = float(p.pop("tol", 1e-9))
    reports = []
    if target == "sc-radius":
        sig = _floats(p, "sigma", CERT_GRID["sigma"])
        Ls = _floats(p, "L", CERT_GRID["L"])
        if "mu" in p:
            mus = [(L, m) for L in Ls for m in _floats(p, "mu", ())]
        else:
            mus = [(L, r * L) for L in Ls for r in _floats(p, "mu_ratio", CERT_GRID["mu_ratio"])]
        for s, (L, mu) in itertools.product(sig, mus):
            reports.append(certify_sc_gain_radius(s, L, mu, samples, rng=seed, tol=tol))
    elif target == "nsc-perron":
        for s, L in itertools.product(_floats(p, "sigma", CERT_GRID["sigma"]), _floats(p, "L", CERT_GRID["L"])):
            reports.append(certify_nsc_gain_perron(s, L, samples, rng=seed, tol=tol))
    elif target == "momentum":
        T = int(p.pop("T", 10_000))
        t0s = _floats(p, "t0", (1.0,))
        betas = _floats(p, "beta", (0.61, 1.0, 1.5, 0.0))
        for L in _floats(p, "L", CERT_GRID["L"]):
            etas = _floats(p, "eta", (1 / (8 * L),))
            for eta, t0, beta in itertools.product(etas, t0s, betas):
                reports.append(certify_momentum_decay(eta, t0, beta, L, T, tol=tol))
    else:
        print(f"unknown target {args.lemma!r}; choose from {sorted(CERT_TARGETS) + sorted(CERT_TARGETS.values())}",
              file=sys.stderr)
        return EXIT_USAGE
    if p:
        print(f"unused parameters: {', '.join(sorted(p))}", file=sys.stderr)
        return EXIT_USAGE
    total = sum(r.violations for r in reports)
    checks = sum(r.n_checks for r in reports)
    for r in reports:
        if r.violations or args.verbose:
            print(r.summary())
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            for i, r in enumerate(reports):
                if i:
                    fh.write("\n")
                r.to_csv(fh)
    print(f"{target}: {len(reports)} parameter points, {checks} checks, {total} violations")
    return EXIT_FAIL if total else EXIT_OK


def cmd_presets(args) -> int:
    from .presets import PRESETS

    for p in PRESETS.values():
        print(p.describe())
    return EXIT_OK


def cmd_sigma(args) -> int:
    from .graphs import laplacian_weights, metropolis_weights, parse_graph_spec

    g = parse_graph_spec(args.graph)
    w = laplacian_weights(g) if args.weights == "laplacian" else metropolis_weights(g)
    print(f"{w.sigma:.8f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="accdngd", description="Accelerated distributed gradient methods: experiments and checks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config and write CSV traces")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides the config and environment)")
    r.add_argument("--seed", type=int, help="override the master seed")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("certify", help="numerically certify spectral and momentum bounds")
    c.add_argument("--lemma", required=True, metavar="TARGET",
                   help="sc-radius (or 5): gain radius, strongly convex; nsc-perron (or 8-10): Perron root "
                        "and vector, convex; momentum (or 12): momentum and product decay")
    c.add_argument("--params", nargs="*", metavar="KEY=VALUE",
                   help="sigma, L, mu or mu_ratio, eta, beta, t0, T, samples, seed, tol; comma lists allowed")
    c.add_argument("--csv", help="write the full report here")
    c.set_defaults(func=cmd_certify)

    p = sub.add_parser("presets", help="list tuned step-size presets")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_presets)

    s = sub.add_parser("sigma", help="second singular value of a graph's weight matrix")
    s.add_argument("--graph", required=True, help="grid2d:5x5 | kcycle:N,K | er:N,P[,SEED] | path:N | complete:N")
    s.add_argument("--weights", choices=["laplacian", "metropolis"], default="laplacian")
    s.set_defaults(func=cmd_sigma)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except AccDNGDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
