"""``perc`` command line.

Every subcommand writes its results (CSV or JSON) to ``<out>.csv``/``<out>.json``
with a ``<out>.manifest.json`` alongside and a summary on stdout.  Without
``--out`` the results go to stdout (so commands can be piped) and the summary to
stderr.  ``--replay MANIFEST`` reruns a saved manifest.

Exit codes: 0 success, 2 invalid arguments, 3 enumeration guard, 4 NaN in output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction

from .config import GuardError, SeedSpec
from .lattice import LatticeSpec, parse_kind
from .parallel import worker_count

CSV_FIELDS = ["observable", "lattice", "n", "p", "value", "stderr", "samples", "seed"]
EXIT_ARGS, EXIT_GUARD, EXIT_NAN = 2, 3, 4


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    return f"{float(x):.17g}"


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _lattice(text: str) -> str:
    try:
        return parse_kind(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _lattices(text: str) -> list[str]:
    return [_lattice(t) for t in text.split(",") if t.strip()]


def _csv_text(rows: list[dict], fields=CSV_FIELDS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: fmt(v) if isinstance(v, (float, int)) and not isinstance(v, str) else v
                    for k, v in r.items()})
    return buf.getvalue()


def _row(observable, lattice, n, p, est, seed) -> dict:
    return {"observable": observable, "lattice": lattice, "n": int(n), "p": float(p),
            "value": float(est.mean), "stderr": float(est.stderr), "samples": int(est.count), "seed": int(seed)}


def _has_nan(obj) -> bool:
    if isinstance(obj, float):
        return math.isnan(obj)
    if isinstance(obj, dict):
        return any(_has_nan(v) for v in obj.values())
    if isinstance(obj, (list, tuple)):
        return any(_has_nan(v) for v in obj)
    return False


class Output:
    """Results of one command: CSV rows or a JSON document, plus summary lines."""

    def __init__(self, rows=None, doc=None, fields=CSV_FIELDS, summary=()):
        self.rows = rows
        self.doc = doc
        self.fields = fields
        self.summary = list(summary)

    def text(self, fmt_name: str) -> tuple[str, str]:
        if self.doc is not None or fmt_name == "json":
            body = self.doc if self.doc is not None else self.rows
            return json.dumps(body, indent=2, sort_keys=True, allow_nan=True) + "\n", "json"
        return _csv_text(self.rows, self.fields), "csv"

    def nan(self) -> bool:
        return _has_nan(self.rows) or _has_nan(self.doc)


# ---------------------------------------------------------------------------
# subcommands


def cmd_kappa(a) -> Output:
    from .observables import kappa_estimate
    spec = LatticeSpec(parse_kind(a.lattice), a.n)
    rows = [_row("kappa", a.lattice, a.n, p, kappa_estimate(spec, p, a.samples, SeedSpec(a.seed, a.stream)), a.seed)
            for p in a.p]
    return Output(rows, summary=[f"kappa {r['lattice']} n={r['n']} p={r['p']}: {r['value']:.8g} +- {r['stderr']:.2g}"
                                 for r in rows])


def cmd_sweep(a) -> Output:
    from .sweeps import Cell, run_sweep
    cells = [Cell(a.observable, lat, n, p) for lat in a.lattice for n in a.n for p in a.p]
    opts = {"epsilon0": a.epsilon0, "samples_per_n": a.samples_per_n, "n_max": a.n_max} \
        if a.observable == "length" else None
    res = run_sweep(cells, a.samples, a.seed, a.time_cap, length_options=opts)
    fields = CSV_FIELDS + ["stream", "incomplete"]
    rows = [{"observable": r.cell.observable, "lattice": r.cell.lattice, "n": r.cell.n, "p": r.cell.p,
             "value": r.value, "stderr": r.stderr, "samples": r.samples, "seed": a.seed, "stream": r.stream,
             "incomplete": r.incomplete} for r in res]
    bad = sum(r.incomplete for r in res)
    return Output(rows, fields=fields, summary=[f"{len(res)} cells, {bad} incomplete"])


def cmd_arms(a) -> Output:
    from .arms import ArmSpec, arm_probabilities
    if a.colors:
        word = a.colors.upper()
    elif a.k is not None and a.alternating:
        word = "".join(str(c) for c in ArmSpec.alternating(a.k, a.m, max(a.n_list)).word())
    else:
        raise UsageError("give --colors, or --k with --alternating")
    if min(a.n_list) <= a.m:
        raise UsageError("every outer radius must exceed --m")
    spec = LatticeSpec(parse_kind(a.lattice), max(a.n_list))
    res = arm_probabilities(spec, a.p, [word], a.m, a.n_list, a.samples, SeedSpec(a.seed, a.stream))
    rows = [_row(f"arms_{word}", a.lattice, n, a.p, res[(word, n)], a.seed) for n in a.n_list]
    return Output(rows, summary=[f"Q[{word}](m={a.m}, n={r['n']}) = {r['value']:.6g} +- {r['stderr']:.2g}"
                                 for r in rows])


def cmd_pivotal(a) -> Output:
    from .arms import edge_arm_probability, lemma3_estimator, pivotal_sum_estimate
    spec = LatticeSpec(parse_kind(a.lattice), a.n)
    seed = SeedSpec(a.seed, a.stream)
    rows = []
    for p in a.p:
        if a.event == "lemma3":
            est = lemma3_estimator(spec, p, a.samples, seed, not a.strict)
        elif a.event == "pivotal-sum":
            est = pivotal_sum_estimate(spec, p, a.samples, seed)
        else:
            if a.edge is None or a.arm_n is None:
                raise UsageError("edge events need --edge and --arm-n")
            est = edge_arm_probability(spec, p, a.edge, a.arm_n, a.samples, seed, three=a.event == "edge3")
        rows.append(_row(a.event.replace("-", "_"), a.lattice, a.n, p, est, a.seed))
    return Output(rows, summary=[f"{r['observable']} p={r['p']}: {r['value']:.8g} +- {r['stderr']:.2g}" for r in rows])


def cmd_length(a) -> Output:
    from .observables import Exceeded, correlation_length_L, schedule_gap
    rows, summary = [], []
    for p in a.p:
        res = correlation_length_L(a.lattice, p, a.epsilon0, a.budget, SeedSpec(a.seed, a.stream),
                                   a.samples_per_n, a.n_max)
        if isinstance(res, Exceeded):
            rows.append({"observable": "L_exceeded", "lattice": a.lattice, "n": res.n_max, "p": p,
                         "value": float(res.n_max), "stderr": 0.0, "samples": res.samples_used, "seed": a.seed})
            summary.append(f"L({p}) > {res.n_max} (criterion not met, {res.samples_used} samples)")
        else:
            rows.append({"observable": "L", "lattice": a.lattice, "n": int(res), "p": p, "value": float(res),
                         "stderr": schedule_gap(res), "samples": a.samples_per_n, "seed": a.seed})
            summary.append(f"L({p}) = {res}")
    return Output(rows, summary=summary)


def cmd_xi(a) -> Output:
    from .observables import xi_decay_estimate
    spec = LatticeSpec(parse_kind(a.lattice), a.n)
    fit = xi_decay_estimate(spec, a.p, a.radii, a.samples, SeedSpec(a.seed, a.stream))
    doc = {"lattice": a.lattice, "n": a.n, "p": a.p, "radii": a.radii, "xi": fit.xi, "slope": fit.slope,
           "slope_stderr": fit.slope_stderr, "probabilities": list(fit.probabilities), "samples": a.samples,
           "seed": a.seed}
    return Output(doc=doc, summary=[f"xi({a.p}) = {fit.xi:.6g}"])


def cmd_microcanonical(a) -> Output:
    from .microcanonical import sweep
    spec = LatticeSpec(parse_kind(a.lattice), a.n)
    curve = sweep(spec, a.replicates, SeedSpec(a.seed, a.stream))
    fields = ["m", "mean", "variance", "replicates"]
    rows = [{"m": m, "mean": float(curve.mean[m]), "variance": float(curve.variance[m]),
             "replicates": curve.replicates} for m in range(curve.mean.size)]
    return Output(rows, fields=fields, summary=[f"A_0 = {curve.mean[0]:g}, A_E = {curve.mean[-1]:g}"])


def cmd_derivatives(a) -> Output:
    from .microcanonical import kappa_derivative_profile
    spec = LatticeSpec(parse_kind(a.lattice), a.n)
    prof = kappa_derivative_profile(spec, a.p, a.order, a.replicates, SeedSpec(a.seed, a.stream))
    rows = [{"observable": f"kappa_d{a.order}", "lattice": a.lattice, "n": a.n, "p": pt.p, "value": pt.value,
             "stderr": pt.stderr, "samples": a.replicates, "seed": a.seed} for pt in prof]
    return Output(rows, summary=[f"kappa^({a.order})({r['p']}) = {r['value']:.6g} +- {r['stderr']:.2g}"
                                 for r in rows])


ENUM_OBSERVABLES = ("clusters", "kappa", "ones", "crossing", "pivotal-sum", "dual-separation", "chi-f",
                    "edge-four-arm", "matching")


def _enum_values(spec, name, a):
    import numpy as np
    from . import oracle
    from .arms import dual_separation, edge_four_arm, pivotal_for_connection
    from .clusters import cluster_of
    from .observables import crossing_event
    if name == "clusters":
        return oracle.cluster_counts(spec)
    if name == "kappa":
        v = spec.vertex_count
        return np.array([Fraction(int(c), v) for c in oracle.cluster_counts(spec)], dtype=object)
    if name == "ones":
        return np.ones(1 << spec.element_count, dtype=np.int64)
    if name == "chi-f":
        def f(c):
            info = cluster_of(c, (0, 0))
            return 0 if info.touches_boundary else info.size
    elif name == "crossing":
        f = crossing_event
    elif name == "pivotal-sum":
        f = lambda c: sum(pivotal_for_connection(c, b) for b in range(spec.element_count))
    elif name == "dual-separation":
        f = lambda c: sum(dual_separation(c, b) for b in range(spec.element_count))
    else:
        if a.edge is None:
            raise UsageError("edge-four-arm needs --edge")
        f = lambda c: edge_four_arm(c, a.edge, a.arm_n or spec.n)
    return oracle.evaluate_all(spec, f)


def cmd_enumerate(a) -> Output:
    from . import oracle
    if a.observable == "matching":
        res = oracle.matching_polynomial(a.lattice, a.torus_sizes)
        doc = {"observable": "matching", "lattice": a.lattice, "polynomial": res.polynomial.to_json(),
               "per_size": {str(L): g.to_json() for L, g in res.per_size.items()},
               "residual": {str(L): g.to_json() for L, g in res.residual.items()},
               "values": {fmt(p): res.polynomial(p) for p in a.at}}
        return Output(doc=doc, summary=[f"matching polynomial {res.polynomial!r}"])
    spec = LatticeSpec(parse_kind(a.lattice), a.n)
    oracle.check_guard(spec)
    poly = oracle.exact_expectation(spec, _enum_values(spec, a.observable, a))
    doc = {"observable": a.observable, "lattice": a.lattice, "n": a.n, "polynomial": poly.to_json(),
           "values": {fmt(p): poly(p) for p in a.at}, "derivatives": []}
    for r in range(1, a.derive + 1):
        d = oracle.exact_derivative(poly, r)
        doc["derivatives"].append({"order": r, "polynomial": d.to_json(), "values": {fmt(p): d(p) for p in a.at}})
    return Output(doc=doc, summary=[f"{a.observable} on {spec.label()}: {poly!r}"])


def _read_rows(path):
    text = sys.stdin.read() if path in (None, "-") else open(path).read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise UsageError("no CSV rows to fit")
    missing = {"observable", "n", "p", "value", "stderr"} - set(rows[0])
    if missing:
        raise UsageError(f"input lacks columns {sorted(missing)}")
    return rows


def cmd_fit(a) -> Output:
    from .fitting import fit_power_law
    rows = _read_rows(a.input)
    groups: dict = {}
    for r in rows:
        obs = r["observable"]
        x_mode = a.x if a.x != "auto" else ("p-distance" if obs.startswith("L") else "n")
        key = (obs, r.get("lattice", ""), float(r["p"]) if x_mode == "n" else int(r["n"]), x_mode)
        if x_mode == "n":
            x = float(r["n"])
        else:
            x = abs(float(r["p"]) - 0.5)
        groups.setdefault(key, []).append((x, float(r["value"]), float(r["stderr"])))
    if a.x == "auto":
        # L(p) rows have n = L; group them by observable and lattice only
        merged: dict = {}
        for (obs, lat, fixed, mode), pts in groups.items():
            k = (obs, lat, None if mode == "p-distance" else fixed, mode)
            merged.setdefault(k, []).extend(pts)
        groups = merged
    fits, summary = [], []
    for (obs, lat, fixed, mode), pts in sorted(groups.items(), key=lambda kv: str(kv[0])):
        f = fit_power_law(pts)
        fixed_name = "p" if mode == "n" else "n"
        fits.append({"observable": obs, "lattice": lat, "x": mode, fixed_name: fixed, "exponent": f.exponent,
                     "stderr_exponent": f.stderr_exponent, "amplitude": f.amplitude, "r_squared": f.r_squared,
                     "window": list(f.window), "points_used": f.points_used, "points_excluded": f.points_excluded})
        summary.append(f"{obs} ({lat}) vs {mode}: exponent {f.exponent:.4f} +- {f.stderr_exponent:.4f}")
    return Output(doc={"fits": fits}, summary=summary)


def _pair(text):
    v = _floats(text)
    if len(v) not in (1, 2):
        raise argparse.ArgumentTypeError("expected VALUE or VALUE,STDERR")
    return (v[0], v[1] if len(v) == 2 else 0.0)


def cmd_report(a) -> Output:
    from .fitting import scaling_law_report
    fits = {k: getattr(a, k) for k in ("alpha", "beta", "gamma", "nu", "rho") if getattr(a, k) is not None}
    rep = scaling_law_report(fits)
    doc = {"inputs": {k: list(v) for k, v in fits.items()},
           "checks": [c._asdict() for c in rep.checks], "missing": rep.missing, "targets": rep.targets}
    return Output(doc=doc, summary=[f"{c.law}: residual {c.residual:+.4f} +- {c.stderr:.4f}"
                                    + (" VIOLATED" if c.violated else "") for c in rep.checks])


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write <out>.csv/.json and <out>.manifest.json")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--replay", metavar="MANIFEST", help="rerun the command recorded in a manifest")

    def mc(p, lattice=True, n=True, samples=True):
        if lattice:
            p.add_argument("--lattice", type=_lattice, default="square-bond")
        if n:
            p.add_argument("--n", type=int, default=16)
        if samples:
            p.add_argument("--samples", type=int, default=10000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--stream", type=int, default=0)

    ap = argparse.ArgumentParser(prog="perc", description="Percolation measurements.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kappa", parents=[common], help="clusters per vertex")
    mc(p)
    p.add_argument("--p", type=_floats, default=[0.5])
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("sweep", parents=[common], help="grid of (lattice, n, p) cells")
    p.add_argument("--observable", default="kappa")
    p.add_argument("--lattice", type=_lattices, default=["square-bond"])
    p.add_argument("--n", type=_ints, default=[16])
    p.add_argument("--p", type=_floats, default=[0.5])
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-cap", type=float, default=None, help="seconds per cell")
    p.add_argument("--epsilon0", type=float, default=0.05)
    p.add_argument("--samples-per-n", type=int, default=4000)
    p.add_argument("--n-max", type=int, default=2048)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("arms", parents=[common], help="annulus arm probabilities")
    mc(p, n=False)
    p.add_argument("--k", type=int)
    p.add_argument("--alternating", action="store_true")
    p.add_argument("--colors", help="cyclic colour word such as OVOV")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--n-list", type=_ints, required=True)
    p.add_argument("--p", type=float, default=0.5)
    p.set_defaults(func=cmd_arms)

    p = sub.add_parser("pivotal", parents=[common], help="pivotality estimators")
    mc(p)
    p.add_argument("--p", type=_floats, default=[0.3])
    p.add_argument("--event", choices=["lemma3", "pivotal-sum", "edge4", "edge3"], default="lemma3")
    p.add_argument("--strict", action="store_true", help="dual paths may not use the outer face")
    p.add_argument("--edge", type=int)
    p.add_argument("--arm-n", type=int)
    p.set_defaults(func=cmd_pivotal)

    p = sub.add_parser("length", parents=[common], help="correlation length L(p)")
    mc(p, n=False, samples=False)
    p.add_argument("--p", type=_floats, required=True)
    p.add_argument("--epsilon0", type=float, default=0.05)
    p.add_argument("--budget", type=int, default=10 ** 7)
    p.add_argument("--samples-per-n", type=int, default=4000)
    p.add_argument("--n-max", type=int, default=2048)
    p.set_defaults(func=cmd_length)

    p = sub.add_parser("xi", parents=[common], help="exponential decay length")
    mc(p)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--radii", type=_ints, required=True)
    p.set_defaults(func=cmd_xi)

    p = sub.add_parser("microcanonical", parents=[common], help="A_m curve of a sweep")
    mc(p, samples=False)
    p.add_argument("--replicates", type=int, default=100)
    p.set_defaults(func=cmd_microcanonical)

    p = sub.add_parser("derivatives", parents=[common], help="kappa derivatives from sweeps")
    mc(p, samples=False)
    p.add_argument("--p", type=_floats, required=True)
    p.add_argument("--order", type=int, default=1, choices=[0, 1, 2, 3, 4])
    p.add_argument("--replicates", type=int, default=100)
    p.set_defaults(func=cmd_derivatives)

    p = sub.add_parser("enumerate", parents=[common], help="exact polynomials by enumeration")
    p.add_argument("--lattice", type=_lattice, default="square-bond")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--observable", choices=ENUM_OBSERVABLES, default="clusters")
    p.add_argument("--derive", type=int, default=0)
    p.add_argument("--at", type=_floats, default=[0.2, 0.5, 0.8])
    p.add_argument("--edge", type=int)
    p.add_argument("--arm-n", type=int)
    p.add_argument("--torus-sizes", type=_ints)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("fit", parents=[common], help="power-law fit of CSV input")
    p.add_argument("--input", help="CSV file (default: stdin)")
    p.add_argument("--x", choices=["auto", "n", "p-distance"], default="auto")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", parents=[common], help="scaling-law residuals")
    for k in ("alpha", "beta", "gamma", "nu", "rho"):
        p.add_argument(f"--{k}", type=_pair, help="VALUE or VALUE,STDERR")
    p.set_defaults(func=cmd_report)
    return ap


def _code_version() -> str:
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _strip(argv: list[str], names: tuple[str, ...]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in names:
            skip = True
            continue
        if any(tok.startswith(n + "=") for n in names):
            continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_ARGS
    if args.replay:
        try:
            with open(args.replay) as fh:
                man = json.load(fh)
            argv = [man["command"]] + list(man["argv"])
            if args.out:
                argv += ["--out", args.out]
            args = parser.parse_args(argv)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            print(f"perc: cannot replay manifest: {exc}", file=sys.stderr)
            return EXIT_ARGS
        except SystemExit as exc:
            return int(exc.code) if exc.code is not None else EXIT_ARGS
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.monotonic()
    try:
        out = args.func(args)
    except GuardError as exc:
        print(f"perc: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (UsageError, ValueError) as exc:
        print(f"perc {args.command}: {exc}", file=sys.stderr)
        return EXIT_ARGS
    text, ext = out.text(args.format)
    summary_stream = sys.stdout if args.out else sys.stderr
    if args.out:
        with open(f"{args.out}.{ext}", "w") as fh:
            fh.write(text)
        rest = _strip(argv[1:], ("--out", "--replay"))
        params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "replay")}
        manifest = {"command": args.command, "argv": rest, "parameters": params,
                    "master_seed": params.get("seed"), "code_version": _code_version(),
                    "started": started, "finished": datetime.now(timezone.utc).isoformat(),
                    "elapsed_seconds": time.monotonic() - t0, "workers": worker_count(),
                    "results": f"{args.out}.{ext}"}
        with open(f"{args.out}.manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
    else:
        sys.stdout.write(text)
    for line in out.summary:
        print(line, file=summary_stream)
    if out.nan():
        print("perc: output contains NaN", file=sys.stderr)
        return EXIT_NAN
    return 0


if __name__ == "__main__":
    sys.exit(main())
