"""Command-line front end: ``dlab <group> <command> [flags]``.

Groups: ``net`` (build, certify, bounds), ``disent`` (build, verify, bounds),
``sep`` (fidelity, distance, ppt, eb, lemma2), ``sym`` (dim, definetti) and
``suite acceptance``.  Output is JSON with a fixed field order and floats
printed to 17 significant digits.

Exit codes: 0 success, 1 a verification failed, 2 usage error, 3 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import subprocess
import sys

import numpy as np

# Default effort for the heuristic optimisers.  Override with --config FILE,
# a JSON object with any subset of these keys.
CONFIG = {
    "restarts": 20,
    "iters": 500,
    "tol": 1e-9,
    "trials": 200,
    "samples": 100_000,
    "dim_r": 2,
}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _encode(obj, out: list) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(k) + ": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, list):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    else:
        out.append(json.dumps(obj))


def _float(x: float) -> str:
    if not math.isfinite(x):
        return json.dumps(str(x))
    text = format(x, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def dumps(obj) -> str:
    """Deterministic JSON: insertion-ordered keys, floats with 17 significant digits."""
    out: list = []
    _encode(_plain(obj), out)
    return "".join(out)


def _emit(args, report, rows=None) -> None:
    if getattr(args, "format", "json") == "csv" and rows is not None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in rows:
            writer.writerow([_float(x) if isinstance(x, float) else x for x in row])
        text = buf.getvalue()
    else:
        text = dumps(report) + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# helpers


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for stochastic commands")
    return args.seed


def _cfg(args, key):
    val = getattr(args, key, None)
    return args.config[key] if val is None else val


def _load_state(path: str):
    from .qcore import load_matrix

    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    return load_matrix(path)


def _dims(args, mat, factor_dims):
    if args.dims:
        return tuple(int(x) for x in args.dims.split(","))
    if factor_dims is not None and len(factor_dims) == 2:
        return tuple(factor_dims)
    d = int(round(math.sqrt(mat.shape[0])))
    if d * d != mat.shape[0]:
        raise UsageError("cannot infer a bipartition; pass --dims dA,dB")
    return (d, d)


def _load_net(args):
    from .purenet import PureNet, octahedron_net

    if getattr(args, "net_file", None):
        with open(args.net_file) as fh:
            obj = json.load(fh)
        # accept either a bare net or the report written by `net build`
        return PureNet.from_json(obj.get("net", obj))
    return octahedron_net()


# ---------------------------------------------------------------------------
# net


def cmd_net(args) -> int:
    from .purenet import build_net_greedy, certify_covering, lemma1_bounds

    if args.action == "bounds":
        b = lemma1_bounds(args.d, args.eps)
        _emit(args, {"d": b.d, "epsilon": b.epsilon, "log2_lower": b.log2_lower, "log2_upper": b.log2_upper,
                     "min_size": b.min_size})
        return EXIT_OK
    seed = _need_seed(args)
    if args.action == "build":
        if args.d is None or args.eps is None:
            raise UsageError("net build needs --d and --eps")
        net = build_net_greedy(args.d, args.eps, args.pool, seed)
        if args.samples:
            certify_covering(net, args.samples, seed)
        b = lemma1_bounds(args.d, args.eps)
        report = {"size": len(net), "bounds": {"log2_lower": b.log2_lower, "log2_upper": b.log2_upper},
                  "meta": net.meta, "net": net.to_json()}
        _emit(args, report)
        return EXIT_OK
    net = _load_net(args)
    samples = args.samples or args.config["samples"]
    radius = certify_covering(net, samples, seed)
    report = {"size": len(net), "d": net.dim, "nominal_radius": net.nominal_radius, "certified_radius": radius,
              "samples": samples, "seed": seed}
    if args.eps is not None:
        report["within_eps"] = radius <= args.eps
        _emit(args, report)
        return EXIT_OK if radius <= args.eps else EXIT_FAIL
    _emit(args, report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# disent


def _build_spec(args):
    from . import disentangler as dis
    from .purenet import certify_covering

    kind = args.kind
    if kind == "net":
        net = _load_net(args)
        if net.certified_radius is None:
            certify_covering(net, args.samples or args.config["samples"], args.seed or 0)
        return dis.build_net_disentangler(net)
    if kind == "definetti":
        if args.n is None:
            raise UsageError("--kind definetti needs --n")
        return dis.build_definetti_disentangler(args.d or 2, args.n)
    if kind == "identity":
        return dis.identity_spec(args.d or 2)
    return dis.swap_spec(args.d or 2)


def cmd_disent(args) -> int:
    from . import disentangler as dis

    if args.action == "bounds":
        report = {}
        if args.n is not None:
            sb = dis.construction_size_bounds("definetti", args.d, args.n)
            report["definetti"] = {"n": args.n, "log2_D_actual": sb.log2_D_actual,
                                   "log2_D_paper_upper": sb.log2_D_paper_upper, "holds": sb.holds}
        if args.delta is not None and args.kind == "net":
            report["net_log2_D_upper"] = dis.net_log2_D_upper(args.d, args.delta)
        eps = args.eps if args.eps is not None else 0.0
        delta = args.delta if args.delta is not None else 0.0
        tb = dis.theorem_lower_bound(args.d, eps, delta)
        report["theorem"] = {"d": args.d, "eps": eps, "delta": delta, "Delta": tb.delta_quantity,
                             "log2_D_lower": tb.log2_D_lower, "vacuous": tb.vacuous, "unbounded": tb.unbounded}
        _emit(args, report)
        return EXIT_OK
    spec = _build_spec(args)
    if args.action == "build":
        report = spec.summary()
        if args.with_choi:
            from .qcore import choi_matrix, matrix_to_json

            report["choi"] = matrix_to_json(choi_matrix(spec.channel.kraus))
        _emit(args, report)
        return EXIT_OK
    seed = _need_seed(args)
    checks = [c.strip() for c in args.checks.split(",")]
    trials = args.trials or args.config["trials"]
    restarts = _cfg(args, "restarts")
    reports = {}
    rows = [["check", "trial", "value"]]
    for check in checks:
        if check == "c1":
            rep = dis.verify_condition1(spec, trials, seed, restarts)
        elif check == "c2":
            rep = dis.verify_condition2(spec, trials, seed, generic_input_opt=args.generic_input_opt)
        elif check in ("strong-c1", "strong_c1"):
            rep = dis.verify_strong_condition1(spec, args.dim_r or args.config["dim_r"], trials, seed, restarts)
        elif check in ("eb", "eb-reduction", "eb_reduction"):
            rep = dis.eb_reduction_check(spec, seed=seed)
        else:
            raise UsageError(f"unknown check {check!r}; choose from c1, c2, strong-c1, eb")
        reports[rep.condition] = rep.to_json()
        if rep.condition != "eb_reduction":
            rows += [[rep.condition, i, v] for i, v in enumerate(rep.values)]
    passed = all(r["passed"] for r in reports.values())
    _emit(args, {"spec": spec.summary(), "reports": reports, "passed": passed}, rows)
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# sep


def cmd_sep(args) -> int:
    from . import sepkit
    from .qcore import matrix_to_json

    if args.state is None:
        raise UsageError("--state FILE is required")
    mat, fdims = _load_state(args.state)
    if args.action == "ppt":
        dims = _dims(args, mat, fdims)
        _emit(args, {"dims": dims, "ppt_min_eig": sepkit.ppt_min_eig(mat, dims)})
        return EXIT_OK
    if args.action == "eb":
        in_dim = args.in_dim or (fdims[0] if fdims else None)
        out_dim = args.out_dim or (fdims[1] if fdims else None)
        if in_dim is None or out_dim is None:
            raise UsageError("sep eb needs --in-dim and --out-dim (or factor dims in the file)")
        seed = _need_seed(args)
        v = sepkit.eb_membership(mat, tol=args.eb_tol or 1e-6, in_dim=in_dim,
                                 out_dim=out_dim, seed=seed)
        report = {"verdict": v.verdict, "evidence": v.evidence}
        if v.povm is not None:
            report["povm"] = v.povm.to_json()
            report["prep"] = [matrix_to_json(p) for p in v.prep]
        _emit(args, report)
        return EXIT_OK
    dims = _dims(args, mat, fdims)
    seed = _need_seed(args)
    restarts, iters, tol = _cfg(args, "restarts"), _cfg(args, "iters"), args.config["tol"]
    if args.action == "fidelity":
        r = sepkit.seesaw_sep_fidelity(mat, dims, restarts, iters, seed, tol=tol)
        report = {"f_lb": r.f_lb, "bound": r.bound, "restart": r.restart, "sweeps": len(r.history) - 1,
                  "witness": r.witness.to_json()}
    elif args.action == "distance":
        r = sepkit.nearest_sep_trace_ub(mat, dims, restarts=min(restarts, 5), seed=seed)
        report = {"dist_ub": r.dist_ub, "bound": r.bound, "hs_dist": r.hs_dist, "rounds": r.rounds,
                  "witness": r.witness.to_json()}
    else:
        r = sepkit.lemma2_rhs(mat, dims, args.r, restarts, iters, seed, tol)
        report = {"value": r.value, "restart": r.restart, "sweeps": len(r.history) - 1,
                  "povm": matrix_to_json(r.povm)}
    _emit(args, report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sym


def cmd_sym(args) -> int:
    from . import symsub

    if args.action == "dim":
        _emit(args, {"d": args.d, "n": args.n, "sym_dimension": symsub.sym_dimension(args.d, args.n)})
        return EXIT_OK
    seed = _need_seed(args)
    k = args.k or 1
    if args.state:
        small, _ = _load_state(args.state)
    else:
        small = symsub.random_symmetric_state(args.d, args.n, args.aux, args.rank, seed)
    red = symsub.reduce_symmetric(small, args.d, args.n, k, args.aux)
    fit = symsub.definetti_fit_general(red, None, k, args.aux)
    bound = k * args.d / args.n
    report = {"d": args.d, "n": args.n, "k": k, "aux": args.aux, "distance_ub": fit.distance, "bound": bound,
              "within_bound": fit.distance < bound, "net_radius": fit.net_radius, "net_size": len(fit.mixture.support)}
    _emit(args, report)
    return EXIT_OK if fit.distance < bound else EXIT_FAIL


# ---------------------------------------------------------------------------
# suite


def _suite_bytes(seed: int, only: str | None, threads: int, config: str | None) -> bytes:
    cmd = [sys.executable, "-m", "dlab.cli", "suite", "acceptance", "--seed", str(seed)]
    if only:
        cmd += ["--only", only]
    if config:
        cmd += ["--config", config]
    env = dict(os.environ, DLAB_THREADS=str(threads))
    return subprocess.run(cmd, env=env, capture_output=True, check=False).stdout


def cmd_suite(args) -> int:
    from .acceptance import run_suite

    seed = args.seed if args.seed is not None else 42
    only = [int(x) for x in args.only.split(",")] if args.only else None
    if not args.check_determinism:
        logging.basicConfig(level=logging.INFO, format="dlab: %(message)s", stream=sys.stderr)
        report = run_suite(seed, only)
        rows = [["id", "name", "passed"]] + [[c["id"], c["name"], c["passed"]] for c in report["criteria"]]
        _emit(args, report, rows)
        return EXIT_OK if report["passed"] else EXIT_FAIL
    # run the suite in two fresh processes with different worker counts and compare bytes
    runs = {t: _suite_bytes(seed, args.only, t, args.config_path) for t in (1, 4)}
    if not runs[1]:
        print("dlab: suite subprocess produced no output", file=sys.stderr)
        return EXIT_FAIL
    report = json.loads(runs[1])
    same = runs[1] == runs[4] and len(runs[1]) > 0
    report["criteria"].append({
        "id": 12,
        "name": "Determinism",
        "passed": same,
        "values": {"threads": [1, 4], "sha256": {str(t): hashlib.sha256(b).hexdigest() for t, b in runs.items()}},
    })
    report["passed"] = all(c["passed"] for c in report["criteria"])
    rows = [["id", "name", "passed"]] + [[c["id"], c["name"], c["passed"]] for c in report["criteria"]]
    _emit(args, report, rows)
    return EXIT_OK if report["passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--config", dest="config_path", metavar="FILE", help="JSON overrides for the defaults")
    common.add_argument("--output", "-o", metavar="FILE")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, help="worker threads (sets DLAB_THREADS)")
    common.add_argument("--restarts", type=int)
    common.add_argument("--iters", type=int)

    p = argparse.ArgumentParser(prog="dlab", description="Disentangler toolkit.")
    groups = p.add_subparsers(dest="group", required=True)

    net = groups.add_parser("net", help="epsilon-nets of pure states")
    net.add_argument("action", choices=("build", "certify", "bounds"))
    net.add_argument("--d", type=int)
    net.add_argument("--eps", type=float)
    net.add_argument("--pool", type=int)
    net.add_argument("--samples", type=int)
    net.add_argument("--net-file")
    for sp in (net,):
        _inherit(sp, common)

    dis = groups.add_parser("disent", help="disentangler constructions")
    dis.add_argument("action", choices=("build", "verify", "bounds"))
    dis.add_argument("--kind", choices=("net", "definetti", "identity", "swap"), default="net")
    dis.add_argument("--d", type=int)
    dis.add_argument("--n", type=int)
    dis.add_argument("--eps", type=float)
    dis.add_argument("--delta", type=float)
    dis.add_argument("--net-file")
    dis.add_argument("--samples", type=int)
    dis.add_argument("--trials", type=int)
    dis.add_argument("--dim-r", type=int)
    dis.add_argument("--checks", default="c1,c2")
    dis.add_argument("--generic-input-opt", action="store_true")
    dis.add_argument("--with-choi", action="store_true")
    _inherit(dis, common)

    sep = groups.add_parser("sep", help="separability tools")
    sep.add_argument("action", choices=("fidelity", "distance", "ppt", "eb", "lemma2"))
    sep.add_argument("--state", help="state or Choi matrix file (.json or .qmx)")
    sep.add_argument("--dims", help="bipartition dA,dB")
    sep.add_argument("--in-dim", type=int)
    sep.add_argument("--out-dim", type=int)
    sep.add_argument("--r", type=int, help="POVM outcomes for lemma2")
    sep.add_argument("--eb-tol", type=float)
    _inherit(sep, common)

    sym = groups.add_parser("sym", help="symmetric subspace")
    sym.add_argument("action", choices=("dim", "definetti"))
    sym.add_argument("--d", type=int, required=True)
    sym.add_argument("--n", type=int, required=True)
    sym.add_argument("--k", type=int)
    sym.add_argument("--aux", type=int, default=1)
    sym.add_argument("--rank", type=int)
    sym.add_argument("--state")
    _inherit(sym, common)

    suite = groups.add_parser("suite", help="acceptance suite")
    suite.add_argument("action", choices=("acceptance",))
    suite.add_argument("--only", help="comma-separated criterion ids")
    suite.add_argument("--check-determinism", action="store_true",
                       help="run twice in subprocesses (1 and 4 threads) and compare the JSON bytes")
    _inherit(suite, common)
    return p


def _inherit(sub: argparse.ArgumentParser, common: argparse.ArgumentParser) -> None:
    for action in common._actions:
        sub._add_action(action)


def _load_config(path: str | None) -> dict:
    cfg = dict(CONFIG)
    if path:
        try:
            with open(path) as fh:
                extra = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        unknown = set(extra) - set(cfg)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(extra)
    return cfg


HANDLERS = {"net": cmd_net, "disent": cmd_disent, "sep": cmd_sep, "sym": cmd_sym, "suite": cmd_suite}


def main(argv=None) -> int:
    from .qcore import DimensionError
    from .symsub import CapExceeded

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        args.config = _load_config(args.config_path)
        if args.workers:
            os.environ["DLAB_THREADS"] = str(args.workers)
        return HANDLERS[args.group](args)
    except CapExceeded as exc:
        print(f"dlab: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (UsageError, DimensionError, ValueError) as exc:
        print(f"dlab: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
