"""Command-line interface: ``qwielandt <subcommand> ...``.

Exit codes: 0 when every check passes, 2 when a bound or certificate fails
(a mathematical finding), 1 on operational errors (bad input, unmet
preconditions), with a JSON error object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import enum
import io
import json
import math
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dynamics as dy
from . import mapmodel as mm
from . import multdomain as md
from . import primitivity as pr
from . import zoo
from .errors import BadParams, CapExceeded, InconclusiveSpan, NotPrimitive, QWielandtError, SchemaError
from .numkernel import DEFAULT_TOL, ToleranceConfig
from .spectral import analyze_spectrum

EXIT_OK, EXIT_ERROR, EXIT_FINDING = 0, 1, 2

SWEEP_COLUMNS = (
    ["instance_id", "family", "d", "seed", "primitive", "omega_lower", "omega_upper", "kappa", "i_index"]
    + [f"bound_{name}" for name in pr.BOUND_NAMES]
    + ["c_lower", "runtime_ms"]
)


class CliError(QWielandtError):
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


# -- JSON helpers ---------------------------------------------------------------


def jsonable(obj):
    """Recursively convert numpy values, enums and infinities into JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return mm.encode_matrix(obj)
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return jsonable(obj.item())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False)


# -- inputs ---------------------------------------------------------------------


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise BadParams(f"expected key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def load_map(ref: str, params=None) -> mm.SuperOperator:
    """A channel JSON path, or ``zoo:<name>`` for a registry map."""
    if ref.startswith("zoo:"):
        return zoo.named(ref[4:], **_parse_params(params))
    return mm.load_channel(ref)


def _tolerances(args) -> ToleranceConfig:
    if getattr(args, "tol_file", None):
        return ToleranceConfig.from_json_file(args.tol_file)
    return DEFAULT_TOL


# -- subcommands ----------------------------------------------------------------


def cmd_analyze(args, tol) -> tuple[int, dict]:
    s = load_map(args.channel, args.param)
    out = {"d": s.d, "name": s.name, "predicates": mm.predicates(s, tol, seed=args.seed).to_dict()}
    spec = analyze_spectrum(s, tol, seed=args.seed)
    out["spectrum"] = spec.to_dict()
    dom = md.mult_domain(s, tol)
    out["mult_domain"] = {
        "dim": dom.dim,
        "star_closed": dom.verified_star_closed,
        "mult_closed": dom.verified_mult_closed,
        "diagnostics": dom.diagnostics,
    }
    if args.emit_basis:
        out["mult_domain"]["basis"] = [mm.encode_matrix(b) for b in dom.basis]
    try:
        out["chain"] = md.mult_chain(s, tol).to_dict(emit_basis=args.emit_basis)
    except QWielandtError as exc:
        out["chain"] = {"error": exc.code, "message": str(exc)}
    if not spec.primitive.falsified:
        try:
            out["index"] = pr.omega_index(s, tol=tol, seed=args.seed, check_primitive=False).to_dict()
        except CapExceeded as exc:
            out["index"] = {"error": exc.code, "message": str(exc), "partial": _partial(exc)}
    return EXIT_OK, out


def _partial(exc: CapExceeded):
    p = exc.partial
    return p.to_dict() if hasattr(p, "to_dict") else p


def _bound_summary(report: pr.IndexReport) -> dict:
    lines = {}
    for name, row in report.bounds.items():
        if row.applicable:
            mark = "ok" if row.satisfied else "VIOLATED"
            lines[name] = f"{jsonable(row.observed)} ≤ {jsonable(row.claimed)} {mark}"
    return lines


def cmd_verify(args, tol) -> tuple[int, dict]:
    s = load_map(args.channel, args.param)
    if args.bounds == "tensor":
        if not args.with_channel:
            raise CliError("--bounds tensor needs a second map via --with")
        other = load_map(args.with_channel, args.with_param)
        omega = pr.tensor_omega_check(s, other, tol, seed=args.seed)
        split = md.tensor_split_check(s, other, tol)
        out = {"tensor_omega": omega.to_dict(), "tensor_split": split.to_dict()}
        ok = omega.omega_rule_ok and split.split_ok and split.kappa_rule_ok
        return (EXIT_OK if ok else EXIT_FINDING), out
    report = pr.verify_bounds(s, tol, which=args.bounds, seed=args.seed)
    out = report.to_dict()
    out["summary"] = _bound_summary(report)
    out["violations"] = report.violations
    return (EXIT_OK if report.all_satisfied else EXIT_FINDING), out


def cmd_classical(args, tol) -> tuple[int, dict]:
    data = json.loads(Path(args.matrix).read_text())
    try:
        rows = np.array(data["rows"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"classical matrix JSON needs numeric 'rows': {exc}") from None
    if "d" in data and rows.shape != (data["d"], data["d"]):
        raise SchemaError(f"rows have shape {rows.shape}, expected {data['d']}×{data['d']}")
    res = pr.classical_wielandt(rows)
    out = res.to_dict()
    if res.p is not None:
        out["summary"] = f"{res.p} ≤ {res.bound} {'ok' if res.bound_ok else 'VIOLATED'}"
    return (EXIT_OK if res.bound_ok else EXIT_FINDING), out


def cmd_zero_error(args, tol) -> tuple[int, dict]:
    s = load_map(args.channel, args.param)
    try:
        cert = dy.zero_error_dichotomy(s, tol, seed=args.seed)
    except InconclusiveSpan as exc:
        return EXIT_FINDING, {"finding": exc.code, "message": str(exc)}
    return (EXIT_OK if cert.holds else EXIT_FINDING), cert.to_dict()


def cmd_contraction(args, tol) -> tuple[int, dict]:
    s = load_map(args.channel, args.param)
    if args.power == "omega":
        rep = dy.contractivity_of_power(s, tol, seed=args.seed)
        return (EXIT_OK if rep.strictly_contractive else EXIT_FINDING), rep.to_dict()
    k = int(args.power)
    return EXIT_OK, dy.contraction_coefficient(mm.power(s, k), tol, seed=args.seed).to_dict()


# -- sweep ----------------------------------------------------------------------


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return repr(x)
    return str(x)


def sweep_instance(s: mm.SuperOperator, instance_id: str, family: str, seed: int, tol, contraction: bool = True) -> dict:
    """One SweepRow (as a dict keyed by column) plus side information."""
    t0 = time.perf_counter()
    row = dict.fromkeys(SWEEP_COLUMNS)
    row.update(instance_id=instance_id, family=family, d=s.d, seed=seed)
    info = {"violations": [], "error": None}
    spec = analyze_spectrum(s, tol, seed=seed)
    row["primitive"] = None if spec.primitive.verdict is mm.Verdict.UNFALSIFIED else spec.primitive.certified
    if not spec.primitive.falsified:
        try:
            rep = pr.verify_bounds(s, tol, seed=seed, spectral=spec)
            row.update(omega_lower=rep.omega_lower, omega_upper=rep.omega_upper, kappa=rep.kappa, i_index=rep.i_index)
            for name, flag in rep.bound_flags().items():
                row[f"bound_{name}"] = flag
            info["violations"] = rep.violations
            if contraction and not math.isinf(rep.omega_upper):
                c = dy.contraction_coefficient(mm.power(s, int(rep.omega_upper)), tol, seed=seed)
                row["c_lower"] = c.c_lower
        except CapExceeded as exc:
            row.update(omega_lower=getattr(exc.partial, "omega_lower", None), omega_upper=math.inf)
            info["violations"] = ["omega_cap"]
            info["error"] = str(exc)
        except NotPrimitive as exc:
            info["error"] = str(exc)
    info["runtime_ms"] = (time.perf_counter() - t0) * 1e3
    return {"row": row, "info": info}


def cmd_sweep(args, tol) -> tuple[int, dict]:
    params = json.loads(args.params) if args.params else {}
    if args.config:
        base = zoo.EnsembleSpec.from_file(args.config)
        specs = [base]
    else:
        if not args.family or not args.d:
            raise CliError("sweep needs --family and --d (or --config)")
        specs = [zoo.EnsembleSpec(args.family, d, args.count, args.seed, params) for d in args.d]

    jobs = []
    for spec in specs:
        for k, s in enumerate(zoo.sample(spec)):
            jobs.append((s, f"{spec.family}-d{spec.d}-s{spec.seed}-{k:05d}", spec.family, spec.seed))

    def run(job):
        s, iid, fam, seed = job
        return sweep_instance(s, iid, fam, seed, tol, contraction=not args.no_contraction)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    results.sort(key=lambda r: r["row"]["instance_id"])

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in results:
        if args.timing:
            r["row"]["runtime_ms"] = round(r["info"]["runtime_ms"], 3)
        writer.writerow([_cell(r["row"][c]) for c in SWEEP_COLUMNS])
    csv_text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(csv_text)

    summary = {"instances": len(results), "per_d": {}, "violations": [], "errors": []}
    for d in sorted({r["row"]["d"] for r in results}):
        rows = [r["row"] for r in results if r["row"]["d"] == d]
        omegas = [x["omega_upper"] for x in rows if x["omega_upper"] is not None and not math.isinf(x["omega_upper"])]
        summary["per_d"][str(d)] = {
            "count": len(rows),
            "primitive": sum(1 for x in rows if x["primitive"]),
            "omega_max": max(omegas) if omegas else None,
            "omega_median": statistics.median(omegas) if omegas else None,
            "kappa_max": max((x["kappa"] for x in rows if x["kappa"] is not None), default=None),
        }
    for r in results:
        if r["info"]["violations"]:
            summary["violations"].append({"instance_id": r["row"]["instance_id"], "bounds": r["info"]["violations"]})
        if r["info"]["error"]:
            summary["errors"].append({"instance_id": r["row"]["instance_id"], "message": r["info"]["error"]})
    if args.summary:
        Path(args.summary).write_text(dumps(summary) + "\n")
    if not args.out:
        return (EXIT_FINDING if summary["violations"] else EXIT_OK), csv_text
    return (EXIT_FINDING if summary["violations"] else EXIT_OK), summary


# -- parser ---------------------------------------------------------------------


def _common_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; SUPPRESS keeps them from resetting values given earlier
    def default(value):
        return argparse.SUPPRESS if suppress else value

    common = _Parser(add_help=False)
    common.add_argument("--tol-file", default=default(None), help="JSON file overriding tolerance fields")
    common.add_argument("--threads", type=int, default=default(1), help="worker threads for sweeps")
    common.add_argument("--emit-basis", action="store_true", default=default(False), help="include domain bases in reports")
    common.add_argument("--seed", type=int, default=default(0), help="seed for randomized searches")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qwielandt", description=__doc__.splitlines()[0], parents=[_common_flags(False)])
    common = _common_flags(True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def channel_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("channel", help="channel JSON file, or zoo:<name>")
        p.add_argument("--param", action="append", metavar="KEY=VALUE", help="parameter for zoo maps")
        return p

    channel_cmd("analyze", "spectral, domain and index report")
    p = channel_cmd("verify", "check every applicable bound")
    p.add_argument("--bounds", choices=["all", "main", "ppt-eb", "tensor", "adjoint"], default="all")
    p.add_argument("--with", dest="with_channel", help="second map for --bounds tensor")
    p.add_argument("--with-param", action="append", metavar="KEY=VALUE")
    channel_cmd("certify-zero-error", "zero-error dichotomy certificate")
    p = channel_cmd("contraction", "trace-norm contraction report")
    p.add_argument("--power", default="1", help="integer power, or 'omega' for the primitivity powers")

    p = sub.add_parser("classical", help="classical index of primitivity", parents=[common])
    p.add_argument("--matrix", required=True, help='JSON file {"d": int, "rows": [[...], ...]}')

    p = sub.add_parser("sweep", help="ensemble sweep to CSV", parents=[common])
    p.add_argument("--family", choices=sorted(zoo.FAMILIES))
    p.add_argument("--d", type=int, nargs="+")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--params", help="family parameters as a JSON object")
    p.add_argument("--config", help="ensemble spec as JSON or TOML")
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--summary", help="JSON summary output path")
    p.add_argument("--timing", action="store_true", help="fill runtime_ms (makes output run-dependent)")
    p.add_argument("--no-contraction", action="store_true", help="skip the c_lower column")
    return parser


COMMANDS = {
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "classical": cmd_classical,
    "certify-zero-error": cmd_zero_error,
    "contraction": cmd_contraction,
    "sweep": cmd_sweep,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        tol = _tolerances(args)
        code, payload = COMMANDS[args.command](args, tol)
    except (QWielandtError, OSError, ValueError) as exc:
        code_name = getattr(exc, "code", type(exc).__name__)
        stderr.write(json.dumps({"error": code_name, "message": str(exc)}) + "\n")
        return EXIT_ERROR
    if isinstance(payload, str):
        stdout.write(payload)
    elif payload is not None:
        stdout.write(dumps(payload) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
