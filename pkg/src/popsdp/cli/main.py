"""Command line driver.

``popsdp relax``  assemble a relaxation and write it in SDPA sparse format
``popsdp solve``  run the full pipeline and report the gap verdict
``popsdp demo``   run a built-in example with and without the ball constraint

Exit codes: 0 no gap, 3 gap, 4 inconclusive, 5 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..certificates import Verdict, extract_minimizer, extract_sos_certificate, strong_duality_verdict, trace_bound_check
from ..pop import add_ball_constraint, scale_to_unit_ball
from ..relaxation import RelaxationOrderError, assemble, relaxation_order_min
from ..sdp import SolverOptions, solve
from .popfile import PopSyntaxError, parse_document
from .sdpa import format_sdpa

SCHEMA_VERSION = 1
SCHEMA_PATH = Path(__file__).with_name("report.schema.json")

EXIT_NO_GAP = 0
EXIT_GAP = 3
EXIT_INCONCLUSIVE = 4
EXIT_INPUT = 5
_EXIT = {Verdict.NO_GAP: EXIT_NO_GAP, Verdict.GAP: EXIT_GAP, Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}

DEMOS = {
    "schweighofer": (
        "# min x1*x2 over [-1, 1] x {0}; the second factor is pinned by -x2^2 >= 0\n"
        "vars x1 x2\n"
        "minimize x1*x2\n"
        "st x1 + 1 >= 0\n"
        "   1 - x1 >= 0\n"
        "   -x2^2 >= 0\n",
        2.0,
        (1, 2),
    ),
}


def _real(v):
    """JSON-safe float: infinities become strings, nan becomes null."""
    if v is None or math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _empty_report(name: str, digest: str | None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "run",
        "input": name,
        "input_digest": digest,
        "order": None,
        "ball_radius": None,
        "scaled": False,
        "normalized": False,
        "status": None,
        "moment_value": None,
        "sos_value": None,
        "verdict": None,
        "bound_report": None,
        "certificate": None,
        "minimizer": None,
        "seconds": 0.0,
        "iterations": 0,
        "exit_code": EXIT_INPUT,
        "error": None,
    }


def run_problem(
    text: str,
    name: str = "<input>",
    order: int | None = None,
    ball: float | None = None,
    scale: bool | None = None,
    normalize: bool | None = None,
    tol: float = 1e-6,
    opts: SolverOptions | None = None,
) -> dict:
    """Parse, relax, solve and check one problem; returns a report dict.

    ``ball``, ``scale`` and ``normalize`` override the file's directives.
    Input errors are reported in the ``error`` field, never raised.
    """
    t0 = time.perf_counter()
    rep = _empty_report(name, "sha256:" + hashlib.sha256(text.encode()).hexdigest())
    try:
        doc = parse_document(text)
        R = ball if ball is not None else doc.ball
        do_scale = doc.scale if scale is None else scale
        do_norm = doc.normalize if normalize is None else normalize
        pop = doc.base_pop()
        if R is not None:
            pop = add_ball_constraint(pop, R)
        back = None
        if do_scale:
            pop, back = scale_to_unit_ball(pop, normalize=do_norm)
        d = order if order is not None else max(1, relaxation_order_min(pop))
        sdp = assemble(pop, d)
    except (PopSyntaxError, RelaxationOrderError, ValueError) as exc:
        rep["error"] = str(exc)
        rep["seconds"] = time.perf_counter() - t0
        return rep

    sol = solve(sdp, opts)
    verdict = strong_duality_verdict(sol, tol)
    rep.update(
        order=d,
        ball_radius=R,
        scaled=bool(do_scale),
        normalized=bool(do_scale and do_norm),
        status=sol.status.value,
        moment_value=_real(sol.moment_value),
        sos_value=_real(sol.sos_value),
        verdict=verdict.value,
        iterations=sol.iterations,
        exit_code=_EXIT[verdict],
    )
    if sol.y is not None:
        if pop.ball_radius is not None:
            rep["bound_report"] = trace_bound_check(sol.y, pop.ball_radius, d).as_dict()
        x = extract_minimizer(sol.y, pop, d)
        if x is not None:
            x = back(x) if back is not None else x
            rep["minimizer"] = [float(v) + 0.0 for v in x]
    if sol.status.value == "Optimal":
        cert = extract_sos_certificate(sdp, sol)
        rep["certificate"] = {"lower_bound": cert.lower_bound, "residual": cert.residual}
    rep["seconds"] = time.perf_counter() - t0
    return rep


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def run_demo(name: str, tol: float = 1e-6) -> dict:
    if name not in DEMOS:
        raise KeyError(f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}")
    text, R, orders = DEMOS[name]
    runs = []
    for d in orders:
        for ball in (None, R):
            runs.append(run_problem(text, f"{name} d={d} " + ("no ball" if ball is None else f"ball R={R:g}"), d, ball, tol=tol))
    return {"schema_version": SCHEMA_VERSION, "kind": "demo", "demo": name, "runs": runs}


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, str):
        return v
    return f"{v:.3e}"


def demo_table(report: dict) -> str:
    """Side-by-side table: one row per order, no-ball columns then ball columns."""
    runs = report["runs"]
    head = f"{'d':>2}  {'no ball: status':<15} {'val_P':>10} {'val_D':>10} {'verdict':<12} | {'ball: status':<13} {'val_P':>10} {'val_D':>10} {'verdict':<7}"
    lines = [head, "-" * len(head)]
    for plain, ball in zip(runs[::2], runs[1::2]):
        lines.append(
            f"{plain['order']:>2}  {plain['status']:<15} {_fmt(plain['moment_value']):>10} {_fmt(plain['sos_value']):>10} {plain['verdict']:<12} | "
            f"{ball['status']:<13} {_fmt(ball['moment_value']):>10} {_fmt(ball['sos_value']):>10} {ball['verdict']}"
        )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# argument handling


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--order", type=int, default=None, help="relaxation order d (default: smallest admissible)")
    p.add_argument("--ball", type=float, default=None, metavar="R", help="append the ball constraint R^2 - |x|^2 >= 0")
    p.add_argument("--scale", action="store_true", default=None, help="solve on the unit ball (needs a ball)")
    p.add_argument("--normalize", action="store_true", default=None, help="with --scale, divide constraints by their largest coefficient")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="popsdp", description="Moment/SOS relaxations of polynomial optimization problems.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("relax", help="assemble a relaxation and write it in SDPA sparse format")
    p.add_argument("file")
    _common(p)
    p.add_argument("-o", "--output", default="-", help="output path (default: stdout)")

    p = sub.add_parser("solve", help="solve relaxations and report the duality gap verdict")
    p.add_argument("files", nargs="+")
    _common(p)
    p.add_argument("--report", default=None, help="JSON report path (a directory when several files are given)")
    p.add_argument("--jobs", type=int, default=1, help="number of problems solved in parallel")
    p.add_argument("--tol", type=float, default=1e-6, help="relative tolerance of the gap verdict")

    p = sub.add_parser("demo", help="run a built-in example with and without the ball constraint")
    p.add_argument("name")
    p.add_argument("--report", default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    return ap


def _solve_file(path: str, args: dict) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        rep = _empty_report(path, None)
        rep["error"] = f"cannot read {path}: {exc.strerror}"
        return rep
    return run_problem(text, path, **args)


def _cmd_relax(ns) -> int:
    try:
        doc = parse_document(Path(ns.file).read_text())
        R = ns.ball if ns.ball is not None else doc.ball
        pop = doc.base_pop()
        if R is not None:
            pop = add_ball_constraint(pop, R)
        if ns.scale if ns.scale is not None else doc.scale:
            pop, _ = scale_to_unit_ball(pop, normalize=bool(ns.normalize if ns.normalize is not None else doc.normalize))
        d = ns.order if ns.order is not None else max(1, relaxation_order_min(pop))
        data = format_sdpa(assemble(pop, d))
    except (OSError, ValueError) as exc:
        print(f"popsdp relax: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if ns.output == "-":
        sys.stdout.write(data)
    else:
        Path(ns.output).write_bytes(data.encode("ascii"))
    return EXIT_NO_GAP


def _summary(rep: dict) -> str:
    if rep["error"]:
        return f"{rep['input']}: error: {rep['error']}"
    x = "" if rep["minimizer"] is None else "  x* = (" + ", ".join(f"{v:.6g}" for v in rep["minimizer"]) + ")"
    return (
        f"{rep['input']}: d={rep['order']} status={rep['status']} val_P={_fmt(rep['moment_value'])} "
        f"val_D={_fmt(rep['sos_value'])} verdict={rep['verdict']}{x}"
    )


def _cmd_solve(ns) -> int:
    if ns.ball is not None and not ns.ball > 0:
        print("popsdp solve: --ball must be positive", file=sys.stderr)
        return EXIT_INPUT
    if ns.jobs < 1:
        print("popsdp solve: --jobs must be positive", file=sys.stderr)
        return EXIT_INPUT
    args = dict(order=ns.order, ball=ns.ball, scale=ns.scale, normalize=ns.normalize, tol=ns.tol)
    if ns.jobs > 1 and len(ns.files) > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            reports = list(pool.map(_solve_file, ns.files, [args] * len(ns.files)))
    else:
        reports = [_solve_file(f, args) for f in ns.files]
    for rep in reports:
        print(_summary(rep))
    if ns.report:
        out = Path(ns.report)
        if len(reports) == 1:
            out.write_text(dumps(reports[0]))
        else:
            out.mkdir(parents=True, exist_ok=True)
            for f, rep in zip(ns.files, reports):
                (out / (Path(f).stem + ".json")).write_text(dumps(rep))
    return max(rep["exit_code"] for rep in reports)


def _cmd_demo(ns) -> int:
    try:
        report = run_demo(ns.name, ns.tol)
    except KeyError as exc:
        print(f"popsdp demo: {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    print(demo_table(report))
    if ns.report:
        Path(ns.report).write_text(dumps(report))
    # the ball runs carry the claim under test
    return max(rep["exit_code"] for rep in report["runs"][1::2])


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return {"relax": _cmd_relax, "solve": _cmd_solve, "demo": _cmd_demo}[ns.command](ns)


if __name__ == "__main__":
    sys.exit(main())
