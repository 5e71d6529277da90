"""Command line: ``hetcons verify|synth|simulate|example``.

Exit codes: 0 on success, 1 on a validation failure (bad input, failed
precondition or failed check), 2 on a numerical failure. Output files are
written to a temporary name and renamed, so a failed run leaves no partial
artifacts behind.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from .errors import HetconsError, NumericalError, ValidationError
from .graph import build_matrices, check_rank_condition, reachable_nodes
from .numeric import DEFAULT_POLICY
from .plot import emit_plot
from .protocol import MODES
from .scenario import BUILTIN, builtin_example, parse_scenario
from .sim import design, run_scenario
from .synthesis import _jsonable

TRAJECTORY_CSV = "trajectory.csv"
METRICS_JSON = "metrics.json"
OUTPUTS_SVG = "outputs.svg"
GAINS_JSON = "gains.json"


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(traj):
    lines = [",".join(traj.header())]
    for row in traj.table():
        lines.append(",".join(format(float(v), ".17g") for v in row))
    return "\n".join(lines) + "\n"


def _dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_run_artifacts(rep, out_dir):
    """Render everything in memory first, then rename into place."""
    files = {TRAJECTORY_CSV: trajectory_csv(rep.trajectory),
             METRICS_JSON: _dumps(rep.summary()),
             OUTPUTS_SVG: emit_plot(rep.trajectory, title=f"{rep.scenario.name} ({rep.mode})")}
    for name, text in files.items():
        atomic_write(os.path.join(out_dir, name), text)
    return [os.path.join(out_dir, n) for n in files]


def _load(args):
    if args.scenario is None:
        raise ValidationError("a scenario file is required")
    s = parse_scenario(args.scenario)
    if getattr(args, "mode", None):
        s = s.with_mode(args.mode)
    return s


def cmd_verify(args, out):
    s = _load(args)
    lines = []
    g = s.graph
    roots = sorted(reachable_nodes(g))
    ok = bool(roots)
    lines.append(f"graph: {g.n} nodes, {len(g.edges)} edges, reachable nodes {roots or 'none'}")
    if not ok:
        lines.append("FAIL connectivity: no node is reachable from every other node "
                     "(the rank and scaling conditions fail with it)")
        print("\n".join(lines), file=out)
        return 1
    i_R = s.protocol.i_R or roots[0]
    rank_ok = check_rank_condition(build_matrices(g).laplacian, i_R)
    lines.append(f"rank condition at i_R={i_R}: {'pass' if rank_ok else 'FAIL'}")
    try:
        rep = design(s)
    except ValidationError as exc:
        lines.append(f"FAIL {exc}")
        print("\n".join(lines), file=out)
        return 1
    for r in rep.assumption:
        lines.append(f"agent {r.agent_id}: internal-model condition "
                     f"{'pass' if r.passed else 'FAIL'}")
    st = rep.stability
    lines.append(f"stability: A-BMF abscissa {st.abscissa_F:.4g}, A-LMC abscissa "
                 f"{st.abscissa_L:.4g}, separation error {st.separation_error:.2e}")
    for mode, a in st.abscissa_modes.items():
        lines.append(f"  mode {mode}: abscissa {a:.4g}")
    lines.append("verify: PASS" if st.passed else "verify: FAIL")
    print("\n".join(lines), file=out)
    return 0 if st.passed else 1


def cmd_synth(args, out):
    s = _load(args)
    rep = design(s)
    doc = {"scenario": s.name, "gains": rep.gains.as_dict(),
           "weighting": {str(k): w.as_dict() for k, w in rep.weightings.items()},
           "scaling": rep.scaling.d.tolist(), "epsilon": rep.epsilon,
           "numeric_defaults": DEFAULT_POLICY.as_dict()}
    path = args.out if args.out.endswith(".json") else os.path.join(args.out, GAINS_JSON)
    atomic_write(path, _dumps(doc))
    print(f"wrote {path}", file=out)
    return 0


def _simulate(s, args, out):
    rep = run_scenario(s)
    paths = write_run_artifacts(rep, args.out)
    m = rep.metrics
    settle = "inf" if np.isinf(m.settle_time) else f"{m.settle_time:.4g}"
    print(f"{s.name} [{rep.mode}]: settle_time={settle} final_error={m.final_error:.3e} "
          f"pairwise_final={m.pairwise_final:.3e}", file=out)
    for p in paths:
        print(f"wrote {p}", file=out)
    return 0


def cmd_simulate(args, out):
    return _simulate(_load(args), args, out)


def cmd_example(args, out):
    s = builtin_example(args.name, args.ref, args.mode, args.method)
    return _simulate(s, args, out)


def build_parser():
    p = argparse.ArgumentParser(prog="hetcons", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    modes = list(MODES)

    v = sub.add_parser("verify", help="graph, internal-model and stability checks")
    v.add_argument("scenario")
    v.add_argument("--mode", choices=modes)
    v.set_defaults(func=cmd_verify)

    sy = sub.add_parser("synth", help="synthesize gains and write them as JSON")
    sy.add_argument("scenario")
    sy.add_argument("--out", default=GAINS_JSON)
    sy.set_defaults(func=cmd_synth)

    sm = sub.add_parser("simulate", help="simulate and write CSV, metrics and SVG")
    sm.add_argument("scenario")
    sm.add_argument("--mode", choices=modes)
    sm.add_argument("--out", default="out")
    sm.set_defaults(func=cmd_simulate)

    ex = sub.add_parser("example", help="run a built-in scenario")
    ex.add_argument("name", choices=list(BUILTIN))
    ex.add_argument("--ref", choices=["sinusoid", "ramp"], default="sinusoid")
    ex.add_argument("--mode", choices=modes, default="fi")
    ex.add_argument("--method", choices=["lqg", "hinf", "lqg_ltr"], default="lqg")
    ex.add_argument("--out", default="out")
    ex.set_defaults(func=cmd_example)
    return p


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ValidationError as exc:
        print(f"error: {exc}", file=err)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=err)
        return 2
    except HetconsError as exc:
        print(f"error: {exc}", file=err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
