"""Command-line front end: ``nlskam {seed,run,verify-lemmas,check-torus,report}``.

Every scalar config key is also a flag (``--rho0 0.05``, ``--mode-cap 3``).
Nested keys take JSON (``--omega-spec '{"support_cap": 3}'``).  Outputs go
to ``--out``, falling back to ``$NLSKAM_OUT`` and then ``./nlskam_out``.
The exit status is 0 exactly when every enabled check passes.  Config errors
exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

from .config import DEFAULTS, parse_config
from .errors import ConfigError, NlsKamError

OUT_ENV = "NLSKAM_OUT"
_NESTED = ("f_profile", "omega_spec", "tolerances")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc.msg}") from exc


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    g = p.add_argument_group("config keys")
    for key, default in DEFAULTS.items():
        flag = "--" + key.replace("_", "-")
        if key in _NESTED:
            typ = _json
        elif key == "invert_frequencies":
            typ = _bool
        elif key == "f_path":
            typ = str
        elif isinstance(default, int) and not isinstance(default, bool):
            typ = int
        else:
            typ = float
        g.add_argument(flag, dest=f"cfg_{key}", type=typ, default=None, metavar="VALUE")


def _load_config(args):
    text = None
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = parse_config(text, overrides=overrides)
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return cfg


def _outdir(args) -> str:
    out = args.out or os.environ.get(OUT_ENV) or "nlskam_out"
    os.makedirs(out, exist_ok=True)
    return out


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


# -- subcommands ------------------------------------------------------------------------------

def cmd_seed(args) -> int:
    from .engine import load_profile, sample_omega
    from .persist import dumps, nf_to_json
    from .seed import build_seed

    cfg = _load_config(args)
    profile = load_profile(cfg)
    omega, _ = sample_omega(cfg)
    nf, R = build_seed(profile, omega, cfg.eps, cfg.mode_cap, cfg.degree_cap)
    obj = {"config": cfg.as_dict(), "normal_form": nf_to_json(nf), "profile": profile.to_json_obj()}
    if len(R):
        obj["R"] = R.to_json_obj()
    path = os.path.join(_outdir(args), "seed.json")
    _write(path, dumps(obj))
    print(f"seed: {len(R)} perturbation terms, {2 * cfg.mode_cap + 1} modes -> {path}")
    return 0


def cmd_run(args) -> int:
    from .engine import run
    from .persist import write_run

    cfg = _load_config(args)
    rep = run(cfg, certify=not args.no_certify)
    paths = write_run(rep, _outdir(args))
    if rep.state is not None:
        print(render_table(rep.state.telemetry))
    if rep.inversion:
        print("frequency inversion residuals: " + ", ".join(f"{x:.3e}" for x in rep.inversion))
    if rep.failure:
        print(f"FAILED: {rep.failure['error']}: {rep.failure['message']}")
    for key, p in paths.items():
        print(f"{key}: {p}")
    return 0 if rep.ok else 1


def cmd_verify_lemmas(args) -> int:
    from .persist import dumps
    from .verify import verify_a1, verify_h1

    h1 = verify_h1(args.samples_h1, args.seed)
    a1 = verify_a1(args.samples_a1, args.seed)
    for rep in (h1, a1):
        print(f"{rep.name}: tested {rep.n_tested}, violations {rep.n_violations}, "
              f"min margin {rep.min_margin:.3e}, {rep.runtime:.2f} s -> {'PASS' if rep.ok else 'FAIL'}")
    ex = h1.notes["worked_example"]
    print(f"H1 worked example k={{5:1}} kp={{2:1,3:1}} theta=0.5: margin {ex['margin']:.4f}")
    deg = a1.notes["degenerate_regime"]
    print(f"a1 one/two-factor instances (outside the tested domain): {deg['counterexamples']} "
          f"of {deg['checked']} fail, reported only")
    path = os.path.join(_outdir(args), "lemmas.json")
    _write(path, dumps({"H1": h1.to_json_obj(), "a1": a1.to_json_obj()}))
    return 0 if h1.ok and a1.ok else 1


def cmd_check_torus(args) -> int:
    from .hamiltonian import NormalForm
    from .persist import FinalState, dumps
    from .seed import build_seed
    from .torus import check_torus

    out = _outdir(args)
    st = FinalState.load(args.state or os.path.join(out, "final_state.json"))
    if st.nf is None:
        print("final state holds no completed run", file=sys.stderr)
        return 1
    cfg = st.config
    tol = args.integrator_tol if args.integrator_tol is not None else cfg.tolerances["integrator_tol"]
    _, R_seed = build_seed(st.profile, st.V_star, cfg.eps, cfg.mode_cap, cfg.degree_cap)
    nf0 = NormalForm(st.V_star, cfg.mode_cap)
    chk = check_torus(nf0, R_seed, st.generators, st.torus, args.T, tol, args.phase_seed,
                      args.samples, args.method)
    tr, un = chk.transformed, chk.untransformed
    print(f"T = {args.T:g}, integrator tol = {tol:g}")
    for name, rec in (("transformed", tr), ("untransformed", un)):
        print(f"  {name:13s} energy drift {rec.energy_drift:.3e}  action drift (normal chart) "
              f"{rec.normal_action_drift:.3e}  raw {rec.action_drift:.3e}  window margin "
              f"{rec.window_margin:.3f}  {rec.runtime:.1f} s")
    for k, v in chk.checks.items():
        print(f"  {k}: {'PASS' if v else 'FAIL'}")
    print("  note: bounded drift is a necessary numeric consequence of linear stability, "
          "not an equivalent statement")
    _write(os.path.join(out, "torus.json"), dumps(chk.to_json_obj()))
    return 0 if chk.ok else 1


def cmd_report(args) -> int:
    from .persist import read_telemetry

    path = args.telemetry or os.path.join(_outdir(args), "telemetry.csv")
    with open(path) as fh:
        rows = read_telemetry(fh.read())
    table = contraction_rows(rows)
    print(render_table(rows))
    out = _outdir(args)
    _write(os.path.join(out, "contraction.txt"), render_table(rows) + "\n")
    buf = io.StringIO()
    cols = ["s", "eps_s", "bound_R0", "norm_R0_plus", "bound_R1", "norm_R1_plus",
            "bound_R2", "norm_R2_plus", "pass"]
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(cols)
    for r in table:
        wr.writerow([repr(r[c]) if isinstance(r[c], float) else str(r[c]).lower() for c in cols])
    _write(os.path.join(out, "contraction.csv"), buf.getvalue())
    return 0 if table and all(r["pass"] for r in table) else 1


# -- report helpers ---------------------------------------------------------------------------

def contraction_rows(rows: list[dict]) -> list[dict]:
    """Bounds per telemetry row, with the pass flag for each step."""
    out = []
    eps0 = None
    for r in rows:
        s = int(r["step"])
        e = float(r["eps_s_target"])
        if eps0 is None:
            eps0 = e ** (1.0 / 1.5 ** s)
        if s == 0:
            b = (e, e ** 0.6, e)
        else:
            d = sum(1.0 / (math.pi ** 2 * j ** 2) for j in range(1, s + 1))
            b = (e, e ** 0.6, (1 + d) * eps0)
        norms = (r["norm_R0_plus"], r["norm_R1_plus"], r["norm_R2_plus"])
        ok = all(n <= bb for n, bb in zip(norms, b))
        out.append({"s": s, "eps_s": e, "bound_R0": b[0], "norm_R0_plus": norms[0],
                    "bound_R1": b[1], "norm_R1_plus": norms[1], "bound_R2": b[2],
                    "norm_R2_plus": norms[2], "pass": ok})
    return out


def render_table(rows: list[dict]) -> str:
    head = f"{'s':>2}  {'eps_s':>10}  {'|R0|+':>10}  {'|R1|+':>10}  {'|R2|+':>10}  {'terms':>6}  result"
    lines = [head, "-" * len(head)]
    for r in contraction_rows(rows):
        lines.append(f"{r['s']:>2}  {r['eps_s']:10.3e}  {r['norm_R0_plus']:10.3e}  "
                     f"{r['norm_R1_plus']:10.3e}  {r['norm_R2_plus']:10.3e}  "
                     f"{next(x['n_terms'] for x in rows if int(x['step']) == r['s']):>6}  "
                     f"{'pass' if r['pass'] else 'FAIL'}")
    return "\n".join(lines)


# -- entry point ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlskam", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./nlskam_out)")

    sp = sub.add_parser("seed", help="materialize and serialize the seed Hamiltonian")
    common(sp), _add_config_flags(sp)
    sp.set_defaults(func=cmd_seed)

    sp = sub.add_parser("run", help="run the KAM iteration and write telemetry and final state")
    common(sp), _add_config_flags(sp)
    sp.add_argument("--no-certify", action="store_true", help="record norms without enforcing bounds")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify-lemmas", help="brute-force tests of the two counting inequalities")
    common(sp)
    sp.add_argument("--samples-h1", type=int, default=100_000)
    sp.add_argument("--samples-a1", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_verify_lemmas)

    sp = sub.add_parser("check-torus", help="integrate the seed system from the constructed torus")
    common(sp)
    sp.add_argument("--state", help="final_state.json (default: <out>/final_state.json)")
    sp.add_argument("--T", type=float, default=1e3)
    sp.add_argument("--integrator-tol", type=float, default=None)
    sp.add_argument("--phase-seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=200, help="sample times on [0, T]")
    sp.add_argument("--method", choices=("DOP853", "midpoint"), default="DOP853")
    sp.set_defaults(func=cmd_check_torus)

    sp = sub.add_parser("report", help="render telemetry into a contraction table and CSV")
    common(sp)
    sp.add_argument("--telemetry", help="telemetry.csv (default: <out>/telemetry.csv)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NlsKamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
