"""Deterministic serialization of runs: telemetry CSV, divisor CSV and final-state JSON.

Floats in CSV files use ``repr``, which round-trips exactly.  Coefficients
inside JSON use ``float.hex``.  Keys are sorted, so identical runs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings

import numpy as np

from .config import RunConfig, parse_config
from .engine import TELEMETRY_COLUMNS, RunReport
from .hamiltonian import Hamiltonian, NormalForm, TorusSpec
from .lattice import Monomial
from .seed import GevreyProfile

DIVISOR_COLUMNS = ["step", "monomial_id", "divisor", "floor", "resonant"]
FORMAT_VERSION = 1


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for row in rows:
        wr.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def telemetry_csv(rows: list[dict]) -> str:
    return _csv(rows, TELEMETRY_COLUMNS)


def read_telemetry(text: str) -> list[dict]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append({k: (int(v) if k in ("step", "n_terms", "n_solved", "n_deferred", "lie_orders_used")
                        else float(v)) for k, v in row.items()})
    return out


def monomial_id(m: Monomial) -> str:
    """Compact readable key, for example ``a[1:1]k[2:1]kp[-1:1]j[0]``."""
    def ev(e):
        return ",".join(f"{n}:{x}" for n, x in e)
    return f"a[{ev(m.a)}]k[{ev(m.k)}]kp[{ev(m.kp)}]j[{','.join(str(n) for n in m.j)}]"


def divisor_csv(reports_by_step: list[list]) -> str:
    rows = []
    for s, reports in enumerate(reports_by_step, start=1):
        for r in reports:
            rows.append({"step": s, "monomial_id": monomial_id(r.key), "divisor": r.divisor,
                         "floor": r.threshold, "resonant": r.resonant})
    return _csv(rows, DIVISOR_COLUMNS)


def _hexlist(x) -> list[str]:
    return [float(v).hex() for v in np.asarray(x, dtype=float).ravel()]


def _unhex(x) -> np.ndarray:
    return np.array([float.fromhex(v) for v in x])


def _clean(obj):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def nf_to_json(nf: NormalForm) -> dict:
    return {"mode_cap": nf.mode_cap, "vtilde": _hexlist(nf.vtilde), "const": float(nf.const).hex(),
            "frequencies": [repr(float(v)) for v in nf.frequencies]}


def nf_from_json(obj: dict) -> NormalForm:
    return NormalForm(_unhex(obj["vtilde"]), int(obj["mode_cap"]), float.fromhex(obj["const"]))


def torus_to_json(t: TorusSpec) -> dict:
    return {"r": t.r, "theta": t.theta, "mode_cap": t.mode_cap, "I0": _hexlist(t.I0)}


def torus_from_json(obj: dict) -> TorusSpec:
    return TorusSpec(float(obj["r"]), float(obj["theta"]), int(obj["mode_cap"]), _unhex(obj["I0"]))


def final_state_obj(rep: RunReport) -> dict:
    st = rep.state
    obj = {
        "format": FORMAT_VERSION,
        "config": rep.config.as_dict(),
        "ok": rep.ok,
        "failure": rep.failure,
        "omega": _hexlist(rep.omega),
        "omega_info": {k: (sorted(v.items()) if isinstance(v, dict) else v)
                       for k, v in rep.omega_info.items()},
        "V_star": _hexlist(rep.V_star),
        "inversion_history": list(rep.inversion),
        "seed_norm": rep.seed_norm,
        "final_bound": rep.final_bound,
        "profile": rep.profile.to_json_obj(),
    }
    if st is not None:
        obj.update({
            "steps_done": st.step,
            "normal_form": nf_to_json(st.nf),
            "frequencies": [repr(float(v)) for v in st.nf.frequencies],
            "torus": torus_to_json(st.torus),
            "R": st.R.to_json_obj(),
            "generators": [F.to_json_obj() for F in st.generators],
            "frequency_shifts": [_hexlist(s) for s in st.shifts],
            "telemetry": st.telemetry,
        })
    return _clean(obj)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


class FinalState:
    """Read-only view of a saved final state, enough to rerun the torus check."""

    def __init__(self, obj: dict):
        self.obj = obj
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.config: RunConfig = parse_config(obj["config"])
        self.V_star = _unhex(obj["V_star"])
        self.omega = _unhex(obj["omega"])
        self.profile = GevreyProfile.from_json_obj(obj["profile"])
        self.ok = bool(obj["ok"])
        self.nf = nf_from_json(obj["normal_form"]) if "normal_form" in obj else None
        self.torus = torus_from_json(obj["torus"]) if "torus" in obj else None
        self.R = Hamiltonian.from_json_obj(obj["R"]) if "R" in obj else None
        self.generators = [Hamiltonian.from_json_obj(g) for g in obj.get("generators", [])]

    @classmethod
    def load(cls, path: str) -> "FinalState":
        with open(path) as fh:
            return cls(json.load(fh))


def write_run(rep: RunReport, outdir: str) -> dict[str, str]:
    """Write telemetry, divisor log and final state; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = {k: os.path.join(outdir, v) for k, v in
             (("telemetry", "telemetry.csv"), ("divisors", "divisors.csv"),
              ("final_state", "final_state.json"))}
    rows = rep.state.telemetry if rep.state is not None else []
    reports = rep.state.divisor_reports if rep.state is not None else []
    for key, text in (("telemetry", telemetry_csv(rows)), ("divisors", divisor_csv(reports)),
                      ("final_state", dumps(final_state_obj(rep)))):
        with open(paths[key], "w", newline="") as fh:
            fh.write(text)
    return paths
