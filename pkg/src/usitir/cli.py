"""Command-line entry point: ``usitir {work,tables,cycle,control,oracle}``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from typing import Any

import numpy as np

from . import control as ctl
from .config import use_tolerances
from .cycle import EngineSpec, polarized_qubit, run_1mqihe, run_1mqihe_feedback, run_2mqihe, usitir_stage_machine
from .errors import InvalidStateError, UsitirError
from .operators import (
    DensityMatrix,
    HilbertSpace,
    bell_state,
    ket_state,
    occupation_state,
    tensor,
    werner_state,
)
from .oracle import brute_force_su, random_density_matrix
from .thermo import ThermalContext
from .work import extractable_work, feedback_work, uncontrollable_entropy

SCHEMA_VERSION = 1

# scenario keys accepted per flag
_SCENARIO_KEYS = {
    "engine", "mode", "statistics", "control_set", "input_state", "beta", "steps", "seed",
    "tolerances", "c", "particles", "clamp",
}


class ScenarioError(UsitirError):
    pass


# --------------------------------------------------------------------------
# states


def _normalized(m: np.ndarray) -> np.ndarray:
    tr = float(np.trace(m).real)
    dev = abs(tr - 1.0)
    if 1e-10 < dev <= 1e-6:
        warnings.warn(f"state trace {tr!r} normalized to 1", stacklevel=2)
        return m / tr
    return m


def _space(dim: int, statistics: str, particles: int | None) -> HilbertSpace:
    if statistics == "distinguishable":
        n = int(round(math.log2(dim)))
        if 2**n == dim:
            return HilbertSpace.qubits(n)
        return HilbertSpace.qudit(dim)
    n = particles if particles is not None else (dim - 1 if statistics == "boson" else 2)
    space = HilbertSpace(n, 2, statistics)
    if space.dim != dim:
        raise ScenarioError(f"state dimension {dim} does not match {n} {statistics} particles (dim {space.dim})")
    return space


def parse_state(spec: Any, statistics: str = "distinguishable", particles: int | None = None, seed: int = 0) -> DensityMatrix:
    """Expand a named state or an inline ``[re, im]`` matrix."""
    if isinstance(spec, str) and spec.lstrip().startswith("["):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"inline matrix is not valid JSON: {exc}") from None
    if isinstance(spec, list):
        try:
            m = np.array([[complex(re, im) for re, im in row] for row in spec])
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"inline matrix entries must be [re, im] pairs: {exc}") from None
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ScenarioError("inline matrix must be square")
        return DensityMatrix(_normalized(m), _space(m.shape[0], statistics, particles))
    if not isinstance(spec, str):
        raise ScenarioError(f"input_state must be a name or a matrix, got {type(spec).__name__}")
    name = spec.strip()
    n = particles if particles is not None else 2
    if name.startswith("|") and name.endswith((">", "⟩")):
        label = name[1:-1]
        if statistics == "boson":
            return occupation_state(int(label), n)
        return ket_state(label)
    if name.startswith("bell-"):
        return bell_state(name[5:])
    if name.startswith("werner:"):
        return werner_state(float(name.split(":", 1)[1]))
    if name.startswith("occupation:"):
        return occupation_state(int(name.split(":", 1)[1]), n)
    if name.startswith("spectrum:"):
        p = np.array([float(v) for v in name.split(":", 1)[1].split(",")])
        return DensityMatrix(_normalized(np.diag(p).astype(complex)), _space(len(p), statistics, particles))
    if name in ("rho⊗rho", "rho-x-rho", "rhoxrho"):
        q = random_density_matrix(2, seed=seed)
        return tensor(q, q)
    if name.startswith("random:"):
        rank = int(name.split(":", 1)[1])
        space = HilbertSpace(n, 2, statistics)
        return random_density_matrix(space.dim, rank, seed=seed, space=space)
    if name == "maximally-mixed":
        return DensityMatrix.maximally_mixed(HilbertSpace(n, 2, statistics))
    raise InvalidStateError(f"unknown named state {spec!r}")


# --------------------------------------------------------------------------
# output


def _plain(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _dump_json(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False)


def _table(rows: list[dict], columns: list[str]) -> str:
    cells = [[str(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def ln_form(nats: float, tol: float = 1e-9) -> str:
    """``ln k`` when ``exp(nats)`` is an integer, else the decimal value."""
    if abs(nats) <= tol:
        return "0"
    k = math.exp(nats)
    if abs(k - round(k)) <= tol * k and round(k) >= 2:
        return f"ln {round(k)}"
    return f"{nats:.10g}"


# --------------------------------------------------------------------------
# scenario handling


def _load_scenario(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(f"scenario invariant violated: top-level \"schema\" must be {SCHEMA_VERSION}")
    unknown = set(data) - _SCENARIO_KEYS - {"schema"}
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
    return data


def _merge(args: argparse.Namespace) -> dict:
    """Scenario values overridden by explicitly given flags."""
    cfg = _load_scenario(getattr(args, "scenario", None))
    flag_map = {"set": "control_set", "state": "input_state"}
    for key, val in vars(args).items():
        if key in ("scenario", "command", "func", "format", "out", "tol") or val is None:
            continue
        cfg[flag_map.get(key, key)] = val
    tols = dict(cfg.get("tolerances", {}))
    for item in getattr(args, "tol", None) or []:
        k, _, v = item.partition("=")
        tols[k] = float(v)
    cfg["tolerances"] = tols
    cfg.setdefault("beta", 1.0)
    cfg.setdefault("steps", 10_000)
    cfg.setdefault("seed", 0)
    cfg.setdefault("statistics", "distinguishable")
    cfg.setdefault("mode", "swap")
    cfg.setdefault("clamp", False)
    return cfg


def _state(cfg: dict) -> DensityMatrix:
    if "input_state" not in cfg:
        raise ScenarioError("precondition violated: an input state (--state) is required")
    return parse_state(cfg["input_state"], cfg["statistics"], cfg.get("particles"), cfg["seed"])


def _control_set(cfg: dict) -> ctl.ControlSet:
    if "control_set" not in cfg:
        raise ScenarioError("precondition violated: a control set (--set) is required")
    return ctl.control_set_from_label(cfg["control_set"], cfg["statistics"])


# --------------------------------------------------------------------------
# commands


def cmd_work(cfg: dict, fmt: str) -> str:
    rho = _state(cfg)
    cs = _control_set(cfg)
    ctx = ThermalContext(cfg["beta"])
    if cfg.get("engine") == "usitir":
        staged = usitir_stage_machine(rho, cs, ctx)
        out = staged.to_dict()
    elif cfg["mode"] == "feedback":
        out = feedback_work(rho, cs, ctx).to_dict()
    else:
        out = extractable_work(rho, cs, ctx).to_dict()
    if fmt == "table":
        rep = out.get("report", out)
        rows = [{"quantity": k, "value": _fmt(v)} for k, v in sorted(rep.items()) if k != "diagnostics"]
        return _table(rows, ["quantity", "value"])
    return _dump_json(out)


TABLE_I_STATES = ("|00>", "|01>", "|10>", "|11>")
TABLE_II_STATES = (0, 1, 2)


def tables_data() -> dict:
    f2 = ctl.collective_z(2)
    f2b = ctl.collective_z(2, "boson")
    rows_i, rows_ii = [], []
    for label in TABLE_I_STATES:
        r = extractable_work(ket_state(label[1:-1]), f2)
        rows_i.append(_table_row(label, r))
    for n in TABLE_II_STATES:
        r = extractable_work(occupation_state(n, 2), f2b)
        rows_ii.append(_table_row(f"|{n}>", r))
    return {"distinguishable_F2": rows_i, "boson_F2": rows_ii}


def _table_row(label: str, r) -> dict:
    su_nats = r.uncontrollable_entropy * math.log(2)
    return {
        "state": label,
        "S_u_bits": r.uncontrollable_entropy,
        "W_kT": r.work,
        "S_u_ln_form": ln_form(su_nats),
        "W_ln_form": ln_form(r.work),
    }


def cmd_tables(cfg: dict, fmt: str) -> str:
    data = tables_data()
    if fmt == "json":
        return _dump_json(data)
    cols = ["state", "S_u_bits", "W_kT", "S_u_ln_form", "W_ln_form"]
    parts = []
    for title, key in (("Distinguishable qubits, collective z control", "distinguishable_F2"),
                       ("Bosonic qubits, collective z control", "boson_F2")):
        rows = [{k: _fmt(v) for k, v in row.items()} for row in data[key]]
        parts.append(title + "\n" + _table(rows, cols))
    return "\n\n".join(parts)


def _engine_spec(cfg: dict, ancilla: DensityMatrix | None) -> EngineSpec:
    return EngineSpec(
        ctx=ThermalContext(cfg["beta"]),
        steps=int(cfg["steps"]),
        ancilla_state=ancilla,
        mode=cfg["mode"],
        clamp=bool(cfg["clamp"]),
        seed=int(cfg["seed"]),
    )


def run_cycle(cfg: dict):
    engine = cfg.get("engine", "1mqihe")
    if engine == "1mqihe":
        if "input_state" in cfg:
            ancilla = parse_state(cfg["input_state"], "distinguishable", 1, cfg["seed"])
        else:
            ancilla = polarized_qubit(float(cfg.get("c", 0.0)))
        spec = _engine_spec(cfg, ancilla)
        return run_1mqihe_feedback(spec) if spec.mode == "feedback" else run_1mqihe(spec)
    if engine == "2mqihe":
        return run_2mqihe(_state(cfg), _engine_spec(cfg, None))
    raise ScenarioError(f"unknown engine {engine!r}; use 1mqihe or 2mqihe")


def cmd_cycle(cfg: dict, fmt: str, out: str | None) -> tuple[str, str | None]:
    """Returns (stdout text, stderr text)."""
    trace = run_cycle(cfg)
    summary = _dump_json(trace.summary())
    if out is not None:
        trace.to_csv(out)
        return summary, None
    if fmt == "csv":
        return trace.to_csv().rstrip("\n"), summary
    if fmt == "table":
        rows = [{"quantity": k, "value": _fmt(v)} for k, v in sorted(trace.summary().items())]
        return _table(rows, ["quantity", "value"]), None
    return summary, None


def cmd_control(cfg: dict, fmt: str) -> str:
    cs = _control_set(cfg)
    dim = ctl.lie_closure_dim(cs)
    out: dict = {
        "control_set": cs.label,
        "hilbert_dim": cs.dim,
        "lie_closure_dim": dim,
        "full_algebra_dim": cs.dim**2 - 1,
        "dmc": dim == cs.dim**2 - 1,
    }
    if "input_state" in cfg:
        rho = _state(cfg)
        ctx = ThermalContext(cfg["beta"])
        if cs.name == "C_2":
            sol = ctl.ct_solve_c2(rho, ctx)
            out["ct"] = {"found": sol.spectral_residual <= 1e-9, "residual": sol.spectral_residual,
                         "coefficients": list(sol.coefficients), "parameters": sol.parameters}
        else:
            res = ctl.ct_search_generic(cs, rho, ctx, seed=cfg["seed"])
            out["ct"] = {"found": res.solution is not None, "residual": res.best_residual,
                         "coefficients": list(res.best.coefficients)}
    if fmt == "table":
        flat = {k: v for k, v in out.items() if k != "ct"}
        if "ct" in out:
            flat["ct_found"] = out["ct"]["found"]
            flat["ct_residual"] = out["ct"]["residual"]
        return _table([{"quantity": k, "value": _fmt(v)} for k, v in flat.items()], ["quantity", "value"])
    return _dump_json(out)


def cmd_oracle(cfg: dict, fmt: str) -> str:
    rho = _state(cfg)
    cs = _control_set(cfg)
    res = brute_force_su(rho, cs, restarts=int(cfg.get("restarts", 32)), maxfev=int(cfg.get("maxfev", 2000)),
                         seed=int(cfg["seed"]))
    out: dict = {"control_set": cs.label, "oracle_su": res.value, "converged": res.converged,
                 "evaluations": res.evaluations}
    if cs.name != "custom":
        closed, _ = uncontrollable_entropy(rho, cs, ThermalContext(cfg["beta"]))
        out["closed_form_su"] = closed
        out["difference"] = res.value - closed
    if fmt == "table":
        return _table([{"quantity": k, "value": _fmt(v)} for k, v in out.items()], ["quantity", "value"])
    return _dump_json(out)


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="usitir", description="Work extraction in quantum information heat engines.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("json", "table")):
        sp.add_argument("--scenario", help="JSON scenario file (schema 1)")
        sp.add_argument("--beta", type=float, help="inverse temperature (default 1)")
        sp.add_argument("--seed", type=int, help="seed for random named states (default 0)")
        sp.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override, repeatable")
        sp.add_argument("--format", choices=formats, default=formats[0])
        sp.add_argument("--statistics", choices=["distinguishable", "boson", "fermion"])
        sp.add_argument("--particles", type=int, help="particle count for occupation and random states")
        sp.add_argument("--state", help="named state: |bits>, bell-phi+, werner:p, occupation:n, "
                                        "spectrum:a,b,..., rho-x-rho, random:rank, maximally-mixed")

    w = sub.add_parser("work", help="extractable work and uncontrollable entropy")
    common(w)
    w.add_argument("--set", help="control set label: L2, G2, F2, C2, ...")
    w.add_argument("--mode", choices=["swap", "feedback"])
    w.add_argument("--engine", choices=["usitir"], help="report the three-stage decomposition")

    t = sub.add_parser("tables", help="uncontrollable entropy and work tables for two qubits")
    t.add_argument("--format", choices=["table", "json"], default="table")

    c = sub.add_parser("cycle", help="simulate an engine cycle and emit its trace")
    common(c, formats=("csv", "json", "table"))
    c.add_argument("--engine", choices=["1mqihe", "2mqihe"])
    c.add_argument("--mode", choices=["swap", "feedback"])
    c.add_argument("--c", type=float, help="ancilla polarization for the one-qubit engine")
    c.add_argument("--steps", type=int, help="samples per ramp (default 10000)")
    c.add_argument("--clamp", action="store_true", default=None, help="clamp near-pure spectra to 1e-6")
    c.add_argument("--out", help="write the CSV trace here and print the summary")

    k = sub.add_parser("control", help="controllability and thermalizability diagnostics")
    common(k)
    k.add_argument("--set", help="control set label")

    o = sub.add_parser("oracle", help="brute-force uncontrollable entropy")
    common(o)
    o.add_argument("--set", help="control set label")
    o.add_argument("--restarts", type=int)
    o.add_argument("--maxfev", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "tables":
            print(cmd_tables({}, args.format))
            return 0
        cfg = _merge(args)
        with use_tolerances(**cfg["tolerances"]):
            if args.command == "work":
                print(cmd_work(cfg, args.format))
            elif args.command == "cycle":
                text, err = cmd_cycle(cfg, args.format, args.out)
                print(text)
                if err:
                    print(err, file=sys.stderr)
            elif args.command == "control":
                print(cmd_control(cfg, args.format))
            elif args.command == "oracle":
                print(cmd_oracle(cfg, args.format))
    except (UsitirError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
