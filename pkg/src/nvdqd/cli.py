"""Command-line harness: one subcommand per figure or verification.

Configuration is flat ``key = value`` text (``#`` starts a comment); list
values are comma separated. Model keys are the unit-suffixed keys of
:class:`nvdqd.model.ModelParams`; every subcommand accepts a few extra
option keys listed in ``OPTIONS``. ``--set key=value`` overrides the file.

Exit codes: 0 success, 1 a check failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .gates import (
    OUTCOMES,
    ClusterGraph,
    HyperfineParams,
    build_cluster,
    build_cluster_via_protocol,
    build_gate_unitary,
    correction_table,
    gate_equivalence_check,
    gate_fidelity_with_transverse,
    operator_schmidt_rank,
    run_protocol,
    schedule_2d,
    schedule_is_valid,
    stabilizer_check,
)
from .model import ALIASES, FLAT_KEYS, ModelParams, build_h11, dark_state_report, derived_couplings, verify_rwa_dressing
from .observables import dark_state, fidelity
from .pulses import convergence_report, engineered_h11, matched_parameters
from .sweeps import (
    NoiseParams,
    concurrence_grid,
    ensemble_concurrence,
    find_tc,
    tc_map,
)
from .transport import CSV_COLUMNS, default_initial_state, model_liouvillian, propagate, steady_state, time_grid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_floats = lambda s: tuple(float(x) for x in str(s).split(",") if x.strip())  # noqa: E731

# option key -> (parser, default)
COMMON = {"step_us": (float, 0.05), "workers": (int, 1)}
OPTIONS: dict[str, dict] = {
    "fig2": {"t_max_us": (float, 150.0), "dt_out_us": (float, 0.5), "threshold": (float, 0.99)},
    "fig3a": {
        "sqrt_nu_over_2pi_MHz": (_floats, (0.02, 0.1, 0.5)),
        "samples": (int, 200),
        "t_max_us": (float, 150.0),
        "dt_out_us": (float, 5.0),
        "late_time_us": (float, 135.0),
    },
    "fig3bc": {
        "deltas_ueV": (_floats, (-1.0, -0.5, 0.0, 0.5, 1.0)),
        "t_eval_us": (float, 45.0),
        "tolerant_gamma_GHz": (float, 2.0),
        "tolerant_J_over_2pi_MHz": (float, 36.0),
    },
    "figs1": {
        "J_grid_MHz": (_floats, (8.0, 16.0, 24.0, 32.0, 40.0)),
        "omega_grid_MHz": (_floats, (0.2, 0.4, 0.6, 0.8, 1.0)),
        "threshold": (float, 0.99),
        "dt_out_us": (float, 0.5),
        "max_horizon_us": (float, 1200.0),
    },
    "figs2": {
        "deltas_ueV": (_floats, (-1.0, -0.5, 0.0, 0.5, 1.0)),
        "t_max_us": (float, 150.0),
        "dt_out_us": (float, 0.5),
        "threshold": (float, 0.99),
    },
    "rwa-check": {"omega_over_omega0": (float, 1e-3), "rabi_periods": (float, 1.0), "rwa_tolerance": (float, 1e-2)},
    "pulse-check": {"kappa_ratio": (float, 0.8), "total_time_us": (float, 2.0)},
    "gate-verify": {"random_inputs": (int, 20), "gate_tolerance": (float, 1e-10), "gate_corrections_json": (str, "")},
    "cluster": {"chain_n": (int, 4), "rows": (int, 3), "cols": (int, 4), "stabilizer_tolerance": (float, 1e-8)},
}
OPTIONS["verify"] = {
    **OPTIONS["rwa-check"],
    **OPTIONS["pulse-check"],
    **OPTIONS["gate-verify"],
    **OPTIONS["cluster"],
    "steady_fidelity_min": (float, 1 - 1e-6),
}


class ConfigError(ValueError):
    pass


def read_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def resolve_config(command: str, raw: dict[str, str]) -> tuple[ModelParams, dict]:
    """Split raw strings into model parameters and typed command options."""
    spec = {**COMMON, **OPTIONS.get(command, {})}
    model_raw, opts = {}, {k: d for k, (_, d) in spec.items()}
    for k, v in raw.items():
        if k in FLAT_KEYS or k in ALIASES:
            model_raw[k] = v
        elif k in spec:
            try:
                opts[k] = spec[k][0](v)
            except ValueError as exc:
                raise ConfigError(f"bad value for {k}: {v!r}") from exc
        else:
            raise ConfigError(f"unknown key {k!r} for command {command!r}")
    try:
        params = ModelParams().with_updates(**{k: float(v) for k, v in model_raw.items()})
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return params, opts


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _write_long_csv(path: Path, header: str, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        w = csv.writer(fh)
        w.writerow(fieldnames)
        w.writerows(rows)


def _fmt(row):
    return [repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row]


# -- commands -------------------------------------------------------------------------

def _trajectory(params, opts):
    lv = model_liouvillian(params, opts["step_us"])
    times = time_grid(opts["t_max_us"], opts["dt_out_us"], opts["step_us"])
    return propagate(lv, default_initial_state(), times)


def cmd_fig2(params: ModelParams, opts: dict, out: Path, seed: int) -> tuple[dict, bool]:
    t0 = time.perf_counter()
    tr = _trajectory(params, opts)
    tr.to_csv(out / "fig2_trajectory.csv")
    tc = find_tc(tr, opts["threshold"])
    cur = tr.current
    i3 = int(np.argmin(np.abs(tr.times - 3 * tc.t_c))) if tc.t_c is not None else len(cur) - 1
    summary = {
        "t_c_us": tc.t_c,
        "t_c_converged": tc.converged,
        "t_c_reason": tc.reason,
        "final_concurrence": float(tr.concurrence[-1]),
        "final_current": float(cur[-1]),
        "max_current": float(cur.max()),
        "current_ratio_at_3tc": float(cur[i3] / cur.max()),
        "dark_state_fidelity": float(tr.observables[-1].fidelity_dark),
        "diagnostics": tr.diagnostics,
        "runtime_s": time.perf_counter() - t0,
    }
    return summary, tc.converged


def cmd_fig3a(params, opts, out, seed):
    times = time_grid(opts["t_max_us"], opts["dt_out_us"], opts["step_us"])
    late_idx = int(np.argmin(np.abs(times - opts["late_time_us"])))
    rows, late = [], {}
    for s in opts["sqrt_nu_over_2pi_MHz"]:
        noise = NoiseParams.from_sqrt_mhz(s, opts["samples"], seed)
        tr = ensemble_concurrence(params, noise, times, opts["step_us"], opts["workers"])
        rows += [[s, t, c] for t, c in zip(tr.times, tr.concurrence)]
        late[str(s)] = float(tr.concurrence[late_idx])
    _write_long_csv(out / "fig3a.csv", "# nvdqd fig3a v1", ["sqrt_nu_over_2pi_MHz", "t_us", "concurrence"],
                    [_fmt(r) for r in rows])
    vals = [late[str(s)] for s in opts["sqrt_nu_over_2pi_MHz"]]
    ok = bool(np.all(np.diff(vals) < 0))
    return {"late_time_us": float(times[late_idx]), "late_concurrence": late, "strictly_decreasing": ok,
            "samples": opts["samples"], "seed": seed}, ok


def cmd_fig3bc(params, opts, out, seed):
    panels = {
        "b": params,
        "c": params.with_updates(gamma_GHz=opts["tolerant_gamma_GHz"],
                                 J_over_2pi_MHz=opts["tolerant_J_over_2pi_MHz"]),
    }
    rows, spread, values = [], {}, {}
    for name, p in panels.items():
        res = concurrence_grid(p, {"delta_ueV": opts["deltas_ueV"]}, opts["t_eval_us"], opts["step_us"],
                               opts["workers"])
        values[name] = res.values.tolist()
        spread[name] = float(res.values.max() - res.values.min())
        rows += [[name, d, opts["t_eval_us"], c] for d, c in zip(opts["deltas_ueV"], res.values)]
    _write_long_csv(out / "fig3bc.csv", "# nvdqd fig3bc v1", ["panel", "delta_ueV", "t_us", "concurrence"],
                    [_fmt(r) for r in rows])
    ok = spread["c"] < spread["b"]
    return {"spread": spread, "concurrence": values, "tolerant_regime_reproduced": ok,
            "t_eval_us": opts["t_eval_us"]}, ok


def cmd_figs1(params, opts, out, seed):
    res = tc_map(params, opts["J_grid_MHz"], opts["omega_grid_MHz"], opts["threshold"], opts["dt_out_us"],
                 max_horizon=opts["max_horizon_us"], workers=opts["workers"])
    res.to_csv(out / "figs1_tc_map.csv")
    best = res.argmin()
    J, O = res.axes["J_over_2pi_MHz"], res.axes["omega_over_2pi_MHz"]
    cell = lambda a, v: int(np.argmin(np.abs(a - v)))  # noqa: E731
    near = abs(cell(J, best["J_over_2pi_MHz"]) - cell(J, 24.0)) <= 1 and \
        abs(cell(O, best["omega_over_2pi_MHz"]) - cell(O, 0.6)) <= 1
    ref = res.at(J_over_2pi_MHz=24.0, omega_over_2pi_MHz=0.6)
    return {"argmin": best, "t_c_at_24_0.6": ref, "ratio_to_min": ref / best["t_c_us"],
            "argmin_within_one_cell": near, "unconverged_points": int((~res.converged).sum())}, bool(near)


def cmd_figs2(params, opts, out, seed):
    rows, final, tcs = [], {}, {}
    for d in opts["deltas_ueV"]:
        tr = _trajectory(params.with_updates(delta_ueV=d), opts)
        rows += [[d] + r for r in tr.rows()]
        final[str(d)] = float(tr.concurrence[-1])
        tcs[str(d)] = find_tc(tr, opts["threshold"]).t_c
    _write_long_csv(out / "figs2.csv", "# nvdqd figs2 v1", ["delta_ueV", *CSV_COLUMNS], [_fmt(r) for r in rows])
    return {"final_concurrence": final, "t_c_us": tcs}, True


def _rwa(params, opts):
    d = params.drive
    om = opts["omega_over_omega0"] * d.omega_0
    drive = replace(d, omega_L=om, omega_R=om)
    rep = verify_rwa_dressing(drive, opts["rabi_periods"] * 2 * np.pi / om)
    ok = rep.max_trace_distance <= opts["rwa_tolerance"]
    return {"max_trace_distance": rep.max_trace_distance, "omega_over_omega0": rep.omega_over_omega0,
            "duration_us": rep.duration, "passed": ok}, ok


def cmd_rwa_check(params, opts, out, seed):
    return _rwa(params, opts)


def _pulse(params, opts, out: Path | None = None):
    dc = derived_couplings(params)
    if np.isclose(dc.kappa_L, dc.kappa_R, rtol=1e-12):
        # inject the requested mismatch on the right dipole
        r_r = params.geometry.r_L * opts["kappa_ratio"] ** (1 / 3)
        params = params.with_updates(r_R_nm=r_r * 1e9)
    theta, side, matched = matched_parameters(params)
    before = dark_state_report(build_h11(params))
    after = dark_state_report(engineered_h11(matched, theta, side))
    conv = convergence_report(matched, theta, opts["total_time_us"], target_side=side)
    if out is not None:
        _write_long_csv(out / "pulse_convergence.csv", "# nvdqd pulse-convergence v1", ["tau0_us", "distance"],
                        [_fmt([r["tau0_us"], r["distance"]]) for r in conv.rows()])
    ok = after.is_unique_dark and conv.exponent >= 1.0
    dc = derived_couplings(params)
    return {"kappa_L": dc.kappa_L, "kappa_R": dc.kappa_R, "theta": theta, "target_side": side,
            "unpulsed_unique_dark": before.is_unique_dark, "engineered_unique_dark": after.is_unique_dark,
            "convergence_exponent": conv.exponent, "passed": ok}, ok


def cmd_pulse_check(params, opts, out, seed):
    return _pulse(params, opts, out)


def _load_corrections(path: str):
    if not path:
        return None
    try:
        raw = json.loads(Path(path).read_text())
        table = {}
        for m in OUTCOMES:
            gl, gr = (np.array([complex(a, b) for a, b in diag]) for diag in raw[m])
            table[m] = np.kron(np.diag(gl), np.diag(gr))
        return table
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read corrections table {path!r}: {exc}") from exc


def _gate(opts, seed):
    hf = HyperfineParams()
    u_t = build_gate_unitary(hf)
    eq = gate_equivalence_check(hf, _load_corrections(opts["gate_corrections_json"]), opts["gate_tolerance"])
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(opts["random_inputs"]):
        x = rng.normal(size=4) + 1j * rng.normal(size=4)
        res = run_protocol(u_t, x / np.linalg.norm(x))
        worst = max(worst, max(abs(r.probability - 0.25) for r in res))
    ranks = {m: operator_schmidt_rank(g) for m, g in correction_table().items()}
    f_phys = gate_fidelity_with_transverse(hf)
    ok = eq["passed"] and worst <= opts["gate_tolerance"] and all(r == 1 for r in ranks.values())
    return {"equivalence": eq, "max_probability_error": worst, "correction_schmidt_rank": ranks,
            "transverse_fidelity": f_phys, "passed": ok}, ok


def cmd_gate_verify(params, opts, out, seed):
    return _gate(opts, seed)


def _cluster(opts, seed, out: Path | None = None):
    chain = ClusterGraph.chain(opts["chain_n"])
    psi, outcomes = build_cluster_via_protocol(chain, rng=np.random.default_rng(seed))
    rep = stabilizer_check(psi, chain)
    overlap = abs(np.vdot(build_cluster(chain), psi))
    rounds = schedule_2d(opts["rows"], opts["cols"])
    valid = schedule_is_valid(rounds, opts["rows"], opts["cols"])
    if out is not None:
        rep.to_csv(out / "stabilizers.csv")
        _write_json(out / "schedule.json", {"rows": opts["rows"], "cols": opts["cols"],
                                            "rounds": [[[list(a), list(b)] for a, b in r] for r in rounds]})
    ok = bool(rep.expectations.min() >= 1 - opts["stabilizer_tolerance"]) and valid and len(rounds) == 6
    return {"outcomes": outcomes, "min_stabilizer": float(rep.expectations.min()), "overlap_with_ideal": overlap,
            "schedule_rounds": len(rounds), "schedule_edges": sum(map(len, rounds)), "schedule_valid": valid,
            "passed": ok}, ok


def cmd_cluster(params, opts, out, seed):
    return _cluster(opts, seed, out)


def cmd_verify(params, opts, out, seed):
    checks = {}
    dark = dark_state_report(build_h11(params))
    checks["dark_state"] = {"passed": dark.is_unique_dark, "dark_states": dark.dark_states}
    try:
        ss = steady_state(model_liouvillian(params))
        f = fidelity(ss.rho, dark_state()) if ss.unique else 0.0
        checks["steady_state"] = {"passed": ss.unique and f >= opts["steady_fidelity_min"], "fidelity": f,
                                  "unique": ss.unique}
    except Exception as exc:  # report, do not crash the aggregate
        checks["steady_state"] = {"passed": False, "error": str(exc)}
    checks["rwa"] = _rwa(params, opts)[0]
    checks["pulse_engineering"] = _pulse(params, opts)[0]
    checks["gate"] = _gate(opts, seed)[0]
    checks["cluster"] = _cluster(opts, seed)[0]
    failed = [k for k, v in checks.items() if not v["passed"]]
    return {"checks": checks, "failed": failed, "passed": not failed}, not failed


COMMANDS = {
    "fig2": cmd_fig2,
    "fig3a": cmd_fig3a,
    "fig3bc": cmd_fig3bc,
    "figs1": cmd_figs1,
    "figs2": cmd_figs2,
    "rwa-check": cmd_rwa_check,
    "pulse-check": cmd_pulse_check,
    "gate-verify": cmd_gate_verify,
    "cluster": cmd_cluster,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvdqd", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="flat key = value config file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("."))
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = read_config_text(args.config.read_text()) if args.config else {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            raw[k.strip()] = v.strip()
        params, opts = resolve_config(args.command, raw)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        summary, ok = COMMANDS[args.command](params, opts, args.out, args.seed)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = {"command": args.command, "seed": args.seed, "params": params.to_flat(),
               "options": {k: list(v) if isinstance(v, tuple) else v for k, v in opts.items()}, **summary}
    name = args.command.replace("-", "_")
    _write_json(args.out / f"{name}_summary.json", summary)
    print(f"{args.command}: {'ok' if ok else 'CHECK FAILED'} -> {args.out / (name + '_summary.json')}")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
