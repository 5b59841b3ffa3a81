"""Config-driven command line interface.

Subcommands:

* ``simulate <config.yaml>``: run the scenario and emit path/field CSVs plus
  a summary report comparing empirical statistics against every closed-form
  value the model admits.
* ``validate <suite>``: run a named validation suite; exit code 0 iff every
  criterion passes.
* ``check-integrability <config.yaml>``: evaluate the three integrability
  conditions for an ambit-field scenario.
* ``list-suites``: print the available validation suites.

All outputs are deterministic functions of the config (including
``mc.master_seed``); rerunning a command reproduces files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import ambit_field as af
from . import estimation as est
from . import geometry as geo
from . import levy_basis as lb
from . import trawl as tw
from . import volatility as vol
from .suites import SUITES, run_suite

CSV_SCHEMA = "ambitsim-csv v1"
SUMMARY_SCHEMA = 1


class ConfigError(ValueError):
    """Invalid scenario config; message carries the offending field path."""


def _get(cfg, path, default=None, required=False, kind=None):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"missing required config field '{path}'")
            return default
        node = node[part]
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(f"config field '{path}' must be of type {kind.__name__}, "
                          f"got {type(node).__name__}")
    return node


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    _get(cfg, "model.kind", required=True, kind=str)
    _get(cfg, "mc.master_seed", required=True, kind=int)
    return cfg


# ---------------------------------------------------------------------------
# Builders from config fragments
# ---------------------------------------------------------------------------

def build_seed(cfg: dict) -> lb.LevySeed:
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigError("model.seed must be a mapping with a 'type' field")
    params = {k: v for k, v in cfg.items() if k != "type"}
    try:
        return lb.make_seed(cfg["type"], **params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"model.seed: {exc}") from exc


def build_trawl(cfg: dict) -> geo.TrawlSet:
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigError("trawl must be a mapping with a 'type' field")
    params = {k: v for k, v in cfg.items() if k != "type"}
    try:
        return geo.make_trawl(cfg["type"], **params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"trawl: {exc}") from exc


def build_ambit(cfg: dict) -> geo.AmbitSet:
    kind = _get(cfg, "type", required=True, kind=str)
    if kind == "trawl":
        return geo.TrawlAmbitSet(build_trawl(_get(cfg, "trawl", required=True)))
    if kind == "product":
        box = _get(cfg, "box", required=True)
        return geo.ProductAmbitSet(box=tuple(box),
                                   t_back=_get(cfg, "t_back", required=True))
    raise ConfigError(f"model.ambit.type: unknown kind {kind!r}")


def build_kernel(cfg: dict) -> af.Kernel:
    if cfg is None:
        return af.CONSTANT_KERNEL
    kind = _get(cfg, "type", required=True, kind=str)
    if kind == "constant":
        value = float(_get(cfg, "value", default=1.0))
        return af.Kernel(fn=lambda ux, ut, v=value: v * np.ones(np.broadcast(ux, ut).shape),
                         time_free=True)
    if kind == "exp_time":
        rate = float(_get(cfg, "rate", required=True))
        return af.Kernel(fn=lambda ux, ut, r=rate: np.exp(-r * ut),
                         dt_fn=lambda ux, ut, r=rate: -r * np.exp(-r * ut))
    raise ConfigError(f"model.kernel.type: unknown kind {kind!r}")


def build_vol(cfg: dict):
    if cfg is None:
        return vol.UNIT_VOL
    kind = _get(cfg, "type", required=True, kind=str)
    if kind == "unit":
        return vol.UNIT_VOL
    if kind == "constant":
        value = float(_get(cfg, "value", required=True))
        if value < 0:
            raise ConfigError("model.vol.value: sigma^2 must be nonnegative")
        return vol.DeterministicVol(fn=lambda x, t, v=value:
                                    v * np.ones(np.broadcast(x, t).shape))
    if kind == "outvf":
        return vol.OUTVF(lam=float(_get(cfg, "lam", required=True)),
                         mu=float(_get(cfg, "mu", required=True)),
                         kappa=float(_get(cfg, "kappa", required=True)),
                         y_seed=build_seed(_get(cfg, "y_seed", required=True)),
                         x_seed=build_seed(_get(cfg, "x_seed", required=True)),
                         slab_dx=float(_get(cfg, "slab_dx", default=0.02)))
    if kind == "trawl_smoothed":
        return vol.tempo_spatial_trawl_vol(
            build_trawl(_get(cfg, "trawl", required=True)),
            _get(cfg, "transform", default="identity", kind=str),
            build_seed(_get(cfg, "seed", required=True)),
            dx=float(_get(cfg, "dx", default=0.05)),
            dt=float(_get(cfg, "dt", default=0.05)))
    raise ConfigError(f"model.vol.type: unknown kind {kind!r}")


def _times_from_grid(cfg: dict):
    t0 = float(_get(cfg, "grid.t_start", default=0.0))
    t1 = float(_get(cfg, "grid.t_end", required=True))
    n = int(_get(cfg, "grid.n_times", required=True))
    if n < 1 or t1 < t0:
        raise ConfigError("grid.t_start/t_end/n_times: need t_end >= t_start, n >= 1")
    return np.linspace(t0, t1, n)


# ---------------------------------------------------------------------------
# CSV / JSON writers (deterministic formatting)
# ---------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def write_paths_csv(path: Path, times, values):
    with open(path, "w") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        fh.write("replicate,t,Y\n")
        for r in range(values.shape[0]):
            for j, t in enumerate(times):
                fh.write(f"{r},{_fmt(t)},{_fmt(values[r, j])}\n")


def write_field_csv(path: Path, times, xs, values):
    with open(path, "w") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        fh.write("replicate,t,x,Y\n")
        for r in range(values.shape[0]):
            for i, t in enumerate(times):
                for k, x in enumerate(xs):
                    fh.write(f"{r},{_fmt(t)},{_fmt(x)},{_fmt(values[r, i, k])}\n")


def write_vol_csv(path: Path, ts, xs, vol_values):
    with open(path, "w") as fh:
        fh.write(f"# {CSV_SCHEMA}\n")
        fh.write("replicate,t,x,sigma2\n")
        for r in range(vol_values.shape[0]):
            for i, t in enumerate(ts):
                for k, x in enumerate(xs):
                    fh.write(f"{r},{_fmt(t)},{_fmt(x)},{_fmt(vol_values[r, i, k])}\n")


def _row(quantity, analytic, empirical=None, se=None):
    row = {"quantity": quantity, "analytic": float(analytic)}
    if empirical is not None:
        row["empirical"] = float(empirical)
        row["se"] = float(se)
        row["z"] = float((empirical - analytic) / se) if se > 0 else 0.0
    return row


def write_summary(path: Path, model_hash: str, rows: list):
    payload = {"schema_version": SUMMARY_SCHEMA, "model_hash": model_hash,
               "rows": rows}
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True))
        fh.write("\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_trawl(cfg, outdir: Path):
    model = tw.TrawlModel(build_trawl(_get(cfg, "model.trawl", required=True)),
                          build_seed(_get(cfg, "model.seed", required=True)))
    times = _times_from_grid(cfg)
    reps = int(_get(cfg, "mc.replicates", default=0))
    seed = int(_get(cfg, "mc.master_seed", required=True))
    method = _get(cfg, "model.method", default="grid", kind=str)
    lags = [float(h) for h in _get(cfg, "report.lags", default=[])]
    zetas = [float(z) for z in _get(cfg, "report.zetas", default=[0.5, 1.0])]

    rows = [_row("leb", model.leb),
            _row("mean", model.leb * model.seed.mean),
            _row("variance", model.leb * model.seed.variance)]
    for h in lags:
        rows.append(_row(f"acf_{h}", tw.acf(model, h)))
    for z in zetas:
        c = complex(tw.increment_cumulant(model, float(times[1] - times[0]), z)) \
            if times.size > 1 else 0.0
        rows.append(_row(f"increment_cumulant_re_{z}", c.real))

    values = np.empty((0, times.size))
    if reps > 0:
        if method == "exact_cp":
            path = tw.simulate_exact_cp(model, times, master_seed=seed,
                                        n_replicates=reps)
        elif method == "grid":
            path = tw.simulate_grid(model, times,
                                    float(_get(cfg, "grid.dx", required=True)),
                                    float(_get(cfg, "grid.dt", required=True)),
                                    master_seed=seed, n_replicates=reps,
                                    eps_tail=float(_get(cfg, "grid.eps_tail",
                                                        default=tw.DEFAULT_EPS_TAIL)))
        else:
            raise ConfigError(f"model.method: unknown method {method!r}")
        values = path.values
        m, sm = est.mean_with_se(values[:, 0])
        v, sv = est.var_with_se(values[:, 0])
        rows[1] = _row("mean", model.leb * model.seed.mean, m, sm)
        rows[2] = _row("variance", model.leb * model.seed.variance, v, sv)
        for i, h in enumerate(lags):
            idx = int(np.argmin(np.abs(times - times[0] - h)))
            r_emp, se_r = est.corr_with_se(values[:, 0], values[:, idx])
            rows[3 + i] = _row(f"acf_{h}", tw.acf(model, h), r_emp, se_r)
    write_paths_csv(outdir / _get(cfg, "outputs.paths_csv", default="paths.csv"),
                    times, values)
    write_summary(outdir / _get(cfg, "outputs.summary_json", default="summary.json"),
                  tw.model_digest(model), rows)


def _simulate_lss(cfg, outdir: Path):
    seed = build_seed(_get(cfg, "model.seed", required=True))
    rate = float(_get(cfg, "model.kernel.rate", required=True))
    times = _times_from_grid(cfg)
    reps = int(_get(cfg, "mc.replicates", default=0))
    master = int(_get(cfg, "mc.master_seed", required=True))
    dt = float(_get(cfg, "grid.dt", required=True))
    vol_cfg = _get(cfg, "model.vol")
    vol_process = None
    e_sig2 = 1.0
    if vol_cfg is not None and _get(vol_cfg, "type") == "ou":
        vol_process = vol.OUVolProcess(build_seed(_get(vol_cfg, "seed", required=True)),
                                       rate=float(_get(vol_cfg, "rate", required=True)))
        e_sig2 = vol_process.mean_sigma_sq
    k2_int = 1.0 / (2 * rate)
    rows = [_row("variance", e_sig2 * k2_int * seed.variance),
            _row("acf_1lag", float(np.exp(-rate * (times[1] - times[0]))
                                   if times.size > 1 else 1.0))]
    values = np.empty((0, times.size))
    if reps > 0:
        out = af.simulate_lss(lambda u: np.exp(-rate * u), times, dt, seed,
                              master_seed=master, n_replicates=reps,
                              mu=float(_get(cfg, "model.mu", default=0.0)),
                              vol_process=vol_process)
        values = out["values"]
        v, sv = est.var_with_se(values[:, 0])
        rows[0] = _row("variance", e_sig2 * k2_int * seed.variance, v, sv)
        if times.size > 1 and vol_process is None:
            r_emp, se_r = est.corr_with_se(values[:, 0], values[:, 1])
            rows[1] = _row("acf_1lag", float(np.exp(-rate * (times[1] - times[0]))),
                           r_emp, se_r)
    write_paths_csv(outdir / _get(cfg, "outputs.paths_csv", default="paths.csv"),
                    times, values)
    write_summary(outdir / _get(cfg, "outputs.summary_json", default="summary.json"),
                  tw.model_digest((seed, rate)), rows)


def _build_field_spec(cfg) -> af.AmbitFieldSpec:
    return af.AmbitFieldSpec(
        seed=build_seed(_get(cfg, "model.seed", required=True)),
        ambit=build_ambit(_get(cfg, "model.ambit", required=True)),
        kernel=build_kernel(_get(cfg, "model.kernel")),
        vol=build_vol(_get(cfg, "model.vol")),
        mu=float(_get(cfg, "model.mu", default=0.0)))


def _field_grid(cfg) -> af.SimulationGrid:
    return af.SimulationGrid(
        times=tuple(_times_from_grid(cfg)),
        xs=tuple(float(x) for x in _get(cfg, "grid.xs", default=[0.0])),
        dx=float(_get(cfg, "grid.dx", required=True)),
        dt=float(_get(cfg, "grid.dt", required=True)),
        eps_tail=float(_get(cfg, "grid.eps_tail", default=tw.DEFAULT_EPS_TAIL)))


def _simulate_ambit_field(cfg, outdir: Path):
    spec = _build_field_spec(cfg)
    grid = _field_grid(cfg)
    reps = int(_get(cfg, "mc.replicates", default=0))
    master = int(_get(cfg, "mc.master_seed", required=True))
    vol_csv = _get(cfg, "outputs.vol_csv")
    x0, t0 = grid.xs[0], grid.times[0]
    if spec.vol.deterministic:
        so = af.second_order(spec, grid)
    else:
        so = af.second_order(spec, grid, vol_mc=int(_get(cfg, "mc.vol_replicates",
                                                         default=500)),
                             master_seed=master + 1)
    var_a, _ = so.variance(x0, t0)
    rows = [_row("mean", so.mean(x0, t0)), _row("variance", var_a)]
    values = np.empty((0, len(grid.times), len(grid.xs)))
    fld = None
    if reps > 0:
        fld = af.simulate_field(spec, grid, master_seed=master, n_replicates=reps,
                                collect_vol=vol_csv is not None)
        values = fld.values
        m, sm = est.mean_with_se(values[:, 0, 0])
        v, sv = est.var_with_se(values[:, 0, 0])
        rows[0] = _row("mean", so.mean(x0, t0), m, sm)
        rows[1] = _row("variance", var_a, v, sv)
    write_field_csv(outdir / _get(cfg, "outputs.paths_csv", default="field.csv"),
                    grid.times, grid.xs, values)
    if vol_csv is not None and fld is not None and fld.vol_values is not None:
        cells = af.build_cells(spec, grid)
        write_vol_csv(outdir / vol_csv, cells.s_left, cells.xi, fld.vol_values)
    write_summary(outdir / _get(cfg, "outputs.summary_json", default="summary.json"),
                  tw.model_digest(spec), rows)


def run_simulate(config_path, output_dir=None) -> Path:
    cfg = load_config(config_path)
    outdir = Path(output_dir or _get(cfg, "outputs.directory", default="."))
    outdir.mkdir(parents=True, exist_ok=True)
    kind = _get(cfg, "model.kind", required=True, kind=str)
    if kind == "trawl":
        _simulate_trawl(cfg, outdir)
    elif kind == "lss":
        _simulate_lss(cfg, outdir)
    elif kind == "ambit_field":
        _simulate_ambit_field(cfg, outdir)
    else:
        raise ConfigError(f"model.kind: unknown kind {kind!r}")
    return outdir


def run_check_integrability(config_path, output_dir=None) -> af.IntegrabilityReport:
    cfg = load_config(config_path)
    spec = _build_field_spec(cfg)
    grid = _field_grid(cfg)
    report = af.check_integrability(spec, grid)
    outdir = Path(output_dir or _get(cfg, "outputs.directory", default="."))
    outdir.mkdir(parents=True, exist_ok=True)
    out = outdir / _get(cfg, "outputs.report_json", default="integrability.json")
    with open(out, "w") as fh:
        fh.write(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        fh.write("\n")
    return report


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ambitsim",
        description="Simulation and validation of Levy-basis driven models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a scenario config")
    p_sim.add_argument("config")
    p_sim.add_argument("--output-dir", default=None,
                       help="overrides outputs.directory")

    p_val = sub.add_parser("validate", help="run a validation suite")
    p_val.add_argument("suite")
    p_val.add_argument("--master-seed", type=int, default=None)
    p_val.add_argument("--replicates", type=int, default=None)
    p_val.add_argument("--report", default=None, help="write the JSON report here")

    p_chk = sub.add_parser("check-integrability",
                           help="evaluate the integrability conditions")
    p_chk.add_argument("config")
    p_chk.add_argument("--output-dir", default=None)

    sub.add_parser("list-suites", help="list validation suites")

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            outdir = run_simulate(args.config, args.output_dir)
            print(f"wrote outputs to {outdir}")
            return 0
        if args.command == "validate":
            try:
                result = run_suite(args.suite, master_seed=args.master_seed,
                                   replicates=args.replicates)
            except KeyError as exc:
                print(exc.args[0], file=sys.stderr)
                return 2
            text = result.to_json()
            if args.report:
                Path(args.report).write_text(text + "\n")
            for c in result.criteria:
                mark = "PASS" if c.passed else "FAIL"
                print(f"[{mark}] {result.suite}/{c.name}: measured={c.measured:.6g} "
                      f"target={c.target:.6g} tolerance={c.tolerance:.3g}")
            print(f"suite {result.suite}: {'PASS' if result.passed else 'FAIL'}")
            return 0 if result.passed else 1
        if args.command == "check-integrability":
            report = run_check_integrability(args.config, args.output_dir)
            for name, verdict in report.verdicts.items():
                print(f"{name}: {verdict}")
            return 0 if report.all_finite else 1
        if args.command == "list-suites":
            for name in sorted(SUITES):
                print(name)
            return 0
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
