"""Command-line front end: runs, sweeps, potential checks, reports.

Subcommands: run, sweep, check-potential, energy-report, plotdata.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O or checkpoint error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import (
    CheckpointData,
    CheckpointError,
    read_checkpoint,
    write_checkpoint,
)
from .config import (
    ConfigError,
    RunSetup,
    build_initial_fields,
    config_hash,
    fmt_float,
    normalize_config,
    parse_config,
)
from .dynamics import RunRecord, SimState, StepFailure, simulate
from .potential import PotentialKind, PotentialSpec, verify_l1_bound, yosida_curve
from .spectral import SpectralField
from .sweep import (
    DEFAULT_EPS_LADDER,
    SweepPlan,
    duality_limsup_check,
    run_sweep,
)

RUN_CSV_COLUMNS = (
    "step",
    "t",
    "E_total",
    "kinetic",
    "dirichlet",
    "potential",
    "concave",
    "dissipation_integral",
    "ineq_residual",
    "max_abs_u",
    "norm_V_u",
    "norm_H_v",
    "norm_Vprime_v",
    "newton_iters",
)

SWEEP_CSV_COLUMNS = (
    "eps",
    "cauchy_L2V",
    "cauchy_L2Vprime",
    "duality_pairing",
    "duality_gap",
    "concentration_index",
    "mon_sup_V_u",
    "mon_L2_H_ut",
    "mon_sup_Vprime_ut",
    "mon_L2_DA_u",
    "mon_sup_L1_jeps",
    "mon_L1L1_beta",
    "mon_Vprime_dual_beta",
)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return fmt_float(float(x))


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def run_csv_rows(record: RunRecord, skip_first: bool = False):
    start = 1 if skip_first else 0
    for i in range(start, record.step.size):
        yield (
            record.step[i],
            record.t[i],
            record.total[i],
            record.kinetic[i],
            record.dirichlet[i],
            record.potential[i],
            record.concave[i],
            record.dissipation_integral[i],
            record.ineq_residual[i],
            record.max_abs_u[i],
            record.norm_V_u[i],
            record.norm_H_v[i],
            record.norm_Vprime_v[i],
            record.newton_iters[i],
        )


def _checkpoint_name(step: int) -> str:
    return f"chk_{step:08d}.chvi"


def write_run_outputs(out: Path, setup: RunSetup, record: RunRecord, resumed: bool):
    """run.csv, periodic checkpoints, config copy and manifest for one run."""
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    csv_path = out / "run.csv"
    write_csv(csv_path, RUN_CSV_COLUMNS, run_csv_rows(record, skip_first=resumed))
    outputs.append(("run.csv", "run-csv"))

    cfg = record.cfg
    step_index = {int(s): i for i, s in enumerate(record.step)}
    for k, stored_step in enumerate(record.stored_steps):
        i = step_index[stored_step]
        data = CheckpointData(
            dim=cfg.grid.dim,
            n=cfg.grid.n,
            step=int(stored_step),
            t=float(record.t[i]),
            eps=cfg.eps,
            u_coeffs=record.stored_u[k],
            v_coeffs=record.stored_v[k],
            dissipation_integral=float(record.dissipation_integral[i]),
        )
        name = _checkpoint_name(int(stored_step))
        write_checkpoint(out / name, data)
        outputs.append((name, "checkpoint"))

    normalized = normalize_config(setup)
    (out / "config.txt").write_text(normalized)
    outputs.append(("config.txt", "config"))

    manifest = {
        "artifact_version": __version__,
        "config_hash": config_hash(normalized),
        "outputs": [{"path": p, "role": r} for p, r in outputs],
    }
    with open(out / "manifest.json", "w", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def resume(checkpoint_path, setup: RunSetup) -> SimState:
    """Load a checkpoint and validate it against the configuration."""
    data = read_checkpoint(checkpoint_path)
    grid = setup.config.grid
    if (data.dim, data.n) != (grid.dim, grid.n):
        raise CheckpointError(
            f"checkpoint grid {data.dim}D n={data.n} does not match "
            f"config {grid.dim}D n={grid.n}"
        )
    if data.eps != setup.config.eps:
        raise CheckpointError(
            f"checkpoint eps {data.eps!r} does not match config eps {setup.config.eps!r}"
        )
    return SimState(
        u=SpectralField(grid, data.u_coeffs),
        v=SpectralField(grid, data.v_coeffs),
        t=data.t,
        step=data.step,
        dissipation_integral=data.dissipation_integral,
    )


def cmd_run(args) -> int:
    setup = parse_config(Path(args.config).read_text())
    out = Path(args.out)
    if args.resume is not None:
        state = resume(args.resume, setup)
        record = simulate(setup.config, None, None, field_stride=setup.output_every,
                          start_state=state)
        write_run_outputs(out, setup, record, resumed=True)
    else:
        u0, u1 = build_initial_fields(setup)
        record = simulate(setup.config, u0, u1, field_stride=setup.output_every)
        write_run_outputs(out, setup, record, resumed=False)
    print(f"run complete: {record.step[-1]} steps to t={record.t[-1]:g} -> {out}")
    return 0


def _parse_ladder(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad eps ladder {text!r}") from exc


def cmd_sweep(args) -> int:
    setup = parse_config(Path(args.config).read_text())
    ladder = _parse_ladder(args.eps_ladder) if args.eps_ladder else DEFAULT_EPS_LADDER
    u0, u1 = build_initial_fields(setup)
    plan = SweepPlan(
        base_config=setup.config,
        u0=u0,
        u1=u1,
        eps_ladder=ladder,
        stored_fields=args.stride,
    )
    report = run_sweep(plan, joint_refine=args.joint_refine)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []

    for i, rec in enumerate(report.rung_records):
        rung_dir = out / f"rung_{i}_eps_{rec.cfg.eps:g}"
        rung_dir.mkdir(exist_ok=True)
        write_csv(rung_dir / "run.csv", RUN_CSV_COLUMNS, run_csv_rows(rec))
        write_csv(
            rung_dir / "eta_profile.csv",
            ("t", "beta_l1"),
            zip(rec.t, rec.beta_l1),
        )
        final = rec.final_state
        write_checkpoint(
            rung_dir / _checkpoint_name(final.step),
            CheckpointData(
                dim=rec.cfg.grid.dim,
                n=rec.cfg.grid.n,
                step=final.step,
                t=final.t,
                eps=rec.cfg.eps,
                u_coeffs=final.u.coeffs,
                v_coeffs=final.v.coeffs,
                dissipation_integral=final.dissipation_integral,
            ),
        )
        outputs.append((f"{rung_dir.name}/run.csv", "run-csv"))

    gaps = [float("nan")] * len(report.rung_records)
    if report.complete and len(report.rung_records) >= 2:
        verdict = duality_limsup_check(report)
        gaps = list(verdict.gaps)

    rows = []
    for i, rec in enumerate(report.rung_records):
        mon = report.monitors[i].as_dict()
        rows.append(
            (
                rec.cfg.eps,
                report.cauchy_L2V_of_u[i - 1] if i >= 1 else float("nan"),
                report.cauchy_L2Vprime_of_ut[i - 1] if i >= 1 else float("nan"),
                report.duality_pairing[i],
                gaps[i],
                report.concentration_index[i],
                mon["sup_V_of_u"],
                mon["L2_H_of_ut"],
                mon["sup_Vprime_of_ut"],
                mon["L2_DA_of_u"],
                mon["sup_L1_of_jeps"],
                mon["L1L1_of_beta"],
                mon["Vprime_dual_of_beta_proxy"],
            )
        )
    write_csv(out / "sweep_summary.csv", SWEEP_CSV_COLUMNS, rows)
    outputs.append(("sweep_summary.csv", "sweep-csv"))

    normalized = normalize_config(setup)
    (out / "config.txt").write_text(normalized)
    outputs.append(("config.txt", "config"))
    manifest = {
        "artifact_version": __version__,
        "config_hash": config_hash(normalized),
        "complete": report.complete,
        "outputs": [{"path": p, "role": r} for p, r in outputs],
    }
    with open(out / "manifest.json", "w", newline="\n") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    if not report.complete:
        print(f"sweep incomplete: rung eps={report.failed_eps} failed", file=sys.stderr)
        return 3
    print(f"sweep complete: {len(report.rung_records)} rungs -> {out}")
    return 0


def cmd_check_potential(args) -> int:
    kinds = {k.value: k for k in PotentialKind}
    if args.kind not in kinds:
        raise ConfigError(f"unknown potential kind {args.kind!r}")
    spec = PotentialSpec(kind=kinds[args.kind])
    ladder = _parse_ladder(args.eps_ladder)
    r = np.linspace(args.r_min, args.r_max, args.samples)
    print("kind,eps,r,resolvent,yosida,moreau,residual")
    for eps in ladder:
        for ev in yosida_curve(spec, eps, r):
            print(
                f"{args.kind},{fmt_float(eps)},{fmt_float(ev.r)},"
                f"{fmt_float(ev.resolvent)},{fmt_float(ev.yosida)},"
                f"{fmt_float(ev.moreau)},{fmt_float(ev.residual)}"
            )
    result = verify_l1_bound(
        spec, ladder, r_range=(args.r_min, args.r_max), samples=args.samples
    )
    print(
        f"c1={fmt_float(result.c1)},c2={fmt_float(result.c2)},"
        f"ok={'true' if result.ok else 'false'}"
    )
    if not result.ok and result.offender is not None:
        print(
            f"offender: r={fmt_float(result.offender[0])} eps={fmt_float(result.offender[1])}",
            file=sys.stderr,
        )
    return 0


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def cmd_energy_report(args) -> int:
    from .dynamics import energy  # local import keeps CLI import light

    run_dir = Path(args.run_dir)
    config_path = run_dir / "config.txt"
    csv_path = run_dir / "run.csv"
    if not config_path.exists() or not csv_path.exists():
        raise FileNotFoundError(f"{run_dir} lacks config.txt/run.csv")
    setup = parse_config(config_path.read_text())
    header, rows = _read_csv(csv_path)
    col = {name: i for i, name in enumerate(header)}
    by_step = {int(row[col["step"]]): row for row in rows}

    checked = 0
    mismatches = 0
    for chk in sorted(run_dir.glob("chk_*.chvi")):
        state = resume(chk, setup)
        if state.step not in by_step:
            continue
        row = by_step[state.step]
        led = energy(state, setup.config)
        from .spectral import norm_H, norm_Vprime, norm_V, to_values

        recomputed = {
            "E_total": led.total,
            "kinetic": led.kinetic,
            "dirichlet": led.dirichlet,
            "potential": led.potential,
            "concave": led.concave,
            "dissipation_integral": state.dissipation_integral,
            "max_abs_u": float(np.max(np.abs(to_values(state.u)))),
            "norm_V_u": norm_V(state.u),
            "norm_H_v": norm_H(state.v),
            "norm_Vprime_v": norm_Vprime(state.v),
        }
        bad = [
            name
            for name, val in recomputed.items()
            if float(row[col[name]]) != val
        ]
        checked += 1
        if bad:
            mismatches += 1
            print(f"step {state.step}: MISMATCH in {','.join(bad)}")
        else:
            print(f"step {state.step}: OK")
    if checked == 0:
        raise FileNotFoundError(f"no checkpoints with matching CSV rows in {run_dir}")
    if mismatches:
        print(f"{mismatches}/{checked} checkpoints disagree with the CSV", file=sys.stderr)
        return 3
    print(f"all {checked} checkpoints agree with the CSV")
    return 0


def cmd_plotdata(args) -> int:
    src = Path(args.dir)
    plot = src / "plot"
    made_any = False

    run_csv = src / "run.csv"
    if run_csv.exists():
        plot.mkdir(exist_ok=True)
        header, rows = _read_csv(run_csv)
        col = {name: i for i, name in enumerate(header)}
        write_csv(
            plot / "energy_vs_t.csv",
            ("t", "E_total", "kinetic", "dirichlet", "potential", "concave"),
            (
                [float(r[col[c]]) for c in ("t", "E_total", "kinetic", "dirichlet", "potential", "concave")]
                for r in rows
            ),
        )
        write_csv(
            plot / "maxu_vs_t.csv",
            ("t", "max_abs_u"),
            ([float(r[col["t"]]), float(r[col["max_abs_u"]])] for r in rows),
        )
        made_any = True

    summary = src / "sweep_summary.csv"
    if summary.exists():
        plot.mkdir(exist_ok=True)
        header, rows = _read_csv(summary)
        col = {name: i for i, name in enumerate(header)}

        def log10(v: float) -> float:
            return float(np.log10(v)) if v > 0.0 else float("nan")

        cauchy_rows = []
        mon_rows = []
        for r in rows:
            eps = float(r[col["eps"]])
            cv = float(r[col["cauchy_L2V"]])
            cvp = float(r[col["cauchy_L2Vprime"]])
            cauchy_rows.append((eps, log10(eps), cv, log10(cv), cvp, log10(cvp)))
            mon_rows.append(
                [eps]
                + [float(r[col[c]]) for c in SWEEP_CSV_COLUMNS[6:]]
            )
        write_csv(
            plot / "cauchy_loglog.csv",
            ("eps", "log10_eps", "cauchy_L2V", "log10_cauchy_L2V",
             "cauchy_L2Vprime", "log10_cauchy_L2Vprime"),
            cauchy_rows,
        )
        write_csv(
            plot / "monitors_vs_eps.csv",
            ("eps",) + SWEEP_CSV_COLUMNS[6:],
            mon_rows,
        )
        for rung_profile in sorted(src.glob("rung_*/eta_profile.csv")):
            target = plot / f"eta_profile_{rung_profile.parent.name}.csv"
            target.write_text(rung_profile.read_text())
        made_any = True

    if not made_any:
        raise FileNotFoundError(f"{src} holds neither run.csv nor sweep_summary.csv")
    print(f"plot data written to {plot}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chvi",
        description="Spectral solver and verification harness for the viscous "
        "Cahn-Hilliard equation with inertia",
    )
    p.add_argument("--version", action="version", version=f"chvi {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one simulation")
    run.add_argument("--config", required=True)
    run.add_argument("--resume", default=None, help="checkpoint to continue from")
    run.add_argument("--out", default="run_out")
    run.set_defaults(fn=cmd_run)

    sw = sub.add_parser("sweep", help="run an eps ladder and report convergence")
    sw.add_argument("--config", required=True)
    sw.add_argument("--eps-ladder", default=None, help="comma list, default "
                    + ",".join(f"{e:g}" for e in DEFAULT_EPS_LADDER))
    sw.add_argument("--joint-refine", action="store_true",
                    help="scale dt proportionally to eps along the ladder")
    sw.add_argument("--stride", type=int, default=1, help="field storage stride")
    sw.add_argument("--out", default="sweep_out")
    sw.set_defaults(fn=cmd_sweep)

    cp = sub.add_parser("check-potential", help="tabulate the regularized graph")
    cp.add_argument("--kind", required=True)
    cp.add_argument("--eps-ladder", default="0.1,0.01,0.001,0.0001")
    cp.add_argument("--samples", type=int, default=2000)
    cp.add_argument("--r-min", type=float, default=-5.0)
    cp.add_argument("--r-max", type=float, default=5.0)
    cp.set_defaults(fn=cmd_check_potential)

    er = sub.add_parser("energy-report", help="recompute ledgers from checkpoints")
    er.add_argument("run_dir")
    er.set_defaults(fn=cmd_energy_report)

    pd = sub.add_parser("plotdata", help="derive plot-ready CSV series")
    pd.add_argument("dir")
    pd.set_defaults(fn=cmd_plotdata)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StepFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (CheckpointError, FileNotFoundError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
