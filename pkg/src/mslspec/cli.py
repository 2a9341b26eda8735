"""Command-line frontend.

Subcommands: forward, spectrum, perturb, invert-finite, invert-sd,
roundtrip.  Every numeric knob has a flag and an MSLSPEC_* environment
override; reports embed the effective config.  Exit codes: 0 success,
1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

import numpy as np

from . import io as mio
from .config import RunConfig, config_from_env
from .errors import MslspecError
from .forward import weyl_matrix
from .inverse_finite import PolePrescription, PrescribedPole, reconstruct
from .inverse_selfadjoint import reconstruct_sd
from .model import Problem, lambda_to_rho, zero_potential
from .spectral import extract_spectral_data, weyl_from_spectral_data
from .utils import parallel_map
from .verify import roundtrip_finite, roundtrip_selfadjoint


def _add_knobs(p: argparse.ArgumentParser):
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, type=float if f.type == "float" else int,
                       default=None, help=f"override config knob {f.name}")
    p.add_argument("--emit-plots", action="store_true",
                   help="write two-column plot data next to the outputs")


def _config(args) -> RunConfig:
    cfg = config_from_env()
    overrides = {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            caster = int if isinstance(getattr(cfg, f.name), int) else float
            overrides[f.name] = caster(v)
    return cfg.replace(**overrides) if overrides else cfg


def _parse_complex(text: str) -> complex:
    if "," in text:
        re_, im_ = text.split(",")
        return complex(float(re_), float(im_))
    return complex(float(text), 0.0)


def _parse_alpha(text: str) -> np.ndarray:
    doc = json.loads(text)
    if isinstance(doc, (int, float)):
        return np.array([[doc]], dtype=complex)
    arr = np.array(doc, dtype=complex)
    if arr.ndim == 1:
        arr = np.diag(arr)
    return arr


def cmd_forward(args) -> int:
    cfg = _config(args)
    problem = mio.load_problem(args.problem)
    lams = mio.read_lambda_csv(args.lambdas)
    vals = parallel_map(lambda it: weyl_matrix(problem, it[0], it[1], cfg=cfg),
                        lams, cfg.parallel)
    rows = [(lam, side, mat) for (lam, side), mat in zip(lams, vals)]
    mio.write_weyl_csv(args.out, rows, problem.m)
    if args.emit_plots:
        xs = [lam.real for lam, _ in lams]
        mio.write_plot_columns(args.out + ".norm.dat", xs,
                               [float(np.max(np.abs(v))) for v in vals])
    return 0


def cmd_spectrum(args) -> int:
    cfg = _config(args)
    problem = mio.load_problem(args.problem)
    data = extract_spectral_data(problem, cfg=cfg)
    mio.save_spectral_data(data, args.out)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("lambda," + ",".join(
                f"V[{j}][{k}]_re,V[{j}][{k}]_im"
                for j in range(data.m) for k in range(data.m)) + "\n")
            for rho, v in zip(data.rho_nodes, data.density):
                cells = [repr(float(rho * rho))]
                for j in range(data.m):
                    for k in range(data.m):
                        cells += [repr(float(v[j, k].real)), repr(float(v[j, k].imag))]
                f.write(",".join(cells) + "\n")
    if args.emit_plots:
        for j in range(data.m):
            for k in range(data.m):
                mio.write_plot_columns(f"{args.out}.V_{j}{k}.dat",
                                       data.rho_nodes**2,
                                       data.density[:, j, k].real)
    return 0


def cmd_perturb(args) -> int:
    if args.input:
        presc = mio.load_prescription(args.input)
    else:
        presc = PolePrescription(())
    poles = list(presc.poles)
    if args.action == "add":
        lam = _parse_complex(args.lam)
        alpha = _parse_alpha(args.alpha)
        nu = args.nu
        alphas = [np.zeros_like(alpha)] * (nu - 1) + [alpha]
        poles.append(PrescribedPole(lam, tuple(alphas)))
    elif args.action == "remove":
        lam = _parse_complex(args.lam)
        keep = [p for p in poles if abs(p.lam - lam) > 1e-9]
        if len(keep) == len(poles):
            print(f"no pole at {lam} to remove", file=sys.stderr)
            return 1
        poles = keep
    elif args.action == "move":
        lam = _parse_complex(args.lam)
        to = _parse_complex(args.to)
        moved = False
        for i, p in enumerate(poles):
            if abs(p.lam - lam) <= 1e-9:
                poles[i] = PrescribedPole(to, p.alphas)
                moved = True
        if not moved:
            print(f"no pole at {lam} to move", file=sys.stderr)
            return 1
    mio.save_prescription(PolePrescription(tuple(poles)), args.out)
    return 0


def _x_grid(args):
    return np.arange(0.0, args.x_end + 0.5 * args.x_step, args.x_step)


def cmd_invert_finite(args) -> int:
    cfg = _config(args)
    model = mio.load_problem(args.model)
    presc = mio.load_prescription(args.prescription)
    rec = reconstruct(model, presc, _x_grid(args), cfg=cfg)
    mio.save_problem(rec.problem(), args.out)
    if args.csv:
        mio.write_reconstruction_csv(args.csv, rec)
    if args.diagnostics:
        with open(args.diagnostics, "w") as f:
            json.dump({
                "det_min_abs": rec.report.det_min_abs,
                "cond_max": rec.report.cond_max,
                "eps_l1": rec.report.l1,
                "eps_l1_weighted": rec.report.l1_weighted,
                "tail_decay_rate": rec.report.tail_decay_rate,
                "config": cfg.as_dict(),
            }, f, sort_keys=True, indent=1)
    if args.emit_plots:
        from .model import mat_norm
        mio.write_plot_columns(args.out + ".Q.dat", rec.x,
                               [mat_norm(q) for q in rec.q_values])
        mio.write_plot_columns(args.out + ".eps.dat", rec.x,
                               [mat_norm(e) for e in rec.eps])
    return 0


def cmd_invert_sd(args) -> int:
    cfg = _config(args)
    model = mio.load_problem(args.model)
    data = mio.load_spectral_data(args.data)
    rec, diags = reconstruct_sd(data, model, _x_grid(args), cfg=cfg)
    mio.save_problem(rec.problem(), args.out)
    if args.csv:
        mio.write_reconstruction_csv(args.csv, rec)
    if args.diagnostics:
        with open(args.diagnostics, "w") as f:
            json.dump({**{k: v for k, v in diags.items()},
                       "eps_l1": rec.report.l1,
                       "config": cfg.as_dict()}, f, sort_keys=True, indent=1)
    if args.emit_plots:
        from .model import mat_norm
        mio.write_plot_columns(args.out + ".Q.dat", rec.x,
                               [mat_norm(q) for q in rec.q_values])
        mio.write_plot_columns(args.out + ".eps.dat", rec.x,
                               [mat_norm(e) for e in rec.eps])
    return 0


def cmd_roundtrip(args) -> int:
    cfg = _config(args)
    if args.fixture == "bargmann":
        model = Problem(m=1, q=zero_potential(1), h=np.zeros((1, 1)))
        presc = PolePrescription((PrescribedPole(-1.0, (np.array([[2.0]]),)),))
        report = roundtrip_finite(model, presc, cfg=cfg)
    elif args.mode == "finite":
        model = mio.load_problem(args.model)
        presc = mio.load_prescription(args.prescription)
        report = roundtrip_finite(model, presc, cfg=cfg)
    else:
        true_problem = mio.load_problem(args.problem)
        model = mio.load_problem(args.model) if args.model else None
        report = roundtrip_selfadjoint(true_problem, model, cfg=cfg)

    doc = {
        "ok": report.ok,
        "max_weyl_mismatch": report.max_weyl_mismatch,
        "eigenvalue_mismatch": report.eigenvalue_mismatch,
        "residue_mismatch": report.residue_mismatch,
        "q_l1_error": report.q_l1_error,
        "h_error": report.h_error,
        "witnesses": report.witnesses,
        "cond_extrema": report.cond_extrema,
        "timings": report.timings,
        "errors": list(report.errors),
        "config": report.config,
        "seed": report.seed,
    }
    if args.report:
        with open(args.report, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=1, default=float)
    status = "PASS" if report.ok else "FAIL"
    print(f"roundtrip: {status}")
    print(f"  max Weyl mismatch : {report.max_weyl_mismatch:.3e}")
    print(f"  eigenvalue error  : {report.eigenvalue_mismatch:.3e}")
    print(f"  residue error     : {report.residue_mismatch:.3e}")
    if report.q_l1_error is not None:
        print(f"  Q L1 error        : {report.q_l1_error:.3e}")
    for k, v in report.witnesses.items():
        print(f"  witness {k}: {v:.3e}")
    for e in report.errors:
        print(f"  error: {e}")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mslspec",
        description="Forward and inverse spectral solvers for matrix "
                    "Sturm-Liouville operators on the half-line")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="Weyl matrix at a list of lambda")
    p.add_argument("--problem", required=True)
    p.add_argument("--lambdas", required=True, help="CSV with re,im,side rows")
    p.add_argument("--out", required=True)
    _add_knobs(p)
    p.set_defaults(fn=cmd_forward)

    p = sub.add_parser("spectrum", help="extract spectral data")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export the density as CSV")
    _add_knobs(p)
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("perturb", help="edit a pole prescription file")
    p.add_argument("action", choices=["add", "remove", "move"])
    p.add_argument("--in", dest="input", help="existing file (omit to start empty)")
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lam", required=True, help="re or re,im")
    p.add_argument("--alpha", default="1", help="scalar or JSON matrix")
    p.add_argument("--nu", type=int, default=1, help="pole order of the added term")
    p.add_argument("--to", help="new location for 'move'")
    p.set_defaults(fn=cmd_perturb)

    for name, fn in (("invert-finite", cmd_invert_finite), ("invert-sd", cmd_invert_sd)):
        p = sub.add_parser(name, help=f"{name} reconstruction")
        p.add_argument("--model", required=True)
        if name == "invert-finite":
            p.add_argument("--prescription", required=True)
        else:
            p.add_argument("--data", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--csv")
        p.add_argument("--diagnostics")
        p.add_argument("--x-end", type=float, default=8.0)
        p.add_argument("--x-step", type=float, default=0.02)
        _add_knobs(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("roundtrip", help="end-to-end verification")
    p.add_argument("--mode", choices=["finite", "selfadjoint"], default="finite")
    p.add_argument("--fixture", choices=["bargmann"],
                   help="run a bundled fixture instead of input files")
    p.add_argument("--model")
    p.add_argument("--prescription")
    p.add_argument("--problem")
    p.add_argument("--report", help="write the JSON report here")
    _add_knobs(p)
    p.set_defaults(fn=cmd_roundtrip)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MslspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
