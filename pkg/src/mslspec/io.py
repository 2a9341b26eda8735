"""Plain-text file formats: problems, spectral data, pole prescriptions,
lambda lists and result tables.  Everything is JSON or CSV with complex
numbers encoded as [re, im] pairs; floats round-trip bit-exactly through
repr."""

from __future__ import annotations

import csv
import json

import numpy as np

from .inverse_finite import PolePrescription, PrescribedPole
from .model import PotentialSpec, Problem, square_matrix
from .spectral import SpectralData


def _cpx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _mat_out(a) -> list:
    a = np.asarray(a, dtype=complex)
    return [[_cpx(z) for z in row] for row in a]


def _mat_in(rows) -> np.ndarray:
    return np.array([[complex(c[0], c[1]) for c in row] for row in rows])


def _dump(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def save_problem(problem: Problem, path: str):
    pot = {"kind": problem.q.kind, "x_max": problem.q.x_max}
    if problem.q.kind == "grid":
        pot["x"] = list(map(float, problem.q.x))
        pot["values"] = [_mat_out(v) for v in problem.q.values]
    else:
        pot["params"] = list(problem.q.params)
    _dump({"m": problem.m, "h": _mat_out(problem.h),
           "selfadjoint": bool(problem.selfadjoint), "potential": pot}, path)


def load_problem(path: str) -> Problem:
    with open(path) as f:
        doc = json.load(f)
    m = int(doc["m"])
    pot = doc["potential"]
    if pot["kind"] == "grid":
        spec = PotentialSpec(m=m, kind="grid", x_max=float(pot["x_max"]),
                             x=np.array(pot["x"], dtype=float),
                             values=np.array([_mat_in(v) for v in pot["values"]]))
    else:
        spec = PotentialSpec(m=m, kind=pot["kind"], x_max=float(pot["x_max"]),
                             params=tuple(pot.get("params", ())))
    return Problem(m=m, q=spec, h=_mat_in(doc["h"]),
                   selfadjoint=bool(doc.get("selfadjoint", False)))


def save_spectral_data(data: SpectralData, path: str):
    _dump({
        "m": data.m,
        "rho_max": data.rho_max,
        "poles": [{"lambda": float(np.real(lk)), "alpha": _mat_out(a)}
                  for lk, a in data.poles],
        "density": {
            "rho_nodes": list(map(float, data.rho_nodes)),
            "weights": list(map(float, data.rho_weights)),
            "values": [_mat_out(v) for v in data.density],
        },
        "meta": {k: v for k, v in data.meta.items()
                 if isinstance(v, (int, float, str, bool))},
    }, path)


def load_spectral_data(path: str) -> SpectralData:
    with open(path) as f:
        doc = json.load(f)
    dens = doc["density"]
    return SpectralData(
        m=int(doc["m"]),
        poles=tuple((float(p["lambda"]), square_matrix(_mat_in(p["alpha"])))
                    for p in doc["poles"]),
        rho_nodes=np.array(dens["rho_nodes"], dtype=float),
        rho_weights=np.array(dens["weights"], dtype=float),
        density=np.array([_mat_in(v) for v in dens["values"]]),
        rho_max=float(doc["rho_max"]),
        meta=dict(doc.get("meta", {})),
    )


def save_prescription(presc: PolePrescription, path: str):
    out = []
    for p in presc.poles:
        out.append({
            "lambda": _cpx(p.lam),
            "terms": [{"nu": nu, "alpha": _mat_out(a)}
                      for nu, a in enumerate(p.alphas, start=1)],
        })
    _dump(out, path)


def load_prescription(path: str) -> PolePrescription:
    with open(path) as f:
        doc = json.load(f)
    poles = []
    for entry in doc:
        lam = complex(entry["lambda"][0], entry["lambda"][1])
        terms = {int(t["nu"]): _mat_in(t["alpha"]) for t in entry["terms"]}
        top = max(terms)
        dim = terms[top].shape[0]
        alphas = [terms.get(nu, np.zeros((dim, dim))) for nu in range(1, top + 1)]
        poles.append(PrescribedPole(lam, tuple(alphas)))
    return PolePrescription(tuple(poles))


def read_lambda_csv(path: str):
    """Rows of (lambda, side) from a CSV with columns re,im,side."""
    out = []
    with open(path) as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#") or row[0] == "lambda_re":
                continue
            re_, im_ = float(row[0]), float(row[1])
            side = row[2].strip() if len(row) > 2 and row[2].strip() else "auto"
            out.append((complex(re_, im_), side))
    return out


def write_weyl_csv(path: str, rows, m: int):
    """rows: iterable of (lambda, side, M matrix); row-major entry order."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        head = ["lambda_re", "lambda_im", "side"]
        for j in range(m):
            for k in range(m):
                head += [f"M[{j}][{k}]_re", f"M[{j}][{k}]_im"]
        w.writerow(head)
        for lam, side, mat in rows:
            row = [repr(float(lam.real)), repr(float(lam.imag)), side]
            for j in range(m):
                for k in range(m):
                    row += [repr(float(mat[j, k].real)), repr(float(mat[j, k].imag))]
            w.writerow(row)


def write_reconstruction_csv(path: str, rec):
    """x, reconstructed Q entries, correction entries (row-major re/im)."""
    m = rec.q_values.shape[-1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        head = ["x"]
        for tag in ("Q", "eps"):
            for j in range(m):
                for k in range(m):
                    head += [f"{tag}[{j}][{k}]_re", f"{tag}[{j}][{k}]_im"]
        w.writerow(head)
        for i, x in enumerate(rec.x):
            row = [repr(float(x))]
            for arr in (rec.q_values, rec.eps):
                for j in range(m):
                    for k in range(m):
                        row += [repr(float(arr[i, j, k].real)),
                                repr(float(arr[i, j, k].imag))]
            w.writerow(row)


def write_plot_columns(path: str, xs, ys):
    """Two-column gnuplot-style data file."""
    with open(path, "w") as f:
        for x, y in zip(xs, ys):
            f.write(f"{float(x)!r} {float(y)!r}\n")
