"""Command-line front end: JSON system files in, JSON/CSV reports out.

Exit codes: 0 success, 1 validation failure, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import __version__
from .dynamics import (
    BranchTrackingError,
    IncompatibleHamiltonian,
    QuadraticHamiltonian,
    compatibility_report,
    evolve_gaussian,
    reduce_hamiltonian,
)
from .gaussint import GaussianIntegralError
from .germs import GermError, h_germ
from .inner import (
    ClosedFormMismatch,
    dirac_inner_product,
    dirac_project,
    gaussian_equivalent,
    gaussian_inner_product,
    gaussian_norm_closed_form,
)
from .oracle import OracleError, numeric_inner_product
from .random_instances import random_plane, random_quasi
from .stability import UnstableSystemError, UnsupportedModesError, analyze_stability, extract_modes
from .states import GaussianState, InvalidStateError
from .symplectic import ConstraintPlane, GaugeSurface, isotropy_violations, omega_matrix

CSV_VERSION = "1"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
FIELDS = {"n", "constraints", "measure_scale", "gauge", "gamma", "epsilon", "gaussian", "gaussian2"}


class ValidationError(ValueError):
    def __init__(self, code, message, location=None):
        super().__init__(message)
        self.code = code
        self.location = location


@dataclass
class SystemDefinition:
    raw: dict
    n: int
    plane: ConstraintPlane
    gauge: GaugeSurface | None
    hamiltonian: QuadraticHamiltonian | None
    gaussian: GaussianState | None
    gaussian2: GaussianState | None


def _real_matrix(value, shape, where):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError("E_TYPE", f"{where} must contain real numbers", where)
    if arr.shape != shape:
        raise ValidationError("E_SHAPE", f"{where} has shape {arr.shape}, expected {shape}", where)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        raise ValidationError("E_VALUE", f"non-finite entry at {where}{list(bad[0])}", where)
    return arr


def _complex_array(value, shape, where):
    """Complex numbers are [re, im] pairs; plain reals are accepted too."""
    arr = np.asarray(value, dtype=object)

    def conv(x, path):
        if isinstance(x, (int, float)):
            return complex(x)
        if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
            return complex(x[0], x[1])
        raise ValidationError("E_TYPE", f"{where}{path} is not a number or [re, im] pair", where + path)

    def walk(x, depth, path):
        if depth == len(shape):
            return conv(x, path)
        if not isinstance(x, list) or len(x) != shape[depth]:
            raise ValidationError("E_SHAPE", f"{where}{path} must have length {shape[depth]}",
                                  where + path)
        return [walk(v, depth + 1, f"{path}[{i}]") for i, v in enumerate(x)]
    del arr
    return np.array(walk(value, 0, ""), dtype=complex).reshape(shape)


def _parse_gaussian(obj, n, where):
    if not isinstance(obj, dict) or "A" not in obj:
        raise ValidationError("E_FIELD", f"{where} needs an 'A' entry", where)
    A = _complex_array(obj["A"], (n, n), f"{where}.A")
    b = _complex_array(obj.get("b", [0.0] * n), (n,), f"{where}.b")
    c = _complex_array(obj.get("c", 1.0), (), f"{where}.c")
    asym = np.abs(A - A.T)
    if asym.max(initial=0) > 1e-10 * max(1.0, np.abs(A).max()):
        i, j = np.unravel_index(np.argmax(asym), asym.shape)
        raise ValidationError("E_SYMMETRY", f"{where}.A not symmetric at [{i}][{j}]",
                              f"{where}.A[{i}][{j}]")
    try:
        return GaussianState(A, b, complex(c))
    except InvalidStateError as exc:
        raise ValidationError("E_GAUSSIAN", str(exc), where)


def parse_system(raw: dict) -> SystemDefinition:
    if not isinstance(raw, dict):
        raise ValidationError("E_TYPE", "top level must be a JSON object", "$")
    unknown = sorted(set(raw) - FIELDS)
    if unknown:
        raise ValidationError("E_FIELD", f"unknown field '{unknown[0]}'", unknown[0])
    if not isinstance(raw.get("n"), int) or raw["n"] < 1:
        raise ValidationError("E_FIELD", "'n' must be a positive integer", "n")
    n = raw["n"]
    rows = raw.get("constraints", [])
    if not isinstance(rows, list):
        raise ValidationError("E_TYPE", "'constraints' must be a list of rows", "constraints")
    k = len(rows)
    if k > n:
        raise ValidationError("E_DIMENSION", f"{k} constraints exceed n = {n}", "constraints")
    X = _real_matrix(rows, (k, 2 * n), "constraints") if k else np.zeros((0, 2 * n))
    if k:
        bad = isotropy_violations(X.T)
        if bad:
            a, b, val = bad[0]
            raise ValidationError(
                "E_ISOTROPY",
                f"constraints[{a}] and constraints[{b}] are not isotropic: omega = {val:.6g}",
                f"constraints[{a}],constraints[{b}]")
        if np.linalg.matrix_rank(X, tol=1e-10) < k:
            raise ValidationError("E_RANK", "constraint rows are linearly dependent", "constraints")
    scale = raw.get("measure_scale", 1.0)
    if not isinstance(scale, (int, float)) or not scale > 0:
        raise ValidationError("E_VALUE", "'measure_scale' must be positive", "measure_scale")
    vec = ConstraintPlane.from_vectors(X, float(scale), n) if k else ConstraintPlane.empty(n)
    plane = ConstraintPlane(vec.basis, vec.measure_scale)
    gauge = None
    if raw.get("gauge") is not None:
        Y = _real_matrix(raw["gauge"], (k, 2 * n), "gauge")
        W = omega_matrix(X.T, Y.T)
        if abs(np.linalg.det(W)) < 1e-10 if k else False:
            raise ValidationError("E_GAUGE", "gauge rows are not dual to the constraints", "gauge")
        if k and isotropy_violations(Y.T):
            a, b, _ = isotropy_violations(Y.T)[0]
            raise ValidationError("E_ISOTROPY", f"gauge[{a}] and gauge[{b}] are not isotropic",
                                  f"gauge[{a}],gauge[{b}]")
        # express duals for the orthonormalized plane basis
        coords = np.linalg.lstsq(X.T, plane.basis, rcond=None)[0]
        Yb = Y.T @ np.linalg.inv(coords.T @ W)
        gauge = GaugeSurface(plane, Yb, 1.0)
    ham = None
    if raw.get("gamma") is not None:
        gamma = _real_matrix(raw["gamma"], (2 * n, 2 * n), "gamma")
        asym = np.abs(gamma - gamma.T)
        if asym.max() > 1e-12 * max(1.0, np.abs(gamma).max()):
            i, j = np.unravel_index(np.argmax(asym), asym.shape)
            raise ValidationError("E_SYMMETRY", f"gamma not symmetric at [{i}][{j}]",
                                  f"gamma[{i}][{j}]")
        eps = raw.get("epsilon", 0.0)
        if not isinstance(eps, (int, float)):
            raise ValidationError("E_TYPE", "'epsilon' must be real", "epsilon")
        ham = QuadraticHamiltonian(gamma, float(eps))
    g1 = _parse_gaussian(raw["gaussian"], n, "gaussian") if raw.get("gaussian") else None
    g2 = _parse_gaussian(raw["gaussian2"], n, "gaussian2") if raw.get("gaussian2") else None
    return SystemDefinition(raw, n, plane, gauge, ham, g1, g2)


def _c(z):
    z = complex(z)
    return [z.real, z.imag]


def _cmat(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim == 0:
        return _c(M)
    return [_cmat(r) for r in M]


def _num(value, method, tol=None):
    out = {"value": value, "method": method}
    if tol is not None:
        out["tolerance"] = tol
    return out


def _need(sysdef, attr, what):
    if getattr(sysdef, attr) is None:
        raise ValidationError("E_FIELD", f"this command needs '{what}' in the system file", what)
    return getattr(sysdef, attr)


def cmd_check(sysdef, args):
    checks = {"isotropy": {"passed": True, "method": "pairwise omega", "tolerance": 1e-10}}
    ok = True
    if sysdef.hamiltonian is not None:
        rep = compatibility_report(sysdef.hamiltonian, sysdef.plane, sysdef.gauge, tol=args.tol)
        entry = {"passed": rep.compatible, "method": "block membership in frame [L, G, V]",
                 "tolerance": args.tol, "GG_residual": rep.gg_residual,
                 "GV_residual": rep.gv_residual}
        if not rep.compatible:
            entry["violating_block"] = "GG" if rep.gg_residual > args.tol else "GV"
            ok = False
        checks["compatibility"] = entry
    if sysdef.gaussian is not None:
        checks["gaussian"] = {"passed": True, "method": "symmetry and Im A > 0"}
    return {"checks": checks, "passed": ok}, (EXIT_OK if ok else EXIT_VALIDATION)


def cmd_norm(sysdef, args):
    psi = _need(sysdef, "gaussian", "gaussian")
    direct = gaussian_inner_product(psi, psi, sysdef.plane).real
    report = {"norm": _num(direct, "joint Gaussian integral over (xi, s)")}
    if not np.any(psi.b):
        closed = gaussian_norm_closed_form(psi, sysdef.plane, rtol=args.tol)
        report["norm_projector_formula"] = _num(closed, "(2pi)^((n+k)/2)|c|^2 Delta(C)/Delta(P_-)",
                                                args.tol)
    return report, EXIT_OK


def cmd_equiv(sysdef, args):
    f = _need(sysdef, "gaussian", "gaussian")
    g = _need(sysdef, "gaussian2", "gaussian2")
    L = sysdef.plane
    same = h_germ(f.A, L).same_span(h_germ(g.A, L))
    c = gaussian_equivalent(f, g, L, rtol=args.tol) if same else None
    report = {"equal_h_germs": bool(same), "method": "span comparison of r_perp(A) + L^C"}
    if c is not None:
        report["c"] = _num(_c(c), "<g,f>/<g,g>", args.tol)
    return report, EXIT_OK


def cmd_dirac(sysdef, args):
    psi = _need(sysdef, "gaussian", "gaussian")
    L = sysdef.plane
    d = dirac_project(psi, L, sysdef.gauge)
    dn = dirac_inner_product(d, d, L, sysdef.gauge).real
    report = {
        "A": _cmat(d.A), "b": _cmat(d.b), "c": _c(d.c),
        "delta_directions": d.delta_directions.tolist(),
        "annihilation_residual": _num(d.annihilation_residual(), "coefficients of Omega(X) psi_D"),
        "dirac_norm": _num(dn, "Gaussian integral over (xi, t, lambda)"),
        "constrained_norm": _num(gaussian_inner_product(psi, psi, L).real,
                                 "joint Gaussian integral over (xi, s)"),
    }
    return report, EXIT_OK


def _evolve_trace(sysdef, args):
    psi = _need(sysdef, "gaussian", "gaussian")
    H = _need(sysdef, "hamiltonian", "gamma")
    times = np.linspace(0.0, args.time, args.samples + 1)
    rows = []
    for t in times:
        st = evolve_gaussian(psi, H, sysdef.plane, float(t), steps=args.steps)
        rows.append((float(t), st))
    return rows


def cmd_evolve(sysdef, args):
    rows = _evolve_trace(sysdef, args)
    L = sysdef.plane
    n0 = gaussian_inner_product(rows[0][1], rows[0][1], L).real
    final = rows[-1][1]
    report = {
        "t": args.time,
        "A": _cmat(final.A), "b": _cmat(final.b), "c": _c(final.c),
        "norm_drift": _num(abs(gaussian_inner_product(final, final, L).real - n0) / n0,
                           "relative change of the constrained norm"),
        "method": "germ transport by the reduced flow, tracked sqrt(det C)",
        "steps": args.steps,
    }
    return report, EXIT_OK


def evolve_csv(rows) -> str:
    n = rows[0][1].n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["t"]
    for i in range(n):
        for j in range(i, n):
            header += [f"ReA{i}{j}", f"ImA{i}{j}"]
    header += ["abs_c", "arg_c"]
    buf.write(f"# linquad evolve trace v{CSV_VERSION}\n")
    w.writerow(header)
    for t, st in rows:
        line = [repr(t)]
        for i in range(n):
            for j in range(i, n):
                line += [repr(float(st.A[i, j].real)), repr(float(st.A[i, j].imag))]
        line += [repr(abs(st.c)), repr(float(np.angle(st.c)))]
        w.writerow(line)
    return buf.getvalue()


def _reduced(sysdef):
    H = _need(sysdef, "hamiltonian", "gamma")
    return reduce_hamiltonian(H, sysdef.plane, sysdef.gauge)


def cmd_stability(sysdef, args):
    red = _reduced(sysdef)
    rep = analyze_stability(red.gamma_bar, red.space)
    report = {"stable": bool(rep.stable), "diagonalizable": bool(rep.diagonalizable),
              "spectrum": _cmat(rep.spectrum), "method": "eigenvalues and Jordan-defect ranks"}
    if rep.stable:
        modes = extract_modes(red.gamma_bar, red.space)
        report["beta"] = [float(b) for b in modes.beta]
    else:
        report["reason"] = rep.reason
    return report, EXIT_OK


def cmd_spectrum(sysdef, args):
    red = _reduced(sysdef)
    modes = extract_modes(red.gamma_bar, red.space)
    eps = complex(red.epsilon)
    m = len(modes.beta)
    levels = []
    for N in product(range(args.bound + 1), repeat=m):
        if sum(N) <= args.bound:
            E = eps + float(np.sum(modes.beta * (np.asarray(N) + 0.5)))
            levels.append({"N": list(N), "energy": E.real if E.imag == 0 else _c(E)})
    levels.sort(key=lambda d: (sum(d["N"]), d["N"]))
    energies = [lv["energy"] for lv in levels]
    return {"beta": [float(b) for b in modes.beta], "epsilon_reduced": _c(eps),
            "energies": energies, "levels": levels,
            "method": "eps' + sum beta_I (N_I + 1/2)"}, EXIT_OK


def cmd_oracle_compare(sysdef, args):
    comparisons = []
    if args.random:
        rng = np.random.default_rng(args.seed)
        for i in range(args.random):
            n = int(rng.integers(1, 3))
            k = int(rng.integers(0, min(n, 2) + 1))
            f, g, L = random_quasi(rng, n, 1), random_quasi(rng, n, 1), random_plane(rng, n, k)
            comparisons.append(_compare(f, g, L, args, f"random[{i}] n={n} k={k}"))
    else:
        psi = _need(sysdef, "gaussian", "gaussian")
        other = sysdef.gaussian2 or psi
        comparisons.append(_compare(psi, other, sysdef.plane, args, "file"))
        if sysdef.hamiltonian is not None and sysdef.n <= 2:
            comparisons.append(_compare_evolution(psi, sysdef, args))
    worst = max(c["relative_delta"] for c in comparisons)
    ok = worst <= max(args.tol, 10 * max(c["oracle_error"] for c in comparisons))
    report = {"comparisons": comparisons, "max_relative_delta": worst, "tolerance": args.tol,
              "passed": bool(ok)}
    return report, (EXIT_OK if ok else EXIT_NUMERICAL)


def _compare(f, g, L, args, label):
    from .oracle import GridSpec

    closed = gaussian_inner_product(f, g, L)
    res = numeric_inner_product(f, g, L, GridSpec(xi_points=args.grid, s_points=args.grid),
                                rtol=min(args.tol, 1e-9) * 0.1)
    delta = abs(closed - res.value) / abs(closed)
    return {"label": label, "closed_form": _c(closed), "oracle": _c(res.value),
            "oracle_error": res.error / abs(closed), "relative_delta": delta,
            "nodes": res.nodes, "method": "sheared tensor trapezoid"}


def _compare_evolution(psi, sysdef, args):
    from .oracle import TruncationSpec, fidelity, numeric_evolve, project_to_basis

    red = reduce_hamiltonian(sysdef.hamiltonian, sysdef.plane)
    full = QuadraticHamiltonian(red.gamma_full, red.epsilon)
    o = numeric_evolve(psi, full, sysdef.plane, args.time, TruncationSpec(n_max=args.trunc))
    evolved = evolve_gaussian(psi, sysdef.hamiltonian, sysdef.plane, args.time,
                              steps=args.steps)
    a = o.coeffs.ravel()
    b = project_to_basis(evolved, o.n_max, o.freqs).ravel()
    ov = np.vdot(b, a)
    err = 1 - fidelity(ov, np.vdot(a, a).real, np.vdot(b, b).real)
    # distance after removing global phase and scale; linear in the state error
    aligned = b * (ov / np.vdot(b, b))
    delta = float(np.linalg.norm(a - aligned) / np.linalg.norm(a))
    return {"label": f"evolve t={args.time}", "fidelity_error": err,
            "relative_delta": delta, "oracle_error": 0.0,
            "n_max": o.n_max, "method": "truncated oscillator basis, expm_multiply"}


COMMANDS = {
    "check": cmd_check,
    "norm": cmd_norm,
    "equiv": cmd_equiv,
    "dirac": cmd_dirac,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "spectrum": cmd_spectrum,
    "oracle-compare": cmd_oracle_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="tolerance (default 1e-8)")
    common.add_argument("--steps", type=int, default=64,
                        help="sub-intervals for square-root branch tracking (default 64)")
    common.add_argument("--trunc", type=int, default=40, help="oscillator cutoff (default 40)")
    common.add_argument("--grid", type=int, default=16,
                        help="minimum quadrature nodes per axis (default 16)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="output format; csv only for evolve (default json)")
    p = argparse.ArgumentParser(prog="linquad", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("file", nargs="?" if name == "oracle-compare" else None,
                        help="system definition (JSON)")
        if name in ("evolve", "oracle-compare"):
            sp.add_argument("--time", type=float, default=1.0, help="final time (default 1)")
        if name == "evolve":
            sp.add_argument("--samples", type=int, default=10,
                            help="trace samples after t=0 (default 10)")
        if name == "spectrum":
            sp.add_argument("--bound", type=int, default=2, help="max |N| (default 2)")
        if name == "oracle-compare":
            sp.add_argument("--random", type=int, default=0,
                            help="compare on this many seeded random systems instead of a file")
    return p


def _emit(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        raw = None
        if args.file:
            try:
                with open(args.file) as fh:
                    raw = json.load(fh)
            except OSError as exc:
                raise ValidationError("E_IO", str(exc), args.file)
            except json.JSONDecodeError as exc:
                raise ValidationError("E_PARSE", exc.msg, f"line {exc.lineno} column {exc.colno}")
        elif args.command != "oracle-compare" or not args.random:
            raise ValidationError("E_FIELD", "a system file is required", "file")
        sysdef = parse_system(raw) if raw is not None else None
        if args.format == "csv":
            if args.command != "evolve":
                raise ValidationError("E_FORMAT", "csv output exists only for evolve", "--format")
            out.write(evolve_csv(_evolve_trace(sysdef, args)))
            return EXIT_OK
        report, code = COMMANDS[args.command](sysdef, args)
        _emit({"command": args.command, "inputs": raw, "flags": _flags(args), "report": report},
              out)
        return code
    except (ValidationError, InvalidStateError, IncompatibleHamiltonian, GermError,
            UnstableSystemError, UnsupportedModesError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        _emit({"command": args.command, "error": {"code": code, "message": str(exc),
                                                  "location": getattr(exc, "location", None)}}, out)
        return EXIT_VALIDATION
    except (OracleError, BranchTrackingError, ClosedFormMismatch, GaussianIntegralError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        _emit({"command": args.command, "error": {"code": type(exc).__name__,
                                                  "message": str(exc)}}, out)
        return EXIT_NUMERICAL


def _flags(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "file")}


if __name__ == "__main__":
    sys.exit(main())
