"""Command-line front end: verify, build, solve, scan and simulate.

Exit codes: 0 success, 1 domain failure (invalid symmetry, infeasible
template, non-relaxing lattice, residual above tolerance), 2 usage error
(bad flags, unreadable or malformed input, mismatched dimensions).

Reports go to stdout as JSON; diagnostics go to stderr. Every output is a
deterministic function of the inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import model
from .chiral import SYMMETRY_TOL, chiral_residual, is_valid_symmetry, predicted_steady_moments, purity_deviation
from .constraints import CONSTRAINT_TOL, InfeasibleError, solve
from .exemplars import (alternating_potential, flux_table, fourfold_from_fluxes, fourfold_lattice,
                        fourfold_sigma, herald_hamiltonian, herald_lattice, herald_sigma, saddle_potential)
from .model import FormatError, Hamiltonian, SqueezeParams, SymmetryMatrix
from .oracle import (FIXED_POINT_TOL, IntegrationError, NonRelaxingError, distance_trace, evolve, generator,
                     moment_distance, steady_moments, trace_csv)
from .spectral import SCAN_CHIRAL_TOL, NonChiralFamilyError, fourfold_family, grid_range, scan

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _report(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _load(path: str, kind: str):
    try:
        return model.load(path, kind)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except FormatError as exc:
        raise UsageError(str(exc)) from None


def _same_dim(H: Hamiltonian, sigma: SymmetryMatrix) -> None:
    if H.dim != sigma.dim:
        raise UsageError(f"dimension mismatch: Hamiltonian {H.dim} vs symmetry {sigma.dim}")


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    H = _load(args.hamiltonian, "hamiltonian")
    sigma = _load(args.sigma, "symmetry")
    _same_dim(H, sigma)
    sym = is_valid_symmetry(sigma, args.symmetry_tol)
    res = chiral_residual(H, sigma)
    ok = sym.valid and res <= args.tol
    _report({"dim": H.dim, "drain": sigma.drain, "symmetry": sym.to_document(),
             "chiral_residual": res, "tol": args.tol, "valid": ok})
    return EXIT_OK if ok else EXIT_DOMAIN


# --------------------------------------------------------------------------
# build


def _potential(text: str):
    name, sep, value = text.partition(":")
    if not sep or name not in ("alternating", "saddle"):
        raise argparse.ArgumentTypeError(f"expected alternating:V or saddle:V, got {text!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad potential strength {value!r}") from None


def _coupling(text: str) -> float:
    name, sep, value = text.partition(":")
    if name != "uniform" or not sep:
        raise argparse.ArgumentTypeError(f"expected uniform:J, got {text!r}")
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad coupling {value!r}") from None


def _flux_csv(rows) -> str:
    lines = ["px,py,flux"]
    lines += [f"{model._fmt(px)},{model._fmt(py)},{model._fmt(f)}" for px, py, f in rows]
    return "\n".join(lines) + "\n"


def cmd_build(args) -> int:
    if args.L < 1:
        raise UsageError("--L must be >= 1")
    if args.geometry == "fourfold":
        if args.potential is None:
            potential = None
        else:
            name, strength = args.potential
            potential = alternating_potential(strength) if name == "alternating" \
                else saddle_potential(strength, args.L)
        try:
            H = fourfold_from_fluxes(args.L, potential, hopping=args.hopping)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        sigma = fourfold_sigma(args.L)
        lattice = fourfold_lattice(args.L)
        extra = {"flux.csv": _flux_csv(flux_table(H, args.L))}
    else:
        if args.J <= 0:
            raise UsageError("--J must be > 0")
        # uniform:c means H[0, -n] = -c for every heralding site
        H = herald_hamiltonian(args.L, args.V, args.J, -args.coupling)
        sigma = herald_sigma(args.L)
        lattice = herald_lattice(args.L, H)
        extra = {}
    res = chiral_residual(H, sigma)
    out = _outdir(args.out)
    model.save(lattice, out / "lattice.json")
    model.save(H, out / "hamiltonian.json")
    model.save(sigma, out / "sigma.json")
    for name, text in extra.items():
        (out / name).write_text(text)
    files = ["lattice.json", "hamiltonian.json", "sigma.json", *extra]
    _report({"geometry": args.geometry, "L": args.L, "dim": H.dim, "drain": sigma.drain,
             "chiral_residual": res, "tol": args.tol, "files": files})
    return EXIT_OK if res <= args.tol else EXIT_DOMAIN


# --------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    template = _load(args.template, "template")
    sigma = _load(args.sigma, "symmetry")
    if template.dim != sigma.dim:
        raise UsageError(f"dimension mismatch: template {template.dim} vs symmetry {sigma.dim}")
    sym = is_valid_symmetry(sigma)
    if not sym.valid:
        _report({"feasible": False, "reason": "invalid symmetry", "symmetry": sym.to_document()})
        return EXIT_DOMAIN
    try:
        sol = solve(template, sigma, args.tol)
    except InfeasibleError as exc:
        m, n, part = exc.worst_entry
        _report({"feasible": False, "residual": exc.residual, "tol": args.tol,
                 "worst_equation": exc.worst_equation,
                 "worst_entry": {"m": m, "n": n, "part": part}})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    files = []
    if args.out is not None:
        out = _outdir(args.out)
        model.save(sol.particular, out / "particular.json")
        basis = {"kind": "basis", "dim": template.dim, "n_free": sol.n_free,
                 "matrices": [model._matrix_to_json(b) for b in sol.basis]}
        (out / "basis.json").write_text(model._dump(basis) + "\n")
        files = ["particular.json", "basis.json"]
    _report({"feasible": True, "n_free": sol.n_free, "residual": sol.residual, "tol": args.tol,
             "files": files})
    return EXIT_OK


# --------------------------------------------------------------------------
# scan


def cmd_scan(args) -> int:
    try:
        grid = grid_range(args.start, args.stop, args.step)
        family = fourfold_family(args.family, args.L)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        result = scan(family, grid, workers=args.workers, chiral_tol=args.chiral_tol)
    except NonChiralFamilyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _write_csv(result.to_csv(), args.out)
    if args.summary is not None:
        summary = {"family": args.family, "L": args.L, "points": len(grid), "argmax": result.argmax()}
        Path(args.summary).write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    H = _load(args.hamiltonian, "hamiltonian")
    sigma = _load(args.sigma, "symmetry")
    _same_dim(H, sigma)
    try:
        sq = SqueezeParams(args.r, args.phi, args.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.evolve is not None and args.evolve < 0:
        raise UsageError("--evolve must be >= 0")
    if args.trace is not None and args.evolve is None:
        raise UsageError("--trace requires --evolve")
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    gen = generator(H, sigma.drain, sq)
    sym = is_valid_symmetry(sigma)
    predicted = predicted_steady_moments(sigma, sq) if sym.valid else None
    report = {"dim": H.dim, "drain": sigma.drain, "r": sq.r, "phi": sq.phi, "gamma": sq.gamma,
              "chiral_residual": chiral_residual(H, sigma), "symmetry_valid": sym.valid}
    try:
        if args.evolve is None:
            g = steady_moments(gen, args.tol)
            report.update(mode="steady", fixed_point_residual=gen.residual(g))
        else:
            g = evolve(model.GaussianMoments.vacuum(H.dim), gen, args.evolve)
            report.update(mode="evolve", t=args.evolve)
            if args.trace is not None:
                if predicted is None:
                    raise UsageError("--trace needs a valid symmetry matrix for the reference state")
                times = np.linspace(0.0, args.evolve, args.samples + 1)
                rows = distance_trace(model.GaussianMoments.vacuum(H.dim), gen, times, predicted)
                Path(args.trace).write_text(trace_csv(rows))
    except NonRelaxingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    report["distance_to_prediction"] = None if predicted is None else moment_distance(g, predicted)
    report["purity_deviation"] = purity_deviation(g)
    if args.out is not None:
        model.save(g, args.out)
    _report(report)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

_DESCRIPTION = """\
Chiral-symmetry toolkit for squeezed-reservoir lattices.

Model: a lattice Hamiltonian H (units of the hopping J) with one drain site n0
that is coupled at rate gamma to a squeezed reservoir whose jump operator is
cosh(r) a_n0 - exp(i phi) sinh(r) a_n0^dagger. A symmetric unitary sigma with
sigma[:, n0] = e_n0 and sigma^dagger H sigma = -H^* predicts the steady state
<a_n^dagger a_m> = sinh(r)^2 delta_mn, <a_m a_n> = exp(i phi) sinh(r) cosh(r) sigma[m, n].

Exit codes: 0 success, 1 domain failure, 2 usage error."""


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="chiral-reservoir", description=_DESCRIPTION,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    v = sub.add_parser("verify", formatter_class=fmt,
                       help="check that sigma is a valid chiral symmetry of H",
                       description="Check sigma (symmetric, unitary, fixes the drain) and the chiral "
                                   "residual max|sigma^dagger H sigma + H^*|. Exit 0 iff both pass.")
    v.add_argument("--hamiltonian", required=True, metavar="H.json", help="Hamiltonian document")
    v.add_argument("--sigma", required=True, metavar="S.json", help="symmetry matrix document")
    v.add_argument("--tol", type=float, default=SYMMETRY_TOL, help="bound on the chiral residual")
    v.add_argument("--symmetry-tol", type=float, default=SYMMETRY_TOL,
                   help="bound on the symmetric, unitary and drain deviations of sigma")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("build", formatter_class=fmt, help="write an exemplar lattice, H and sigma",
                       description="Write lattice.json, hamiltonian.json and sigma.json (plus flux.csv "
                                   "for the four-fold lattice) into --out.")
    bsub = b.add_subparsers(dest="geometry", required=True, metavar="GEOMETRY")
    f = bsub.add_parser("fourfold", formatter_class=fmt,
                        help="square lattice with four-fold rotation symmetry about the drain",
                        description="Square lattice -L..L in x and y, drain at the origin, uniform |J|, "
                                    "flux pi/2 on every outer plaquette, central fluxes summing to pi. "
                                    "--potential alternating:V sets V_n = (-1)^q_n V (q_n the quadrant); "
                                    "saddle:V sets V_n = V x y / L^2; omitted means V_n = 0.")
    f.add_argument("--L", type=int, required=True, help="half width; N = (2L+1)^2 sites")
    f.add_argument("--potential", type=_potential, default=None, metavar="KIND:V",
                   help="alternating:V or saddle:V in units of J")
    f.add_argument("--hopping", type=float, default=1.0, help="uniform hopping magnitude |J|")
    h = bsub.add_parser("herald", formatter_class=fmt,
                        help="heralding chain: sites -L..L, drain at 0",
                        description="Chain A (sites 1..L, potential V, hopping -J), heralding sites B "
                                    "(-1..-L, potentials 2J cos(pi m/(L+1)) - V), drain at 0. "
                                    "--coupling uniform:c sets H[0, -n] = -c; the drain-to-A couplings "
                                    "follow from the chain's sine transform.")
    h.add_argument("--L", type=int, required=True, help="chain length; N = 2L+1 sites")
    h.add_argument("--V", type=float, required=True, help="chain potential in units of J")
    h.add_argument("--J", type=float, default=1.0, help="chain hopping")
    h.add_argument("--coupling", type=_coupling, default=1.0, metavar="uniform:c",
                   help="drain-to-heralding-site coupling magnitude")
    for sp_ in (f, h):
        sp_.add_argument("--out", required=True, metavar="DIR", help="output directory")
        sp_.add_argument("--tol", type=float, default=SYMMETRY_TOL,
                         help="exit 1 if the chiral residual of the build exceeds this")
    b.set_defaults(func=cmd_build)

    s = sub.add_parser("solve", formatter_class=fmt, help="solve a Hamiltonian template for a given sigma",
                       description="Find every H compatible with the template that has sigma as a chiral "
                                   "symmetry: a particular solution plus an orthonormal basis of free "
                                   "directions. Writes particular.json and basis.json into --out.")
    s.add_argument("--template", required=True, metavar="T.json", help="template document")
    s.add_argument("--sigma", required=True, metavar="S.json", help="symmetry matrix document")
    s.add_argument("--out", default=None, metavar="DIR", help="output directory (report only if omitted)")
    s.add_argument("--tol", type=float, default=CONSTRAINT_TOL,
                   help="feasibility bound on the residual and relative rank cutoff")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("scan", formatter_class=fmt, help="dark-mode metrics along a potential family",
                       description="For each parameter p: min_i |psi_i(n0)| (weakest drain weight) and "
                                   "min_i (E_i+1 - E_i) (smallest level spacing) on the four-fold "
                                   "lattice. Families: alternating (V_n = (-1)^q_n p), saddle "
                                   "(V_n = p x y / L^2), constant (V = J/2 for every p). CSV columns "
                                   "param,min_drain_weight,min_gap.")
    c.add_argument("--family", required=True, choices=("alternating", "saddle", "constant"))
    c.add_argument("--from", dest="start", type=float, required=True, help="first parameter")
    c.add_argument("--to", dest="stop", type=float, required=True, help="last parameter (inclusive)")
    c.add_argument("--step", type=float, required=True, help="grid spacing")
    c.add_argument("--L", type=int, default=2, help="lattice half width")
    c.add_argument("--out", default=None, metavar="CSV", help="CSV path (stdout if omitted)")
    c.add_argument("--summary", default=None, metavar="JSON",
                   help="write per-metric argmax (combined = weight * spacing) here")
    c.add_argument("--workers", type=int, default=1, help="thread pool size")
    c.add_argument("--chiral-tol", type=float, default=SCAN_CHIRAL_TOL,
                   help="abort if a family member's chiral residual exceeds this")
    c.set_defaults(func=cmd_scan)

    m = sub.add_parser("simulate", formatter_class=fmt, help="second-moment dynamics with a squeezed drain",
                       description="Evolve or solve dN/dt = -(A N + N A^dagger) + gamma sinh(r)^2 E_00, "
                                   "dM/dt = -(A M + M A^T) + gamma exp(i phi) sinh(r) cosh(r) E_00 with "
                                   "A = iH + (gamma/2) P_n0, and compare with the predicted pure state. "
                                   "The drain n0 is taken from the sigma document.")
    m.add_argument("--hamiltonian", required=True, metavar="H.json", help="Hamiltonian document")
    m.add_argument("--sigma", required=True, metavar="S.json", help="symmetry matrix document")
    m.add_argument("--r", type=float, required=True, help="reservoir squeezing r")
    m.add_argument("--phi", type=float, default=0.0, help="reservoir squeezing angle phi")
    m.add_argument("--gamma", type=float, default=1.0, help="drain coupling rate gamma in units of J")
    mode = m.add_mutually_exclusive_group()
    mode.add_argument("--evolve", type=float, default=None, metavar="T", help="integrate from vacuum for time T")
    mode.add_argument("--steady", action="store_true", help="solve for the fixed point (the default)")
    m.add_argument("--trace", default=None, metavar="CSV",
                   help="with --evolve: write t,max_distance_to_prediction,purity_deviation")
    m.add_argument("--samples", type=int, default=100, help="trace intervals between 0 and T")
    m.add_argument("--out", default=None, metavar="JSON", help="write the final moments here")
    m.add_argument("--tol", type=float, default=FIXED_POINT_TOL, help="bound on the fixed-point residual")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(EXIT_USAGE, f"{parser.prog}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
