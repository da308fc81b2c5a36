"""Command-line front end.

Subcommands::

    curves      energy and heat capacity vs temperature (spin one-half)
    estimate    Gamma or Gibbs density matrix for a Hamiltonian
    dynamics    Schrodinger trajectory with invariant diagnostics
    crosscheck  Monte Carlo vs closed-form oracles

Exit codes: 0 success, 1 usage or input error, 2 numerical guard failure.
Outputs depend only on the flags, so identical invocations produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .ensembles import (
    McParams,
    canonical_density_matrix,
    canonical_partition,
    conventional_gibbs_dm,
    microcanonical_dm,
    phase_space_volume,
    simplex_exp_moment,
    simplex_populations,
)
from .errors import DegenerateSpectrumError, EstimationError, HamiltonianFormatError
from .flow import (
    eigen_phases,
    evolve_exact,
    evolve_numeric,
    exact_trajectory,
    fd_speed,
    max_circular_gap,
    overlap_invariants,
    path_length,
    phase_speed,
    torus_dispersion,
)
from .formats import json_text, read_hamiltonian, write_text
from .geometry import HermitianObservable, PureState, transition_probability
from .twostate import BlochCoords, gamma_populations, thermo_curves

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _levels(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.replace(" ", ",").split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}") from None
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("need at least two levels")
    return vals


def _add_hamiltonian(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--hamiltonian", metavar="PATH", help="Hamiltonian file (matrix or spectrum form)")
    g.add_argument("--levels", type=_levels, metavar="CSV", help="eigenvalues, e.g. --levels=-1,1")


def _add_mc(p):
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunks", type=int, default=1)
    p.add_argument("--shell", type=float, default=None, help="microcanonical shell width")
    p.add_argument("--bandwidth", type=float, default=None, help="kernel bandwidth")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gammaensemble", description="Gamma-ensembles on quantum phase space")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("curves", help="E(T) and C(T) for spin one-half, both ensembles")
    p.add_argument("--h", type=float, default=1.0, help="mu B")
    p.add_argument("--k", type=float, default=1.0, help="Boltzmann constant")
    p.add_argument("--tmin", type=float, default=0.02)
    p.add_argument("--tmax", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=250)
    p.add_argument("--log", action="store_true", help="log-spaced temperatures")
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="density matrix of an ensemble")
    _add_hamiltonian(p)
    p.add_argument("--ensemble", choices=["canonical", "microcanonical", "gibbs"], default="canonical")
    p.add_argument("--beta", type=float)
    p.add_argument("--energy", type=float)
    _add_mc(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("dynamics", help="trajectory and invariant report")
    _add_hamiltonian(p)
    p.add_argument("--theta", type=float, help="colatitude from the upper eigenstate (two-level only)")
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--state", help="initial amplitudes as space-separated re,im pairs")
    p.add_argument("--t", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="trajectory CSV")
    p.add_argument("--report", help="optional JSON copy of the summary")

    p = sub.add_parser("crosscheck", help="Monte Carlo against closed-form oracles")
    p.add_argument("--levels", type=_levels, required=True)
    p.add_argument("--beta", type=float, required=True)
    _add_mc(p)
    p.add_argument("--out", help="optional JSON report")
    return parser


def _hamiltonian(args) -> HermitianObservable:
    if args.levels is not None:
        return HermitianObservable.from_levels(args.levels)
    return read_hamiltonian(args.hamiltonian)


def _mc(args) -> McParams:
    for name in ("samples", "chunks"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name} must be positive")
    for name in ("shell", "bandwidth"):
        v = getattr(args, name)
        if v is not None and not v > 0:
            raise UsageError(f"--{name} must be positive")
    try:
        return McParams(args.samples, args.seed, args.chunks, args.shell, args.bandwidth)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _metadata(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "report") and v is not None}
    return {"program": "gammaensemble", "version": __version__, "arguments": params}


# -- subcommands ------------------------------------------------------------------


def cmd_curves(args) -> int:
    if not (args.tmin > 0 and args.tmax > args.tmin):
        raise UsageError("need 0 < --tmin < --tmax")
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    if not args.k > 0:
        raise UsageError("--k must be positive")
    if args.log:
        temps = np.geomspace(args.tmin, args.tmax, args.steps)
    else:
        temps = np.linspace(args.tmin, args.tmax, args.steps)
    write_text(args.out, thermo_curves(args.h, args.k, temps).to_csv())
    return EXIT_OK


def cmd_estimate(args) -> int:
    h = _hamiltonian(args)
    spec = h.spectrum
    out = {"command": "estimate", "ensemble": args.ensemble, "dim": h.dim,
           "levels": spec.eigenvalues.tolist()}

    if args.ensemble in ("canonical", "gibbs"):
        if args.beta is None:
            raise UsageError(f"--beta is required for the {args.ensemble} ensemble")
        out["beta"] = args.beta
    else:
        if args.energy is None:
            raise UsageError("--energy is required for the microcanonical ensemble")
        out["energy_level"] = args.energy

    if args.ensemble == "gibbs":
        dm = conventional_gibbs_dm(h, args.beta)
        shifted = np.exp(-args.beta * (spec.eigenvalues - spec.e_min))
        log_z = math.log(shifted.sum()) - args.beta * spec.e_min
        out["density_matrix"] = _pairs(dm.entries)
        out["populations"] = dm.populations(h).tolist()
        out["energy"] = {"value": dm.expectation(h), "std_error": 0.0}
        out["partition_function"] = {"value": math.exp(log_z), "std_error": 0.0}
    else:
        mc = _mc(args)
        if args.ensemble == "canonical":
            res = canonical_density_matrix(h, args.beta, mc)
            z = canonical_partition(h, args.beta, mc)
        else:
            res = microcanonical_dm(h, args.energy, mc)
            z = None
        out["density_matrix"] = _pairs(res.matrix.entries)
        out["populations"] = res.matrix.populations(h).tolist()
        out["estimate"] = res.estimate.to_dict()
        out["energy"] = res.energy.to_dict()
        if z is not None:
            out["partition_function"] = z.to_dict()
    out["metadata"] = _metadata(args)
    write_text(args.out, json_text(out))
    return EXIT_OK


def _pairs(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _initial_state(args, h: HermitianObservable) -> PureState:
    if args.state is not None:
        try:
            amps = [complex(*map(float, tok.split(","))) for tok in args.state.split()]
        except (TypeError, ValueError):
            raise UsageError("--state must be space-separated re,im pairs") from None
        if len(amps) != h.dim:
            raise UsageError(f"--state has {len(amps)} amplitudes, Hamiltonian has dimension {h.dim}")
        return PureState(np.array(amps))
    if args.theta is not None:
        if h.dim != 2:
            raise UsageError("--theta/--phi describe two-level states only")
        pole = h.spectrum.state(1)
        return BlochCoords(args.theta, args.phi).to_state(pole)
    return PureState(np.ones(h.dim))


def cmd_dynamics(args) -> int:
    if not args.t > 0 or not args.dt > 0:
        raise UsageError("--t and --dt must be positive")
    h = _hamiltonian(args)
    x0 = _initial_state(args, h)
    traj = evolve_numeric(h, x0, args.t, args.dt)
    energies = traj.energies(h)
    report = overlap_invariants(h, traj)

    probe_idx = np.linspace(0, len(traj) - 1, 21).astype(int)
    speed_residual = max(abs(phase_speed(h, traj[i]) - fd_speed(h, traj[i])) for i in probe_idx)

    length = path_length(traj)
    occupied = np.count_nonzero(report.initial > 1e-12)
    coverage = {}
    if occupied == 2 and h.dim == 2:
        phases = eigen_phases(h, exact_trajectory(h, x0, traj.times))
        coverage = {"max_phase_gap": max_circular_gap(phases[:, 0])}
    elif occupied == h.dim:
        phases = eigen_phases(h, exact_trajectory(h, x0, traj.times))
        coverage = {"torus_dispersion": torus_dispersion(phases, resolution=32 if phases.shape[1] == 2 else 8)}

    summary = {
        "dim": h.dim,
        "t": args.t,
        "dt": args.dt,
        "steps": len(traj) - 1,
        "max_energy_drift": float(np.max(np.abs(energies - energies[0]))),
        "max_overlap_drift": report.max_drift,
        "final_infidelity": 1.0 - transition_probability(traj.final, evolve_exact(h, x0, args.t)),
        "fs_speed_residual": speed_residual,
        "path_length": length,
        "stationary": bool(length < 1e-9),
        **coverage,
    }
    write_text(args.out, traj.to_csv(h))
    lines = [f"{k}: {v}" for k, v in summary.items()]
    if summary["stationary"]:
        lines.append("zero-length motion: initial state is stationary")
    print("\n".join(lines))
    if args.report:
        write_text(args.report, json_text(summary))
    return EXIT_OK


def cmd_crosscheck(args) -> int:
    levels = np.asarray(args.levels, dtype=float)
    if np.unique(levels).size != levels.size:
        raise DegenerateSpectrumError(
            f"levels {args.levels} are degenerate; the closed-form oracles need distinct levels"
        )
    mc = _mc(args)
    h = HermitianObservable.from_levels(levels)
    n = h.dim - 1
    vol = phase_space_volume(n)
    checks = []

    z = canonical_partition(h, args.beta, mc)
    checks.append(("Z/V", z.value / vol, simplex_exp_moment(levels, args.beta), z.std_error / vol))

    res = canonical_density_matrix(h, args.beta, mc)
    pops = simplex_populations(levels, args.beta)
    se = res.estimate.std_error.real.diagonal()
    raw = res.estimate.value.real.diagonal()
    for k in range(h.dim):
        checks.append((f"rho[{k},{k}]", raw[k], pops[k], se[k]))
    if h.dim == 2:
        e0, e1 = sorted(levels)
        g, e = gamma_populations(e0, e1, args.beta)
        two = (g, e) if levels[0] <= levels[1] else (e, g)
        for k in range(2):
            checks.append((f"rho[{k},{k}] two-level", raw[k], two[k], se[k]))

    ok = True
    rows = []
    print(f"{'quantity':<22}{'monte_carlo':>14}{'oracle':>14}{'std_error':>12}{'z':>9}")
    for name, mc_val, oracle, err in checks:
        zscore = (mc_val - oracle) / err if err > 0 else (0.0 if mc_val == oracle else math.inf)
        passed = bool(abs(zscore) <= 3.0)
        ok &= passed
        rows.append({"quantity": name, "monte_carlo": float(mc_val), "oracle": float(oracle),
                     "std_error": float(err), "z": float(zscore), "pass": passed})
        print(f"{name:<22}{mc_val:>14.7g}{oracle:>14.7g}{err:>12.3g}{zscore:>9.3f}  {'PASS' if passed else 'FAIL'}")
    print("PASS" if ok else "FAIL")
    if args.out:
        write_text(args.out, json_text({"command": "crosscheck", "checks": rows, "pass": ok,
                                        "metadata": _metadata(args)}))
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "curves": cmd_curves,
    "estimate": cmd_estimate,
    "dynamics": cmd_dynamics,
    "crosscheck": cmd_crosscheck,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (EstimationError, DegenerateSpectrumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, HamiltonianFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
