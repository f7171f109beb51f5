"""Command-line front end: ingest a graph, run the pipelines, emit CSV/JSON.

Subcommands: gramian, flux, select-state, place, simulate, compare. Every run
writes a manifest.json recording the effective config and library versions;
solver failures exit nonzero after writing a structured error.json.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from ._util import as_vector
from .centrality import centrality_histogram, flux_sweep
from .errors import FluxControlError, InvalidInputError
from .gramian import reachability_gramian
from .graphio import load_dense_matrix, parse_edge_list, write_matrix_csv
from .linsys import InputSchematic, LinearSystem, laplacian_system, transition_matrix
from .placement import (
    GpgmConfig,
    gpgm_multistart,
    place_mean_optimal,
    ram_baseline,
)
from .select import (
    LinearGoal,
    RepulsionGoal,
    VarianceGoal,
    mean_goal,
    select_state,
)
from .trajectory import min_energy_controller, simulate

_MODES = ("raw-matrix", "adjacency", "laplacian")
_GOALS = ("mean", "repulsion", "variance")
_METHODS = ("flux", "gpgm", "ram")


def _comma_floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text!r}") from exc


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fluxcontrol",
        description="Minimum-energy control of network state distributions",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="graph or matrix file")
    common.add_argument("--mode", choices=_MODES, default="laplacian",
                        help="how to turn the input file into a dynamics matrix")
    common.add_argument("--undirected", action=argparse.BooleanOptionalAction,
                        default=True, help="mirror edge-list entries")
    common.add_argument("--t-star", type=_comma_floats, default=[1.0],
                        help="horizon(s), comma separated")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--config", help="JSON file whose keys override flags")

    goal = argparse.ArgumentParser(add_help=False)
    goal.add_argument("--goal", choices=_GOALS)
    goal.add_argument("--eta", type=float, default=1.0)
    goal.add_argument("--d", type=_comma_floats, help="repulsion target vector")
    goal.add_argument("--sense", choices=("expand", "contract"), default="expand")
    goal.add_argument("--x0", default="zeros",
                      help="'zeros', 'random', or comma-separated values")
    goal.add_argument("--x0-seed", type=int, default=0)

    sched = argparse.ArgumentParser(add_help=False)
    sched.add_argument("--b", help="input schematic CSV (default: identity)")
    sched.add_argument("--m", type=int, default=1, help="controller count")

    gpgm_args = argparse.ArgumentParser(add_help=False)
    gpgm_args.add_argument("--sigma", type=float, default=1e-2)
    gpgm_args.add_argument("--delta-star", type=float, default=1e-6)
    gpgm_args.add_argument("--epsilon", type=float, default=1e-6)
    gpgm_args.add_argument("--max-iters", type=int, default=10_000)
    gpgm_args.add_argument("--fd-step", type=float, default=1e-6)
    gpgm_args.add_argument("--seed", type=int, default=0, help="base RNG seed")
    gpgm_args.add_argument("--starts", type=int, default=5, help="multistart count")

    p = sub.add_parser("gramian", parents=[common, sched],
                       help="reachability Gramian of the system and schematic")
    p.set_defaults(func=_cmd_gramian)

    p = sub.add_parser("flux", parents=[common],
                       help="flux centrality sweep over horizons")
    p.add_argument("--hist", action="store_true",
                   help="also emit a Freedman-Diaconis histogram per horizon")
    p.set_defaults(func=_cmd_flux)

    p = sub.add_parser("select-state", parents=[common, sched, goal],
                       help="minimum-energy terminal state for a goal")
    p.set_defaults(func=_cmd_select_state)

    p = sub.add_parser("place", parents=[common, sched, goal, gpgm_args],
                       help="optimize the input schematic")
    p.add_argument("--method", choices=_METHODS, default="flux")
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("simulate", parents=[common, sched, goal, gpgm_args],
                       help="simulate the minimum-energy controlled trajectory")
    p.add_argument("--method", choices=_METHODS)
    p.add_argument("--steps", type=int, default=2000)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", parents=[common, sched, goal, gpgm_args],
                       help="optimized placement against a random-allocation ensemble")
    p.add_argument("--seeds", type=int, default=20, help="random-allocation ensemble size")
    p.set_defaults(func=_cmd_compare)
    return parser


def _apply_config_file(args):
    if not getattr(args, "config", None):
        return args
    overrides = json.loads(Path(args.config).read_text())
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise InvalidInputError(f"unknown config key {key!r}")
        if dest == "t_star" and not isinstance(value, list):
            value = [float(value)]
        setattr(args, dest, value)
    return args


def _config_dict(args):
    skip = {"func", "command", "config"}
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        cfg[key] = value
    cfg["command"] = args.command
    return cfg


def _build_system(args):
    if not args.input:
        raise InvalidInputError("--input is required for this command")
    if args.mode == "raw-matrix":
        a = load_dense_matrix(args.input)
        return LinearSystem(a, label=Path(args.input).stem), [
            str(i + 1) for i in range(a.shape[0])
        ]
    adj, labels = parse_edge_list(args.input, undirected=args.undirected)
    if args.mode == "adjacency":
        return LinearSystem(adj, label=Path(args.input).stem), labels
    return laplacian_system(adj, label=Path(args.input).stem), labels


def _build_schematic(args, system):
    if getattr(args, "b", None):
        return InputSchematic(load_dense_matrix(args.b))
    return InputSchematic.identity(system.n)


def _build_goal(args, n):
    if not getattr(args, "goal", None):
        return None
    if args.goal == "mean":
        return mean_goal(n, args.eta)
    if args.goal == "variance":
        return VarianceGoal(args.eta)
    if args.d is None:
        raise InvalidInputError("repulsion goal needs --d")
    return RepulsionGoal(d=np.asarray(args.d, dtype=float), eta=args.eta, sense=args.sense)


def _build_x0(args, n):
    raw = getattr(args, "x0", "zeros")
    if isinstance(raw, (list, tuple)):
        return as_vector(raw, n=n, name="x0")
    if raw == "zeros":
        return np.zeros(n)
    if raw == "random":
        return np.random.default_rng(args.x0_seed).standard_normal(n)
    return as_vector(_comma_floats(raw), n=n, name="x0")


def _gpgm_config(args):
    return GpgmConfig(
        sigma=args.sigma,
        delta_star=args.delta_star,
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        fd_step=args.fd_step,
        seed=args.seed,
    )


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _write_manifest(outdir, cfg):
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=_json_default)
    manifest = {
        "config": cfg,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "versions": {
            "fluxcontrol": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
    }
    _write_json(Path(outdir) / "manifest.json", manifest)


def _selection_payload(selection):
    multiplier = selection.multiplier
    return {
        "x_star": selection.x_star,
        # Exact-attainment corner cases carry an infinite shadow price, which
        # strict JSON cannot represent.
        "multiplier": multiplier if np.isfinite(multiplier) else None,
        "energy": selection.energy,
        "binding": selection.binding,
    }


def _placement_payload(result):
    return {
        "B": result.B_star.B,
        "energy": result.energy,
        "iterations": result.iterations,
        "converged": result.converged,
        "trace": result.energy_trace,
    }


def _cmd_gramian(args, outdir):
    system, _ = _build_system(args)
    schematic = _build_schematic(args, system)
    bundle = reachability_gramian(system, schematic, args.t_star[0])
    write_matrix_csv(outdir / "W.csv", bundle.W)
    _write_json(outdir / "gramian.json", {
        "t_star": bundle.t_star,
        "kappa": bundle.kappa,
        "lam_max": bundle.lam_max,
        "lam_min": bundle.lam_min,
        "n": bundle.n,
        "m": schematic.m,
    })


def _cmd_flux(args, outdir):
    system, labels = _build_system(args)
    profile = flux_sweep(system, sorted(args.t_star))
    profile.write_csv(outdir / "flux.csv", labels=labels)
    if args.hist:
        for idx, t in enumerate(profile.horizons):
            counts, edges = centrality_histogram(profile.phi[idx])
            rows = np.column_stack([edges[:-1], edges[1:], counts])
            header = f"bin_lo,bin_hi,count (t_star={t:g})"
            np.savetxt(outdir / f"flux_hist_{idx}.csv", rows,
                       delimiter=",", fmt="%.17g", header=header)


def _cmd_select_state(args, outdir):
    system, _ = _build_system(args)
    schematic = _build_schematic(args, system)
    goal = _build_goal(args, system.n)
    if goal is None:
        raise InvalidInputError("select-state needs --goal")
    t_star = args.t_star[0]
    x0 = _build_x0(args, system.n)
    bundle = reachability_gramian(system, schematic, t_star)
    z = transition_matrix(system, t_star) @ x0
    selection = select_state(bundle, z, goal)
    _write_json(outdir / "selection.json", _selection_payload(selection))


def _cmd_place(args, outdir):
    system, _ = _build_system(args)
    goal = _build_goal(args, system.n)
    t_star = args.t_star[0]
    x0 = _build_x0(args, system.n)
    if args.method == "flux":
        if goal is not None and not isinstance(goal, LinearGoal):
            raise InvalidInputError("flux placement applies to the mean goal only")
        threshold = goal.c if goal is not None else None
        result = place_mean_optimal(system, np.ones(system.n), t_star, args.m,
                                    x0=x0 if goal is not None else None,
                                    threshold=threshold)
        payload = _placement_payload(result)
    elif args.method == "gpgm":
        if goal is None:
            raise InvalidInputError("gpgm placement needs --goal")
        result = gpgm_multistart(system, x0, t_star, goal, args.m,
                                 config=_gpgm_config(args), n_starts=args.starts)
        payload = _placement_payload(result)
    else:
        schematic = ram_baseline(system.n, args.m, seed=args.seed, epsilon=args.epsilon)
        payload = {"B": schematic.B, "iterations": 0, "converged": True, "trace": []}
        if goal is not None:
            bundle = reachability_gramian(system, schematic, t_star)
            z = transition_matrix(system, t_star) @ _build_x0(args, system.n)
            payload["energy"] = select_state(bundle, z, goal).energy
        else:
            payload["energy"] = None
    write_matrix_csv(outdir / "B.csv", np.asarray(payload["B"], dtype=float))
    _write_json(outdir / "placement.json", payload)


def _resolve_simulation_schematic(args, system, goal, t_star, x0):
    if args.method == "flux":
        return place_mean_optimal(system, np.ones(system.n), t_star, args.m).B_star
    if args.method == "gpgm":
        if goal is None:
            raise InvalidInputError("gpgm placement needs --goal")
        return gpgm_multistart(system, x0, t_star, goal, args.m,
                               config=_gpgm_config(args), n_starts=args.starts).B_star
    if args.method == "ram":
        return ram_baseline(system.n, args.m, seed=args.seed, epsilon=args.epsilon)
    return _build_schematic(args, system)


def _cmd_simulate(args, outdir):
    system, _ = _build_system(args)
    goal = _build_goal(args, system.n)
    t_star = args.t_star[0]
    x0 = _build_x0(args, system.n)
    schematic = _resolve_simulation_schematic(args, system, goal, t_star, x0)
    summary = {"t_star": t_star, "steps": args.steps, "m": schematic.m}
    if goal is None:
        traj = simulate(system, schematic, lambda t: np.zeros(schematic.m),
                        x0, t_star, args.steps)
        summary["autonomous"] = True
    else:
        bundle = reachability_gramian(system, schematic, t_star)
        z = transition_matrix(system, t_star) @ x0
        selection = select_state(bundle, z, goal)
        controller = min_energy_controller(system, schematic, bundle, x0,
                                           selection.x_star, t_star)
        traj = simulate(system, schematic, controller, x0, t_star, args.steps)
        summary.update({
            "autonomous": False,
            "selection": _selection_payload(selection),
            "endpoint": traj.endpoint,
            "endpoint_error": float(np.linalg.norm(traj.endpoint - selection.x_star)),
            "energy_simulated": traj.total_energy,
            "energy_closed_form": selection.energy,
        })
    traj.write_csv(outdir / "trajectory.csv")
    _write_json(outdir / "simulate.json", summary)


def _cmd_compare(args, outdir):
    system, _ = _build_system(args)
    goal = _build_goal(args, system.n)
    if goal is None:
        raise InvalidInputError("compare needs --goal")
    t_star = args.t_star[0]
    x0 = _build_x0(args, system.n)
    z = transition_matrix(system, t_star) @ x0

    gpgm_result = gpgm_multistart(system, x0, t_star, goal, args.m,
                                  config=_gpgm_config(args), n_starts=args.starts)
    ram_energies = []
    for seed in range(args.seed, args.seed + args.seeds):
        schematic = ram_baseline(system.n, args.m, seed=seed, epsilon=args.epsilon)
        bundle = reachability_gramian(system, schematic, t_star)
        ram_energies.append(select_state(bundle, z, goal).energy)
    median_ram = float(np.median(ram_energies))

    with open(outdir / "compare.csv", "w") as fh:
        fh.write("method,seed,energy\n")
        fh.write(f"gpgm,{args.seed},{gpgm_result.energy:.17g}\n")
        for seed, energy in zip(range(args.seed, args.seed + args.seeds), ram_energies):
            fh.write(f"ram,{seed},{energy:.17g}\n")
    _write_json(outdir / "compare.json", {
        "gpgm_energy": gpgm_result.energy,
        "gpgm_iterations": gpgm_result.iterations,
        "gpgm_converged": gpgm_result.converged,
        "ram_energies": ram_energies,
        "ram_median": median_ram,
        "energy_ratio": gpgm_result.energy / median_ram if median_ram > 0 else None,
    })


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    outdir = None
    try:
        args = _apply_config_file(args)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        args.func(args, outdir)
        _write_manifest(outdir, _config_dict(args))
    except (FluxControlError, OSError, json.JSONDecodeError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        for extra in ("min_eta", "last_valid_time", "line_number"):
            if hasattr(exc, extra):
                payload[extra] = getattr(exc, extra)
        if outdir is not None and outdir.is_dir():
            _write_json(outdir / "error.json", payload)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
