"""``vorstab`` command line: eigenproblems, elliptic solves, simulations,
energy ascents and the experiment suite.

Every command writes into ``--out``, logs JSON lines to ``<out>/logs/run.log``
and finishes by writing ``manifest.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path

from vorstab import __version__
from vorstab.config import THREADS_ENV, load_json
from vorstab.elliptic import (
    MEAN_ATOL,
    SOLVE_RTOL,
    boundary_flux,
    build_context,
    kinetic_energy,
    stream_function,
)
from vorstab.errors import (
    AscentError,
    ConfigError,
    GridError,
    SimulationError,
    SolverError,
    VorstabError,
)
from vorstab.euler import SimConfig, run, save_series
from vorstab.experiments import EXPERIMENTS, ExperimentSpec, run_experiment
from vorstab.grid import make_grid
from vorstab.logging import configure_structlog, get_logger
from vorstab.rearrangement import burton_ascent
from vorstab.spectra import (
    SpectraConfig,
    cap_spectrum,
    constrained_spectrum,
    dirichlet_spectrum,
)
from vorstab.storage import OutputConfig, RunManifest, read_field, write_field
from vorstab.storage.paths import REPORT_NAME, SUMMARY_NAME

logger = get_logger(component="cli")

SPECTRA = {
    "dirichlet": dirichlet_spectrum,
    "cap": cap_spectrum,
    "constrained": constrained_spectrum,
}


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors exit with status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _circulation(gamma: list[float], n_inner: int) -> list[float]:
    """Circulations from the command line; a disk accepts only zeros."""
    if not n_inner:
        if any(gamma):
            raise ConfigError(f"a disk carries no circulation, got {gamma}")
        return []
    return gamma or [0.0] * n_inner


def _record(manifest: RunManifest, paths: Iterable[str | Path]) -> None:
    for path in paths:
        manifest.add_output(path)


def cmd_eig(args: argparse.Namespace, manifest: RunManifest) -> int:
    a = 0.0 if args.domain == "disk" else args.a
    grid = make_grid(a, args.nr, args.ntheta)
    manifest.grid = grid.params()
    config = SpectraConfig(cluster_rtol=args.cluster_rtol)
    manifest.tolerances.update(config.to_dict())
    ctx = build_context(grid)
    result = SPECTRA[args.which](ctx, args.count, config)
    _record(manifest, result.save(args.out))
    for value in result.eigenvalues:
        print(f"{value:.12g}")
    return 0


def cmd_solve(args: argparse.Namespace, manifest: RunManifest) -> int:
    v = read_field(args.field)
    grid = v.grid
    manifest.grid = grid.params()
    ctx = build_context(grid)
    gamma = _circulation(args.gamma, grid.n_inner)
    solution = stream_function(ctx, v, gamma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    psi_path = write_field(solution.psi, out / "psi.csv")
    summary = {
        "gamma": list(gamma),
        "energy": kinetic_energy(ctx, v, gamma),
        "traces": solution.traces.tolist(),
        "offset": solution.offset,
        "fluxes": [
            boundary_flux(ctx, solution.psi, i) for i in range(1 + grid.n_inner)
        ],
    }
    summary_path = out / SUMMARY_NAME
    summary_path.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    _record(manifest, [psi_path, summary_path])
    return 0


def cmd_simulate(args: argparse.Namespace, manifest: RunManifest) -> int:
    config = SimConfig.from_json(args.config)
    manifest.add_config(args.config)
    manifest.grid = config.grid().params()
    series = run(config, out_dir=args.out)
    _record(manifest, save_series(series, args.out, config))
    return 0


def cmd_ascend(args: argparse.Namespace, manifest: RunManifest) -> int:
    seed = read_field(args.seed)
    manifest.grid = seed.grid.params()
    manifest.tolerances["class_tol"] = args.class_tol
    ctx = build_context(seed.grid)
    report = burton_ascent(
        ctx,
        seed,
        _circulation(args.gamma, seed.grid.n_inner),
        max_iters=args.max_iters,
        class_tol=args.class_tol,
    )
    _record(manifest, report.save(args.out))
    return 0


def cmd_experiment(args: argparse.Namespace, manifest: RunManifest) -> int:
    if args.config:
        data = load_json(args.config)
        name = data.setdefault("name", args.name)
        if name != args.name:
            raise ConfigError(
                f"config {args.config} is for experiment {name!r}, not {args.name!r}"
            )
        spec = ExperimentSpec.from_dict(data)
        manifest.add_config(args.config)
    else:
        spec = ExperimentSpec(name=args.name)
    manifest.grid = {"nr": spec.nr, "ntheta": spec.ntheta}
    manifest.tolerances.update(spec.thresholds())
    report = run_experiment(args.name, spec, args.out)
    _record(manifest, [Path(args.out) / name for name in [*report.files, REPORT_NAME]])
    for criterion in report.criteria:
        logger.info(
            "experiment_verdict",
            criterion=criterion.name,
            verdict=criterion.verdict,
            evidence=criterion.evidence,
        )
    print(report.verdict)
    return report.exit_code


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="vorstab",
        description="Stability experiments for steady planar Euler flows.",
        epilog=f"{THREADS_ENV} caps the number of worker threads.",
    )
    parser.add_argument("--version", action="version", version=f"vorstab {__version__}")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    eig = sub.add_parser("eig", help="eigenvalues and eigenfields")
    eig.add_argument("--domain", choices=("disk", "annulus"), required=True)
    eig.add_argument("--a", type=float, default=0.5, help="inner radius of the annulus")
    eig.add_argument("--nr", type=int, required=True)
    eig.add_argument("--ntheta", type=int, required=True)
    eig.add_argument("--count", type=int, default=1)
    eig.add_argument("--which", choices=tuple(SPECTRA), default="constrained")
    eig.add_argument("--cluster-rtol", type=float, default=SpectraConfig().cluster_rtol)
    eig.add_argument("--out", required=True)
    eig.set_defaults(handler=cmd_eig)

    solve = sub.add_parser("solve", help="stream function of a vorticity field")
    solve.add_argument("--field", required=True)
    solve.add_argument("--gamma", type=float, nargs="*", default=[])
    solve.add_argument("--out", required=True)
    solve.set_defaults(handler=cmd_solve)

    simulate = sub.add_parser("simulate", help="integrate the Euler equations")
    simulate.add_argument("--config", required=True)
    simulate.add_argument("--out", required=True)
    simulate.set_defaults(handler=cmd_simulate)

    ascend = sub.add_parser("ascend", help="energy ascent over a rearrangement class")
    ascend.add_argument("--seed", required=True)
    ascend.add_argument("--gamma", type=float, nargs="*", default=[])
    ascend.add_argument("--max-iters", type=int, default=500)
    ascend.add_argument("--class-tol", type=float, default=1e-10)
    ascend.add_argument("--out", required=True)
    ascend.set_defaults(handler=cmd_ascend)

    experiment = sub.add_parser("experiment", help="run one experiment of the suite")
    experiment.add_argument("name", choices=tuple(EXPERIMENTS))
    experiment.add_argument("--config")
    experiment.add_argument("--out", required=True)
    experiment.set_defaults(handler=cmd_experiment)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, SimulationError):
        return 5
    if isinstance(exc, (SolverError, AscentError)):
        return 4
    return 1


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    output = OutputConfig(base_path=args.out)
    configure_structlog(args.log_level, output.log_path())
    handler: Callable[[argparse.Namespace, RunManifest], int] = args.handler
    manifest = RunManifest(
        out_dir=output.resolve_base(),
        command=["vorstab", *(sys.argv[1:] if argv is None else argv)],
        tolerances={"solve_rtol": SOLVE_RTOL, "mean_atol": MEAN_ATOL},
    )
    started = time.perf_counter()
    try:
        code = handler(args, manifest)
    except (ConfigError, GridError, FileNotFoundError) as exc:
        logger.error("command_failed", command=args.command, error=str(exc))
        print(f"vorstab: error: {exc}", file=sys.stderr)
        return 1
    except VorstabError as exc:
        logger.error("command_failed", command=args.command, error=str(exc))
        print(f"vorstab: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    manifest.wall_time = time.perf_counter() - started
    path = manifest.save()
    logger.info("manifest_written", path=str(path), outputs=len(manifest.outputs))
    return code


if __name__ == "__main__":
    sys.exit(main())
