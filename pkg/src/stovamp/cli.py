"""Command-line experiment runner.

    stovamp run <config> [--key value ...]
    stovamp sweep <config> --seeds 0..9 [--jobs N] [--key value ...]
    stovamp rerun <trace.csv> [--output_dir DIR]

Each run writes ``trace.csv`` (config echo in its header), ``summary.txt``,
``plot_trace.py`` and, unless ``figures = false``, PNG figures.  Coded
diffraction runs also write the reconstruction as ``reconstruction.pgm``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .artifacts import FormatError, final_nmse_db, first_below, load_pgm, read_trace, write_pgm, write_trace
from .config import ExperimentConfig, load_config, parse_overrides, parse_pairs
from .core import ConfigError, NumericalError, StovampError
from .denoisers import GaussianPrior
from .experiment import Problem, cdp_problem, haar_problem, random_cdp_problem, solver_rng
from .metrics import TraceRecord, phase_alignment
from .report import render_images, render_nmse, write_plot_script
from .solver import SolverConfig, stochastic_vamp_run, vamp_run

log = logging.getLogger("stovamp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


@dataclass
class RunResult:
    config: ExperimentConfig
    problem: Problem
    records: list[TraceRecord]
    x_hat: np.ndarray
    elapsed_s: float
    paths: dict[str, Path] = field(default_factory=dict)

    @property
    def final_nmse_db(self) -> float:
        return final_nmse_db(self.records)

    @property
    def first_at_target(self) -> Optional[int]:
        return first_below(self.records, self.config.target_db)


def build_problem(cfg: ExperimentConfig) -> tuple[Problem, dict[str, str]]:
    prior = GaussianPrior(cfg.prior_variance)
    derived = {}
    if cfg.experiment == "haar":
        pb = haar_problem(cfg.n, cfg.alpha, cfg.L, cfg.snr_db, cfg.seed, prior)
    elif cfg.experiment == "cdp":
        x, shape = load_pgm(cfg.image)
        derived["image_sha256"] = hashlib.sha256(Path(cfg.image).read_bytes()).hexdigest()
        pb = cdp_problem(x.reshape(shape), cfg.L, cfg.snr_db, cfg.seed)
    else:
        pb = random_cdp_problem(cfg.height, cfg.width, cfg.L, cfg.snr_db, cfg.seed, prior)
    derived.update(block_rows=str(pb.block_rows), realized_alpha=repr(pb.realized_alpha),
                   noise_precision=repr(pb.channel.noise_precision))
    return pb, derived


def solver_config(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(iterations=cfg.iterations, damping=cfg.rho, schedule=cfg.schedule,
                        block_order=cfg.block_order, early_stop=cfg.early_stop,
                        tau_init=cfg.solver_tau_init(), negative_precision=cfg.negative_precision,
                        record_time=cfg.wall_clock)


def aligned_image(pb: Problem, x_hat: np.ndarray) -> np.ndarray:
    """Real part of the estimate after removing the global phase ambiguity."""
    theta = phase_alignment(pb.x, x_hat)
    return (np.exp(1j * theta) * x_hat).real.reshape(pb.shape)


def run_experiment(cfg: ExperimentConfig, render: bool = True) -> RunResult:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pb, derived = build_problem(cfg)
    solve = stochastic_vamp_run if cfg.solver == "stochastic" else vamp_run
    log.info("%s: %s solver, N=%d, L=%d, Mbar=%d, seed %d", cfg.experiment, cfg.solver, pb.n,
             len(pb.operators), pb.block_rows, cfg.seed)
    t0 = time.perf_counter()
    x_hat, records = solve(pb.x, pb.operators, pb.observations, GaussianPrior(cfg.prior_variance),
                           pb.channel, solver_config(cfg), solver_rng(cfg.seed))
    elapsed = time.perf_counter() - t0
    res = RunResult(cfg, pb, records, x_hat, elapsed)

    res.paths["trace"] = out / "trace.csv"
    write_trace(records, res.paths["trace"], echo=cfg.echo(), derived=derived)
    if pb.shape is not None and cfg.experiment == "cdp":
        res.paths["reconstruction"] = out / "reconstruction.pgm"
        write_pgm(res.paths["reconstruction"], aligned_image(pb, x_hat))
    res.paths["summary"] = out / "summary.txt"
    summary = {
        "final_nmse_db": repr(res.final_nmse_db),
        f"first_iteration_at_{cfg.target_db:g}_db": str(res.first_at_target),
        "iterations_run": str(records[-1].iteration + 1 if records else 0),
        "elapsed_s": f"{elapsed:.3f}",
        **derived,
    }
    res.paths["summary"].write_text("".join(f"{k} = {v}\n" for k, v in summary.items()))
    res.paths["plot_script"] = write_plot_script(out / "plot_trace.py")
    if render and cfg.figures:
        render_figures(res)
    log.info("final NMSE %.2f dB after %.2f s", res.final_nmse_db, elapsed)
    return res


def render_figures(res: RunResult):
    cfg, out = res.config, Path(res.config.output_dir)
    title = f"{cfg.experiment}, {cfg.solver}, L={cfg.L}, seed {cfg.seed}"
    res.paths["nmse_png"] = render_nmse({cfg.solver: res.records}, out / "nmse.png", cfg.target_db, title)
    if "reconstruction" in res.paths:
        truth = res.problem.x.real.reshape(res.problem.shape)
        res.paths["images_png"] = render_images(truth, aligned_image(res.problem, res.x_hat),
                                                out / "images.png", res.final_nmse_db)


def parse_seeds(text: str) -> list[int]:
    """``"0..9"`` (inclusive) or ``"1,4,7"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            seeds = list(range(int(a), int(b) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}; use a..b or a,b,c") from None
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"seed list {text!r} is empty or negative")
    return seeds


def run_sweep(cfg: ExperimentConfig, seeds: Sequence[int], jobs: int = 1) -> list[RunResult]:
    """One run per seed under ``<output_dir>/seed_<k>``; figures are drawn after all runs finish."""
    base = Path(cfg.output_dir)
    cfgs = [cfg.replace(seed=s, output_dir=str(base / f"seed_{s}")) for s in seeds]
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda c: run_experiment(c, render=False), cfgs))
    lines = ["seed,final_nmse_db,first_iteration_at_target,elapsed_s"]
    for r in results:
        first = "" if r.first_at_target is None else str(r.first_at_target)
        lines.append(f"{r.config.seed},{r.final_nmse_db:.17g},{first},{r.elapsed_s:.3f}")
    (base / "sweep.csv").write_text("\n".join(lines) + "\n")
    if cfg.figures:
        for r in results:
            render_figures(r)
        render_nmse({f"seed {r.config.seed}": r.records for r in results}, base / "sweep_nmse.png",
                    cfg.target_db, f"{cfg.experiment}, {cfg.solver}, {len(results)} seeds")
    reached = sum(r.first_at_target is not None for r in results)
    log.info("%d/%d seeds reached %g dB", reached, len(results), cfg.target_db)
    return results


def config_from_trace(path, output_dir: Optional[str] = None) -> ExperimentConfig:
    """Rebuild the configuration echoed in a trace header."""
    _, echo, derived = read_trace(path)
    values = parse_pairs(echo.items(), str(path))
    values["output_dir"] = output_dir or str(Path(path).parent / "rerun")
    cfg = ExperimentConfig(**values)
    want = derived.get("image_sha256")
    if want and cfg.experiment == "cdp":
        try:
            have = hashlib.sha256(Path(cfg.image).read_bytes()).hexdigest()
        except OSError as exc:
            raise ConfigError(f"cannot read image {cfg.image}: {exc}") from exc
        if have != want:
            raise ConfigError(f"image {cfg.image} does not match the hash recorded in {path}")
    return cfg


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stovamp", description="Stochastic VAMP phase retrieval experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment; any config key can be overridden with --key value")
    run.add_argument("config", help="flat key = value config file")
    sweep = sub.add_parser("sweep", help="run one experiment per seed")
    sweep.add_argument("config")
    sweep.add_argument("--seeds", required=True, help="a..b (inclusive) or a,b,c")
    sweep.add_argument("--jobs", type=int, default=1, help="seeds run concurrently on threads")
    rerun = sub.add_parser("rerun", help="repeat the run recorded in a trace header")
    rerun.add_argument("trace")
    rerun.add_argument("--output_dir", default=None)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = _parser()
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "rerun":
            if extra:
                raise ConfigError(f"rerun takes no overrides, got {extra}")
            res = run_experiment(config_from_trace(args.trace, args.output_dir))
            print(f"final_nmse_db = {res.final_nmse_db:.4f}  ({res.paths['trace']})")
        elif args.command == "run":
            res = run_experiment(load_config(args.config, extra))
            print(f"final_nmse_db = {res.final_nmse_db:.4f}  ({res.paths['trace']})")
        else:
            cfg = load_config(args.config, extra)
            results = run_sweep(cfg, parse_seeds(args.seeds), args.jobs)
            for r in results:
                print(f"seed {r.config.seed}: final_nmse_db = {r.final_nmse_db:.4f}, "
                      f"first at {cfg.target_db:g} dB = {r.first_at_target}")
    except NumericalError as exc:
        print(f"stovamp: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FormatError, StovampError, ValueError) as exc:
        print(f"stovamp: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
