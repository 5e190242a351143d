"""
app.py
Command-line entry point of fovregress. Every command is a batch step of a
reproducible experiment and writes plain, plot-ready files.

Commands:
- init-config: write a default experiment file with explicit seeds
- synth: generate a synthetic world (poses.csv, observations.fovr, pairs.jsonl)
- gt: binary ground truth from poses under the distance/heading rule
- train: train an encoder, writing checkpoints, loss_log.csv and run.json
- eval: evaluate a checkpoint, writing report.json
- curve: evaluate every snapshot of a run, writing curve.csv
- benchmark: compare losses over several seeds
- sweep: PCA / whitening dimension sweep
- plot: render curves, seed bands, loss logs, covariance matrices or sweeps to PNG

Exit codes: 0 success, 2 input or configuration error, 3 numeric or snapshot error.
"""

import functools
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import click
import pandas as pd

from fovregress import __version__
from fovregress.core.dataset.dataset import build_pairs, ground_truth_from_poses, psi_histogram
from fovregress.core.dataset.synthetic import generate_synthetic_world
from fovregress.core.evaluation.evaluate import EvalConfig, run_evaluation, target_psi
from fovregress.core.experiments.benchmark import aggregate_curves, compare_losses, pca_sweep
from fovregress.core.training.encoder import learning_rate
from fovregress.core.training.trainer import (
    Snapshot,
    curve_frame,
    evaluate_snapshots,
    train,
    write_csv,
)
from fovregress.data_io.fovr_io import attach_observations, write_fovr
from fovregress.data_io.model_io import (
    load_checkpoint,
    load_whitening,
    read_run_manifest,
    save_checkpoint,
    save_whitening,
    write_run_manifest,
)
from fovregress.data_io.pose_io import (
    read_ground_truth,
    read_pairs_jsonl,
    read_poses_csv,
    write_ground_truth,
    write_pairs_jsonl,
    write_poses_csv,
)
from fovregress.utils.config import ExperimentConfig, load_experiment_config
from fovregress.utils.exceptions import InputError, NumericError, SnapshotError
from fovregress.utils.utils import check_writable, setup_logging, write_json
from fovregress.visualization import plots

POSES_FILE = "poses.csv"
OBSERVATIONS_FILE = "observations.fovr"
PAIRS_FILE = "pairs.jsonl"
CURVE_METRICS = ["r_at_1", "r_at_5", "r_at_10", "mrr5", "kldiv"]


def handle_errors(command):
    """Map library errors onto the documented exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except InputError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(2)
        except NumericError as e:
            where = f" (iteration {e.iteration})" if e.iteration is not None else ""
            click.echo(f"Numeric error{where}: {e}", err=True)
            sys.exit(3)
        except SnapshotError as e:
            click.echo(f"Snapshot error (iteration {e.iteration}): {e}", err=True)
            sys.exit(3)

    return wrapper


def _config(path):
    return load_experiment_config(path) if path else ExperimentConfig.default()


def _load_dataset(data_dir):
    data_dir = Path(data_dir)
    ds = read_poses_csv(data_dir / POSES_FILE)
    return attach_observations(ds, data_dir / OBSERVATIONS_FILE)


def _write_table(frame, path, force):
    check_writable(path, force)
    write_csv(frame, path)
    logging.info(f"Wrote {len(frame)} rows to {path}")


@click.group()
@click.version_option(__version__, prog_name="fovregress")
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help="Logging verbosity.")
def cli(log_level):
    """Graded-similarity regression training and evaluation for place recognition."""
    setup_logging(log_level)


@cli.command("init-config")
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int, help="Value for every seed field.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def init_config(out, seed, force):
    """Write a default experiment configuration to OUT."""
    write_json(out, ExperimentConfig.default(seed).to_dict(), force=force)
    click.echo(f"Wrote {out}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="Experiment JSON file (defaults with seed 0 when omitted).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@handle_errors
def synth(config_path, out_dir, force):
    """Generate a synthetic world: poses.csv, observations.fovr and pairs.jsonl."""
    cfg = _config(config_path)
    out_dir = Path(out_dir)
    for name in (POSES_FILE, OBSERVATIONS_FILE, PAIRS_FILE):
        check_writable(out_dir / name, force)

    world = generate_synthetic_world(cfg.world.to_world_config())
    write_poses_csv(world, out_dir / POSES_FILE, force=True)
    ids, obs = world.observation_matrix()
    write_fovr(out_dir / OBSERVATIONS_FILE, ids, obs, force=True)

    # Pairs are labelled from the poses as written, so they match a re-read of poses.csv.
    reloaded = read_poses_csv(out_dir / POSES_FILE)
    pairs = build_pairs(reloaded, cfg.pairs.n_pairs, cfg.pairs.seed, include_queries=cfg.pairs.include_queries)
    write_pairs_jsonl(pairs, out_dir / PAIRS_FILE, force=True)

    counts, edges = psi_histogram(pairs)
    click.echo(f"map images: {len(world.map_ids)}, query images: {len(world.query_ids)}, "
               f"observation dim: {world.d_in}, pairs: {len(pairs)}")
    click.echo("psi histogram:")
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        click.echo(f"  [{lo:.1f}, {hi:.1f}{']' if hi == 1.0 else ')'} {int(c)}")


@cli.command()
@click.option("--poses", "poses_path", required=True, type=click.Path(dir_okay=False), help="poses.csv file.")
@click.option("--dist-m", default=25.0, show_default=True, type=float, help="Maximum camera distance (m).")
@click.option("--angle-deg", default=40.0, show_default=True, type=float,
              help="Heading difference bound (degrees, exclusive).")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output gt.json.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def gt(poses_path, dist_m, angle_deg, out, force):
    """Binary ground truth: query id -> positive map ids."""
    check_writable(out, force)
    ds = read_poses_csv(poses_path)
    relation = ground_truth_from_poses(ds, dist_m, math.radians(angle_deg))
    write_ground_truth(relation, out, force=True)
    n_with = sum(bool(v) for v in relation.values())
    click.echo(f"{n_with}/{len(relation)} queries have at least one positive")


@cli.command("train")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment JSON file.")
@click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False),
              help="Directory written by `synth`.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Run directory.")
@click.option("--loss", type=click.Choice(["mse", "cl", "gcl"]), help="Override the training loss.")
@click.option("--step-period", type=int, help="Iterations between learning-rate decays.")
@click.option("--lr", type=float, help="Initial learning rate.")
@click.option("--iterations", type=int, help="Override the number of iterations.")
@click.option("--force", is_flag=True, help="Overwrite an existing run.")
@handle_errors
def train_command(config_path, data_dir, out_dir, loss, step_period, lr, iterations, force):
    """Train an encoder on the pairs of a synthetic dataset."""
    cfg = _config(config_path)
    train_cfg = cfg.train.to_train_config(loss=loss, step_period=step_period, learning_rate=lr,
                                          total_iterations=iterations)
    out_dir = Path(out_dir)
    check_writable(out_dir / "run.json", force)

    ds = _load_dataset(data_dir)
    pairs = read_pairs_jsonl(Path(data_dir) / PAIRS_FILE)
    sgd = train_cfg.sgd
    if sgd.schedule == "constant":
        logging.info(f"Learning rate constant at {sgd.learning_rate} throughout")
    else:
        logging.info(f"Learning rate {sgd.learning_rate}, x{sgd.step_factor} every {sgd.step_period} iterations "
                     f"(final {learning_rate(sgd, train_cfg.total_iterations - 1):g})")

    run = train(ds, pairs, train_cfg, snapshot_dir=out_dir / "checkpoints")
    run.write_loss_log(out_dir / "loss_log.csv")
    save_checkpoint(run.model, out_dir / "checkpoint.json")
    write_run_manifest(out_dir, {
        "train": train_cfg.to_dict(),
        "snapshots": [
            {"iteration": s.iteration, "path": Path(s.path).relative_to(out_dir).as_posix()}
            for s in run.snapshots
        ],
        "final_loss": run.loss_log[-1][1],
    })
    click.echo(f"Trained {train_cfg.loss} encoder for {train_cfg.total_iterations} iterations; "
               f"{len(run.snapshots)} snapshots in {out_dir}")


def _eval_config(config_path, whiten, pca_dim, k_values, kl_target):
    if config_path:
        base = load_experiment_config(config_path).eval.to_eval_config(
            whiten=whiten or None, pca_dim=pca_dim, k_values=k_values or None)
    else:
        base = EvalConfig(k_values=tuple(k_values) or (1, 5, 10), whiten=whiten, pca_dim=pca_dim)
    if kl_target:
        base = replace(base, kl_target=kl_target)
    return base


_eval_options = [
    click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment JSON file."),
    click.option("--data", "data_dir", required=True, type=click.Path(file_okay=False),
                 help="Directory with poses.csv and observations.fovr."),
    click.option("--gt", "gt_path", required=True, type=click.Path(dir_okay=False), help="gt.json file."),
    click.option("--kl-target", type=click.Choice(["graded", "binary"]), help="Similarity used by the KL metric."),
]


def eval_options(command):
    for option in reversed(_eval_options):
        command = option(command)
    return command


@cli.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False),
              help="checkpoint.json file.")
@eval_options
@click.option("--whiten", is_flag=True, help="PCA-whiten descriptors (fitted on map descriptors).")
@click.option("--pca-dim", type=int, help="Reduce descriptors to this dimension with PCA.")
@click.option("--whitening", "whitening_path", type=click.Path(dir_okay=False),
              help="Apply a whitening.json written by an earlier eval instead of fitting one.")
@click.option("--k", "k_values", multiple=True, type=int, help="Recall cut-off (repeatable; default 1 5 10).")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output report.json.")
@click.option("--descriptors-out", type=click.Path(file_okay=False),
              help="Also write map.fovr and query.fovr descriptors here.")
@click.option("--covariance", "write_covariance", is_flag=True,
              help="Also write covariance.csv next to the report.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@handle_errors
def eval_command(checkpoint_path, config_path, data_dir, gt_path, kl_target, whiten, pca_dim, whitening_path, k_values,
                 out, descriptors_out, write_covariance, force):
    """Evaluate a checkpoint and write report.json."""
    check_writable(out, force)
    if whitening_path and (whiten or pca_dim is not None):
        raise InputError("--whitening cannot be combined with --whiten or --pca-dim")
    whitening = load_whitening(whitening_path) if whitening_path else None
    config = _eval_config(config_path, whiten, pca_dim, k_values, kl_target)
    model = load_checkpoint(checkpoint_path)
    ds = _load_dataset(data_dir)
    relation = read_ground_truth(gt_path)

    result = run_evaluation(model, ds, relation, config=config, whitening=whitening)
    doc = result.report.to_dict()
    doc["iteration"] = model.iteration
    doc["kl_target"] = config.kl_target
    write_json(out, doc, force=True)

    out_dir = Path(out).parent
    if result.whitening is not None and whitening is None:
        save_whitening(result.whitening, out_dir / "whitening.json", force=force)
    if write_covariance:
        path = out_dir / "covariance.csv"
        check_writable(path, force)
        pd.DataFrame(result.covariance).to_csv(path, index=False, header=False, lineterminator="\n")
    if descriptors_out:
        write_fovr(Path(descriptors_out) / "map.fovr", result.map_ids, result.map_descriptors, force=force)
        write_fovr(Path(descriptors_out) / "query.fovr", result.query_ids, result.query_descriptors, force=force)

    r = result.report
    click.echo(" ".join(f"R@{k}={v:.4f}" for k, v in sorted(r.r_at_k.items()))
               + f" MRR@5={r.mrr5:.4f} KL={r.kldiv:.6f} dim={r.dim}")


@cli.command()
@click.option("--run", "run_dir", required=True, type=click.Path(file_okay=False), help="Run directory of `train`.")
@eval_options
@click.option("--workers", default=1, show_default=True, type=int, help="Snapshots evaluated in parallel.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output curve.csv.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def curve(run_dir, config_path, data_dir, gt_path, kl_target, workers, out, force):
    """Evaluate every snapshot of a run and write curve.csv."""
    check_writable(out, force)
    manifest = read_run_manifest(run_dir)
    snapshots = [Snapshot(int(s["iteration"]), path=Path(run_dir) / s["path"]) for s in manifest["snapshots"]]
    ds = _load_dataset(data_dir)
    relation = read_ground_truth(gt_path)
    config = _eval_config(config_path, False, None, (1, 5, 10), kl_target)

    points = evaluate_snapshots(snapshots, ds, relation, workers=workers, config=config)
    _write_table(curve_frame(points), out, force=True)
    click.echo(f"{len(points)} snapshots evaluated")


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Experiment JSON file.")
@click.option("--seed", "seeds", multiple=True, type=int, help="Seed to run (repeatable; default 0..4).")
@click.option("--loss", "losses", multiple=True, type=click.Choice(["mse", "cl", "gcl"]),
              help="Loss to compare (repeatable; default all).")
@click.option("--iterations", type=int, help="Override the number of iterations.")
@click.option("--workers", default=1, show_default=True, type=int, help="Snapshots evaluated in parallel.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--force", is_flag=True, help="Overwrite existing outputs.")
@handle_errors
def benchmark(config_path, seeds, losses, iterations, workers, out_dir, force):
    """Compare MSE, GCL and CL training on the synthetic benchmark."""
    cfg = _config(config_path)
    seeds = seeds or (0, 1, 2, 3, 4)
    losses = losses or ("mse", "gcl", "cl")
    out_dir = Path(out_dir)
    check_writable(out_dir / "benchmark.csv", force)

    result = compare_losses(cfg, seeds, losses, total_iterations=iterations, workers=workers)
    _write_table(result.table, out_dir / "benchmark.csv", force=True)
    for loss, frames in result.curves.items():
        _write_table(pd.concat(frames, ignore_index=True), out_dir / f"curves_{loss}.csv", force=True)
        _write_table(aggregate_curves(frames), out_dir / f"curves_{loss}_agg.csv", force=True)
    click.echo(result.summary().to_string())


@cli.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(dir_okay=False),
              help="checkpoint.json file.")
@eval_options
@click.option("--dim", "dims", multiple=True, type=int, required=True, help="Reduced dimension (repeatable).")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output pca_sweep.csv.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def sweep(checkpoint_path, config_path, data_dir, gt_path, kl_target, dims, out, force):
    """Retrieval quality at several PCA dimensions, with and without whitening."""
    check_writable(out, force)
    model = load_checkpoint(checkpoint_path)
    ds = _load_dataset(data_dir)
    relation = read_ground_truth(gt_path)
    config = _eval_config(config_path, False, None, (), kl_target)
    table = pca_sweep(model, ds, relation, sorted(set(dims)), config, psi=target_psi(ds, relation, config))
    _write_table(table, out, force=True)


@cli.group()
def plot():
    """Render CSV outputs as PNG figures."""


@plot.command("curves")
@click.argument("curve_files", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--metric", default="r_at_5", show_default=True, type=click.Choice(CURVE_METRICS))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def plot_curves_command(curve_files, metric, out, force):
    """Plot curve.csv files (labelled by file name) against iteration."""
    check_writable(out, force)
    curves = {Path(p).stem: _read_csv(p) for p in curve_files}
    fig, ax = plots.new_axes()
    plots.plot_curves(ax, curves, metric)
    plots.save_figure(fig, out)


@plot.command("bands")
@click.argument("agg_files", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--metric", default="r_at_5", show_default=True, type=click.Choice(CURVE_METRICS))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def plot_bands_command(agg_files, metric, out, force):
    """Plot the seed-aggregated curves written by `benchmark` as mean lines with min/max bands."""
    check_writable(out, force)
    fig, ax = plots.new_axes()
    for path in agg_files:
        label = Path(path).stem.removeprefix("curves_").removesuffix("_agg")
        plots.plot_curve_band(ax, _read_csv(path), metric, label=label)
    plots.save_figure(fig, out)


@plot.command("loss")
@click.argument("loss_file", type=click.Path(dir_okay=False))
@click.option("--window", default=100, show_default=True, type=int, help="Moving-average window.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def plot_loss_command(loss_file, window, out, force):
    """Smoothed training loss from a run's loss_log.csv."""
    check_writable(out, force)
    fig, ax = plots.new_axes()
    plots.plot_loss_log(ax, _read_csv(loss_file), window)
    plots.save_figure(fig, out)


@plot.command("covariance")
@click.argument("covariance_file", type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def plot_covariance_command(covariance_file, out, force):
    """Heat map of a covariance.csv written by `eval --covariance`."""
    check_writable(out, force)
    cov = _read_csv(covariance_file, header=None).to_numpy(dtype=float)
    fig, ax = plots.new_axes(figsize=(5.5, 4.5))
    fig.colorbar(plots.plot_covariance(ax, cov), ax=ax)
    plots.save_figure(fig, out)


@plot.command("sweep")
@click.argument("sweep_file", type=click.Path(dir_okay=False))
@click.option("--metric", default="r_at_5", show_default=True, type=click.Choice(CURVE_METRICS))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output PNG.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@handle_errors
def plot_sweep_command(sweep_file, metric, out, force):
    """Plot a pca_sweep.csv written by `sweep`."""
    check_writable(out, force)
    fig, ax = plots.new_axes(figsize=(6, 4.5))
    plots.plot_pca_sweep(ax, _read_csv(sweep_file), metric)
    plots.save_figure(fig, out)


def _read_csv(path, **kwargs):
    if not Path(path).exists():
        raise InputError(f"File not found: {path}")
    return pd.read_csv(path, **kwargs)


def main() -> int:
    """Entry point used by the console script."""
    return cli(prog_name="fovregress")


if __name__ == "__main__":
    main()
