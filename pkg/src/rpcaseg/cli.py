"""Command-line interface: segment, sweep, eval, and synth subcommands.

Exit codes: 0 on success, 1 on pipeline failures (with the failing stage
named on stderr), 2 on flag errors. Every flag can also be set through an
environment variable prefixed ``RPCASEG_``.
"""

from __future__ import annotations

import csv
import json
import os
from contextlib import contextmanager

import click
import numpy as np

from . import imgio
from .errors import RpcasegError
from .evaluation import report, report_as_dict, report_csv_rows
from .experiments import (
    ExperimentKind,
    group_sequences,
    load_group,
    parse_beta_grid,
    run_sweep,
    segment_frames,
    synth_generate,
)
from .postprocess import PostprocessConfig
from .preprocess import DEFAULT_SIGMA
from .rpca import Algorithm, SolverConfig

_EXPERIMENTS = {
    "1": ExperimentKind.DAYS_ONLY,
    "2": ExperimentKind.NIGHTS_ONLY,
    "3": ExperimentKind.MIXED_TWO_PIPELINES,
    "4": ExperimentKind.MIXED_ONE_PIPELINE,
}


@contextmanager
def _stage(name: str):
    """Convert library errors into exit-1 diagnostics naming the stage."""
    try:
        yield
    except RpcasegError as exc:
        raise click.ClickException(f"{name}: {exc}") from exc


def _check_beta(ctx, param, value):
    if value is None:
        return None
    if not 0.0 <= value <= 1.0:
        raise click.BadParameter(f"beta must be in [0, 1], got {value}")
    return value


def _parse_lambda(ctx, param, value):
    if value is None or value == "auto":
        return None
    try:
        lam = float(value)
    except ValueError:
        raise click.BadParameter(f"lambda must be 'auto' or a float, got {value!r}")
    if lam <= 0:
        raise click.BadParameter(f"lambda must be > 0, got {lam}")
    return lam


def _parse_size(ctx, param, value):
    if value is None:
        return None
    try:
        w, h = value.lower().split("x")
        size = (int(w), int(h))
    except ValueError:
        raise click.BadParameter(f"size must be WIDTHxHEIGHT, got {value!r}")
    if size[0] <= 0 or size[1] <= 0:
        raise click.BadParameter(f"size dimensions must be positive, got {value!r}")
    return size


def _parse_pre(ctx, param, values):
    choices = {"equalize", "gaussian", "none"}
    out = {}
    for spec in values:
        try:
            kind, pipeline = spec.split("=")
        except ValueError:
            raise click.BadParameter(f"--pre expects kind=pipeline, got {spec!r}")
        if kind not in ("day", "night") or pipeline not in choices:
            raise click.BadParameter(
                f"--pre expects day|night = equalize|gaussian|none, got {spec!r}"
            )
        out[kind] = pipeline
    return out


def _parse_beta_grid_opt(ctx, param, value):
    try:
        return parse_beta_grid(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _solver_options(fn):
    fn = click.option(
        "--solver",
        type=click.Choice([a.value for a in Algorithm]),
        default=Algorithm.IALM.value,
        show_default=True,
        help="Decomposition algorithm.",
    )(fn)
    fn = click.option(
        "--lambda", "lam", callback=_parse_lambda, default="auto", show_default=True,
        help="Sparsity weight, or 'auto' for 1/sqrt(max(p,n)).",
    )(fn)
    fn = click.option("--tol", type=float, default=1e-7, show_default=True)(fn)
    fn = click.option("--max-iter", type=int, default=1000, show_default=True)(fn)
    fn = click.option(
        "--rank-guess", type=int, default=5, show_default=True,
        help="Initial rank for the partial-SVD solver.",
    )(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    return fn


def _pipeline_options(fn):
    fn = click.option(
        "--pre", "pre_map", multiple=True, callback=_parse_pre,
        metavar="KIND=PIPELINE",
        help="Override pre-processing, e.g. --pre day=equalize --pre night=none.",
    )(fn)
    fn = click.option("--sigma", type=float, default=DEFAULT_SIGMA, show_default=True,
                      help="Gaussian pre-filter width.")(fn)
    fn = click.option("--size", callback=_parse_size, default=None,
                      metavar="WxH",
                      help="Working resolution (default: source size / 8).")(fn)
    return fn


def _post_options(fn):
    fn = click.option("--hard-threshold", type=float, default=0.15,
                      show_default=True)(fn)
    fn = click.option("--open-radius", type=int, default=2, show_default=True)(fn)
    fn = click.option("--close-radius", type=int, default=4, show_default=True)(fn)
    fn = click.option("--min-area", type=int, default=50, show_default=True)(fn)
    fn = click.option("--contour-iters", type=int, default=50, show_default=True)(fn)
    fn = click.option("--balloon", type=float, default=0.3, show_default=True)(fn)
    return fn


def _solver_config(solver, lam, tol, max_iter, rank_guess, seed) -> SolverConfig:
    try:
        return SolverConfig(
            algorithm=Algorithm(solver),
            lam=lam,
            tolerance=tol,
            max_iterations=max_iter,
            partial_rank_guess=rank_guess,
            seed=seed,
        )
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _post_config(hard_threshold, open_radius, close_radius, min_area,
                 contour_iters, balloon) -> PostprocessConfig:
    try:
        return PostprocessConfig(
            hard_threshold=hard_threshold,
            opening_radius=open_radius,
            closing_radius=close_radius,
            min_component_area=min_area,
            contour_iterations=contour_iters,
            balloon=balloon,
        )
    except (RpcasegError, ValueError) as exc:
        raise click.BadParameter(str(exc))


def _default_size(path: str) -> tuple[int, int]:
    from PIL import Image

    with Image.open(path) as img:
        w, h = img.size
    return max(1, round(w / 8)), max(1, round(h / 8))


def _config_echo(**kwargs) -> dict:
    echo = {}
    for key, value in kwargs.items():
        if hasattr(value, "value"):
            value = value.value
        echo[key] = value
    return echo


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_csv(rows: list[list], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)


@click.group()
def cli():
    """Background subtraction via low-rank plus sparse decomposition."""


@cli.command()
@click.option("--manifest", required=True, type=click.Path(), help="Sequence manifest.")
@click.option("--beta", type=float, default=0.5, show_default=True,
              callback=_check_beta, help="Texture-layer weight in [0, 1].")
@_solver_options
@_pipeline_options
@_post_options
@click.option("--out", required=True, type=click.Path(), help="Mask output directory.")
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Write the solver convergence trace as CSV.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write a JSON report (with scores when GT is present).")
def segment(manifest, beta, solver, lam, tol, max_iter, rank_guess, seed,
            pre_map, sigma, size, hard_threshold, open_radius, close_radius,
            min_area, contour_iters, balloon, out, trace_path, report_path):
    """Segment one sequence and write a PNG mask per frame."""
    solver_cfg = _solver_config(solver, lam, tol, max_iter, rank_guess, seed)
    post_cfg = _post_config(hard_threshold, open_radius, close_radius,
                            min_area, contour_iters, balloon)
    with _stage("load-manifest"):
        seq = imgio.load_manifest(manifest)
    if size is None:
        with _stage("load-frames"):
            size = _default_size(seq.frames[0].image_path)
    kind_exp = (
        ExperimentKind.DAYS_ONLY
        if seq.kind is imgio.SequenceKind.DAY
        else ExperimentKind.NIGHTS_ONLY
    )
    groups = group_sequences([seq], kind_exp)
    with _stage("load-frames"):
        grp = load_group(groups[0], size, kind_exp,
                         pre_day=pre_map.get("day"), pre_night=pre_map.get("night"))
    with _stage("segment"):
        seg = segment_frames(grp.images, grp.pipelines, beta, solver_cfg,
                             post_cfg, sigma)

    os.makedirs(out, exist_ok=True)
    names = []
    with _stage("write-masks"):
        for frame_id, mask in zip(grp.ids, seg.masks):
            name = f"{frame_id}.png"
            if name in names:
                raise RpcasegError(f"duplicate frame stem {frame_id!r}")
            names.append(name)
            imgio.save_mask(mask, os.path.join(out, name))

    if trace_path:
        rows = [["iteration", "residual", "rank_estimate", "nnz_sparse"]]
        rows += [[t.iteration, t.residual, t.rank_estimate, t.nnz_sparse]
                 for t in seg.decomposition.trace]
        _write_csv(rows, trace_path)

    config = _config_echo(
        manifest=manifest, beta=beta, solver=solver,
        **{"lambda": "auto" if lam is None else lam},
        tol=tol, max_iter=max_iter, rank_guess=rank_guess, seed=seed,
        pre=dict(pre_map), sigma=sigma, size=list(size),
        hard_threshold=hard_threshold, open_radius=open_radius,
        close_radius=close_radius, min_area=min_area,
        contour_iters=contour_iters, balloon=balloon,
    )
    if report_path:
        doc = {
            "config": config,
            "converged": seg.decomposition.converged,
            "iterations": seg.decomposition.iterations_used,
            "final_residual": seg.decomposition.final_residual,
            "masks": names,
        }
        if any(g is not None for g in grp.gts):
            with _stage("evaluate"):
                rep = report(list(zip(seg.masks, grp.gts, grp.ids)), config)
            doc["evaluation"] = report_as_dict(rep)
        _write_json(doc, report_path)
    click.echo(f"wrote {len(names)} masks to {out}"
               + ("" if seg.decomposition.converged else " (solver did not converge)"))


@cli.command()
@click.option("--experiment", type=click.Choice(sorted(_EXPERIMENTS)), required=True,
              help="1=days, 2=nights, 3=mixed/two pipelines, 4=mixed/one pipeline.")
@click.option("--manifest-dir", required=True, type=click.Path(),
              help="Directory of sequence manifests (*.json).")
@click.option("--beta-grid", default="0:0.05:1", show_default=True,
              callback=_parse_beta_grid_opt, help="Grid as start:step:end.")
@_solver_options
@_pipeline_options
@_post_options
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel (group, beta) work items.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the sweep report as JSON.")
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="Write the sweep rows as CSV.")
def sweep(experiment, manifest_dir, beta_grid, solver, lam, tol, max_iter,
          rank_guess, seed, pre_map, sigma, size, hard_threshold, open_radius,
          close_radius, min_area, contour_iters, balloon, jobs, out_path,
          csv_path):
    """Run a beta sweep over grouped sequences and tabulate f-measures."""
    solver_cfg = _solver_config(solver, lam, tol, max_iter, rank_guess, seed)
    post_cfg = _post_config(hard_threshold, open_radius, close_radius,
                            min_area, contour_iters, balloon)
    kind = _EXPERIMENTS[experiment]
    with _stage("load-manifests"):
        paths = sorted(
            os.path.join(manifest_dir, p)
            for p in os.listdir(manifest_dir)
            if p.endswith(".json")
        )
        if not paths:
            raise RpcasegError(f"no manifests found in {manifest_dir}")
        manifests = [imgio.load_manifest(p) for p in paths]
    with _stage("group"):
        groups = group_sequences(manifests, kind)
    if size is None:
        with _stage("load-frames"):
            size = _default_size(groups[0].frames[0].entry.image_path)
    with _stage("sweep"):
        result = run_sweep(
            groups, solver_cfg, beta_grid, post_cfg,
            experiment=kind, working_size=size, sigma=sigma,
            pre_day=pre_map.get("day"), pre_night=pre_map.get("night"),
            jobs=jobs,
        )

    config = _config_echo(
        experiment=experiment, manifest_dir=manifest_dir,
        beta_grid=list(beta_grid), solver=solver,
        **{"lambda": "auto" if lam is None else lam},
        tol=tol, max_iter=max_iter, rank_guess=rank_guess, seed=seed,
        pre=dict(pre_map), sigma=sigma, size=list(size),
        hard_threshold=hard_threshold, open_radius=open_radius,
        close_radius=close_radius, min_area=min_area,
        contour_iters=contour_iters, balloon=balloon, jobs=jobs,
    )
    best = result.best_beta()
    doc = {
        "config": config,
        "rows": [
            {
                "experiment": r.experiment,
                "solver": r.solver,
                "beta": r.beta,
                "average_f_measure": r.average_f_measure,
                "converged_fraction": r.converged_fraction,
            }
            for r in result.rows
        ],
        "failed_groups": [
            {"group": o.group_id, "beta": o.beta, "error": o.error}
            for o in result.outcomes
            if o.error
        ],
        "best": None if best is None else {
            "solver": best.solver,
            "beta": best.beta,
            "average_f_measure": best.average_f_measure,
        },
    }
    if out_path:
        _write_json(doc, out_path)
    if csv_path:
        rows = [["experiment", "solver", "beta", "average_f_measure",
                 "converged_fraction"]]
        rows += [[r.experiment, r.solver, r.beta, r.average_f_measure,
                  r.converged_fraction] for r in result.rows]
        _write_csv(rows, csv_path)
    if not out_path and not csv_path:
        click.echo(json.dumps(doc, indent=2))
    else:
        click.echo(
            f"swept {len(beta_grid)} beta values over {len(groups)} groups; "
            + (f"best beta {best.beta} (avg f {best.average_f_measure:.4f})"
               if best else "no scored rows")
        )


@cli.command(name="eval")
@click.option("--pred-dir", required=True, type=click.Path(),
              help="Directory of predicted masks named <image stem>.png.")
@click.option("--gt-manifest", required=True, type=click.Path(),
              help="Manifest pairing images with ground truth.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def eval_cmd(pred_dir, gt_manifest, out_path, csv_path):
    """Score predicted masks against a manifest's ground truth."""
    with _stage("load-manifest"):
        seq = imgio.load_manifest(gt_manifest)
    frames = []
    placeholder = np.zeros((1, 1), dtype=bool)
    with _stage("load-predictions"):
        for entry in seq.frames:
            stem = os.path.splitext(os.path.basename(entry.image_path))[0]
            if entry.gt_path is None:
                frames.append((placeholder, None, stem))
                continue
            pred_path = os.path.join(pred_dir, f"{stem}.png")
            if not os.path.isfile(pred_path):
                raise RpcasegError(f"missing predicted mask {pred_path}")
            pred = imgio.load_mask(pred_path, _native_size(pred_path))
            gt = imgio.load_mask(entry.gt_path, (pred.shape[1], pred.shape[0]))
            frames.append((pred, gt, stem))
    config = {"pred_dir": pred_dir, "gt_manifest": gt_manifest}
    with _stage("evaluate"):
        rep = report(frames, config)
    doc = report_as_dict(rep)
    if out_path:
        _write_json(doc, out_path)
    if csv_path:
        _write_csv(report_csv_rows(rep), csv_path)
    if not out_path and not csv_path:
        click.echo(json.dumps(doc, indent=2))
    else:
        click.echo(f"average f-measure {rep.average_f_measure:.4f} over "
                   f"{len(rep.per_frame)} frames")


def _native_size(path: str) -> tuple[int, int]:
    from PIL import Image

    with Image.open(path) as img:
        return img.size


@cli.command()
@click.option("--rows", type=int, required=True)
@click.option("--cols", type=int, required=True)
@click.option("--rank", type=int, required=True)
@click.option("--sparsity", type=float, required=True,
              help="Fraction of entries carrying the sparse component.")
@click.option("--magnitude", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for M.npy, L0.npy, S0.npy and meta.json.")
def synth(rows, cols, rank, sparsity, magnitude, seed, out_dir):
    """Generate a seeded low-rank-plus-sparse test instance."""
    with _stage("generate"):
        M, L0, S0 = synth_generate(rows, cols, rank, sparsity, magnitude, seed)
    os.makedirs(out_dir, exist_ok=True)
    np.save(os.path.join(out_dir, "M.npy"), M)
    np.save(os.path.join(out_dir, "L0.npy"), L0)
    np.save(os.path.join(out_dir, "S0.npy"), S0)
    _write_json(
        {
            "rows": rows, "cols": cols, "rank": rank, "sparsity": sparsity,
            "magnitude": magnitude, "seed": seed,
            "nnz_sparse": int(np.count_nonzero(S0)),
        },
        os.path.join(out_dir, "meta.json"),
    )
    click.echo(f"wrote synthetic instance to {out_dir}")


def main():
    cli(auto_envvar_prefix="RPCASEG")


if __name__ == "__main__":
    main()
