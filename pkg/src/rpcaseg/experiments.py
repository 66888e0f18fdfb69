"""Experiment harness: sequence grouping, beta sweeps, synthetic data.

An experiment groups day/night sequences into solve units, runs the full
pipeline (preprocess, fuse, decompose, post-process, score) for every beta
on a grid, and tabulates average f-measure per (solver, beta). Synthetic
generators provide matrices and image sequences with known ground truth.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from . import imgio
from .errors import (
    EmptyResultError,
    FractionOutOfRangeError,
    NoGroundTruthError,
    RankOutOfBoundsError,
    RpcasegError,
    UnpairedSequenceError,
    ZeroDimensionError,
)
from .evaluation import EvalReport, report
from .features import assemble_matrix, fuse_layers, lbp, validate_beta
from .imgio import FrameEntry, SequenceKind, SequenceManifest
from .postprocess import PostprocessConfig, postprocess
from .preprocess import DEFAULT_SIGMA, PipelineKind, run_pipeline
from .rpca import Algorithm, Decomposition, SolverConfig, solve

DEFAULT_BETA_GRID = tuple(round(0.05 * i, 10) for i in range(21))


class ExperimentKind(Enum):
    DAYS_ONLY = "days-only"
    NIGHTS_ONLY = "nights-only"
    MIXED_TWO_PIPELINES = "mixed-two-pipelines"
    MIXED_ONE_PIPELINE = "mixed-one-pipeline"


# Default pre-processing per (experiment, frame kind): day frames are
# equalized, night frames Gaussian-filtered, except the one-pipeline mixed
# experiment which equalizes everything.
def pipeline_for(
    frame_kind: SequenceKind, experiment: ExperimentKind
) -> PipelineKind:
    if experiment is ExperimentKind.MIXED_ONE_PIPELINE:
        return PipelineKind.EQUALIZE_ONLY
    if frame_kind is SequenceKind.DAY:
        return PipelineKind.EQUALIZE_ONLY
    return PipelineKind.GAUSSIAN_ONLY


@dataclass(frozen=True)
class GroupFrame:
    kind: SequenceKind
    entry: FrameEntry


@dataclass(frozen=True)
class SolveGroup:
    """One unit of decomposition: an ordered set of frames solved jointly."""

    group_id: str
    frames: tuple[GroupFrame, ...]


def group_sequences(
    manifests: Sequence[SequenceManifest], kind: ExperimentKind
) -> list[SolveGroup]:
    """Form solve groups per experiment.

    Day-only and night-only experiments yield one group per matching
    manifest; mixed experiments pair day i with night i by position and
    raise :class:`UnpairedSequenceError` on unequal counts.
    """
    if not manifests:
        raise ValueError("manifests must be non-empty")

    def frames_of(m: SequenceManifest) -> tuple[GroupFrame, ...]:
        return tuple(GroupFrame(m.kind, e) for e in m.frames)

    days = [m for m in manifests if m.kind is SequenceKind.DAY]
    nights = [m for m in manifests if m.kind is SequenceKind.NIGHT]
    if kind is ExperimentKind.DAYS_ONLY:
        return [SolveGroup(m.sequence_id, frames_of(m)) for m in days]
    if kind is ExperimentKind.NIGHTS_ONLY:
        return [SolveGroup(m.sequence_id, frames_of(m)) for m in nights]
    if len(days) != len(nights):
        raise UnpairedSequenceError(
            f"mixed grouping needs equal day/night counts, got {len(days)} days"
            f" and {len(nights)} nights"
        )
    return [
        SolveGroup(f"{d.sequence_id}+{n.sequence_id}", frames_of(d) + frames_of(n))
        for d, n in zip(days, nights)
    ]


@dataclass
class SegmentResult:
    masks: list[np.ndarray]
    decomposition: Decomposition
    preprocessed: list[np.ndarray]


PipelineChoice = Union[PipelineKind, None]


def segment_frames(
    images: Sequence[np.ndarray],
    pipelines: Sequence[PipelineChoice],
    beta: float,
    solver_cfg: SolverConfig = SolverConfig(),
    post_cfg: PostprocessConfig = PostprocessConfig(),
    sigma: float = DEFAULT_SIGMA,
) -> SegmentResult:
    """Run the full pipeline on in-memory frames.

    ``pipelines`` gives one :class:`PipelineKind` (or None for no
    pre-processing) per frame. The pre-processed frames serve both as the
    color layer and as the contour guides.
    """
    beta = validate_beta(beta)
    if len(images) != len(pipelines):
        raise ValueError("one pipeline choice per frame required")
    pre = [
        run_pipeline(img, kind, sigma) if kind is not None else np.asarray(img, float)
        for img, kind in zip(images, pipelines)
    ]
    fused = [fuse_layers(lbp(p), p, beta) for p in pre]
    matrix = assemble_matrix(fused)
    decomposition = solve(matrix, solver_cfg)
    masks = postprocess(decomposition.sparse, pre, post_cfg)
    return SegmentResult(masks=masks, decomposition=decomposition, preprocessed=pre)


@dataclass(frozen=True)
class SweepRow:
    experiment: str
    solver: str
    beta: float
    average_f_measure: float
    converged_fraction: float


@dataclass
class GroupOutcome:
    group_id: str
    beta: float
    report: Optional[EvalReport]
    converged: bool
    masks: Optional[list[np.ndarray]] = None
    error: Optional[str] = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    outcomes: list[GroupOutcome] = field(default_factory=list)

    def best_beta(self) -> Optional[SweepRow]:
        if not self.rows:
            return None
        return min(self.rows, key=_row_rank)


@dataclass
class _LoadedGroup:
    group_id: str
    images: list[np.ndarray]
    gts: list[Optional[np.ndarray]]
    ids: list[str]
    pipelines: list[PipelineChoice]


def _resolve_pipeline(
    override: Union[PipelineKind, str, None],
    frame_kind: SequenceKind,
    experiment: ExperimentKind,
) -> PipelineChoice:
    if override is None:
        return pipeline_for(frame_kind, experiment)
    if override == "none":
        return None
    if isinstance(override, PipelineKind):
        return override
    return PipelineKind(override)


def load_group(
    group: SolveGroup,
    working_size: tuple[int, int],
    experiment: ExperimentKind,
    pre_day: Union[PipelineKind, str, None] = None,
    pre_night: Union[PipelineKind, str, None] = None,
) -> _LoadedGroup:
    images, gts, ids, pipelines = [], [], [], []
    for gf in group.frames:
        images.append(imgio.load_image(gf.entry.image_path, working_size))
        gts.append(
            imgio.load_mask(gf.entry.gt_path, working_size)
            if gf.entry.gt_path
            else None
        )
        ids.append(os.path.splitext(os.path.basename(gf.entry.image_path))[0])
        override = pre_day if gf.kind is SequenceKind.DAY else pre_night
        pipelines.append(_resolve_pipeline(override, gf.kind, experiment))
    return _LoadedGroup(group.group_id, images, gts, ids, pipelines)


def run_sweep(
    groups: Sequence[SolveGroup],
    solver_cfg: SolverConfig,
    beta_grid: Sequence[float],
    post_cfg: PostprocessConfig,
    *,
    experiment: ExperimentKind = ExperimentKind.DAYS_ONLY,
    working_size: tuple[int, int] = (408, 306),
    sigma: float = DEFAULT_SIGMA,
    pre_day: Union[PipelineKind, str, None] = None,
    pre_night: Union[PipelineKind, str, None] = None,
    jobs: int = 1,
    keep_masks: bool = False,
) -> SweepResult:
    """Evaluate every (group, beta) pair and tabulate one row per beta.

    The grid must be strictly increasing within [0, 1]. Group failures are
    recorded on their outcome rather than raised; a group whose solver ran
    out of iterations still contributes its best-iterate masks, flagged via
    ``converged``. Work items are independent and may run on ``jobs``
    threads; results merge deterministically.
    """
    betas = [validate_beta(b) for b in beta_grid]
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta grid must be strictly increasing")
    if not betas:
        raise ValueError("beta grid must be non-empty")

    loaded = [
        load_group(g, working_size, experiment, pre_day, pre_night) for g in groups
    ]

    def run_item(item: tuple[int, int]) -> tuple[int, int, GroupOutcome]:
        bi, gi = item
        beta = betas[bi]
        grp = loaded[gi]
        try:
            seg = segment_frames(
                grp.images, grp.pipelines, beta, solver_cfg, post_cfg, sigma
            )
            rep = report(
                list(zip(seg.masks, grp.gts, grp.ids)),
                config={"beta": beta, "group": grp.group_id},
            )
            outcome = GroupOutcome(
                group_id=grp.group_id,
                beta=beta,
                report=rep,
                converged=seg.decomposition.converged,
                masks=seg.masks if keep_masks else None,
            )
        except NoGroundTruthError:
            outcome = GroupOutcome(grp.group_id, beta, None, False, None,
                                   error="no ground truth")
        except RpcasegError as exc:
            outcome = GroupOutcome(grp.group_id, beta, None, False, None,
                                   error=str(exc))
        return bi, gi, outcome

    items = [(bi, gi) for bi in range(len(betas)) for gi in range(len(loaded))]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_item, items))
    else:
        results = [run_item(it) for it in items]
    results.sort(key=lambda r: (r[0], r[1]))

    rows = []
    outcomes = []
    for bi, beta in enumerate(betas):
        here = [r[2] for r in results if r[0] == bi]
        outcomes.extend(here)
        scores = [s.f_measure for o in here if o.report for s in o.report.per_frame]
        avg = sum(scores) / len(scores) if scores else 0.0
        n_ok = sum(1 for o in here if o.error is None)
        conv = sum(1 for o in here if o.converged) / n_ok if n_ok else 0.0
        rows.append(
            SweepRow(
                experiment=experiment.value,
                solver=solver_cfg.algorithm.value,
                beta=beta,
                average_f_measure=avg,
                converged_fraction=conv,
            )
        )
    return SweepResult(rows=rows, outcomes=outcomes)


_SOLVER_ORDER = {a.value: i for i, a in enumerate(Algorithm)}


def _row_rank(row: SweepRow) -> tuple:
    return (-row.average_f_measure, row.beta, _SOLVER_ORDER.get(row.solver, 99))


def best_configuration(
    result: Union[SweepResult, Iterable[SweepRow]],
) -> list[SweepRow]:
    """The best (solver, beta) row per experiment.

    Ties break toward smaller beta, then solver declaration order. Rows may
    come from one sweep or from several merged ones.
    """
    rows = list(result.rows if isinstance(result, SweepResult) else result)
    if not rows:
        raise EmptyResultError("no sweep rows to rank")
    by_exp: dict[str, list[SweepRow]] = {}
    for row in rows:
        by_exp.setdefault(row.experiment, []).append(row)
    return [min(group, key=_row_rank) for _, group in sorted(by_exp.items())]


def synth_generate(
    rows: int,
    cols: int,
    rank: int,
    sparsity_fraction: float,
    magnitude: float = 1.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded low-rank-plus-sparse instance: returns (M, L0, S0).

    L0 is a product of scaled standard-normal factors; S0 places exactly
    ``round(fraction * rows * cols)`` entries of value +/-magnitude at
    uniform positions. Identical seeds give bit-identical outputs.
    """
    if rows < 1 or cols < 1:
        raise ZeroDimensionError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    if not 0 <= rank <= min(rows, cols):
        raise RankOutOfBoundsError(
            f"rank must be in [0, {min(rows, cols)}], got {rank}"
        )
    if not 0.0 <= sparsity_fraction <= 1.0:
        raise FractionOutOfRangeError(
            f"sparsity fraction must be in [0, 1], got {sparsity_fraction}"
        )
    rng = np.random.default_rng(seed)
    if rank > 0:
        A = rng.standard_normal((rows, rank)) / np.sqrt(rows)
        B = rng.standard_normal((cols, rank)) / np.sqrt(cols)
        L0 = A @ B.T
    else:
        L0 = np.zeros((rows, cols))
    S0 = np.zeros((rows, cols))
    nnz = round(sparsity_fraction * rows * cols)
    if nnz:
        idx = rng.choice(rows * cols, size=nnz, replace=False)
        S0.flat[idx] = magnitude * (2.0 * rng.integers(0, 2, size=nnz) - 1.0)
    return L0 + S0, L0, S0


def synth_sequence(
    width: int = 64,
    height: int = 48,
    n_frames: int = 30,
    block_size: int = 10,
    seed: int = 0,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Static textured background with one moving bright block.

    Returns (frames, ground-truth masks). The background is seeded blurred
    noise kept dark so the block edge always gates the contour balloon.
    """
    from .preprocess import gaussian_blur

    rng = np.random.default_rng(seed)
    noise = gaussian_blur(rng.random((height, width)), 2.0)
    lo, hi = noise.min(), noise.max()
    background = 0.1 + 0.25 * (noise - lo) / max(hi - lo, 1e-12)
    margin = 4  # keep the block clear of border effects
    frames, gts = [], []
    for _ in range(n_frames):
        y = int(rng.integers(margin, height - block_size - margin + 1))
        x = int(rng.integers(margin, width - block_size - margin + 1))
        frame = background.copy()
        frame[y : y + block_size, x : x + block_size] = 0.95
        gt = np.zeros((height, width), dtype=bool)
        gt[y : y + block_size, x : x + block_size] = True
        frames.append(frame)
        gts.append(gt)
    return frames, gts


def save_sequence(
    out_dir: str,
    frames: Sequence[np.ndarray],
    gts: Optional[Sequence[Optional[np.ndarray]]] = None,
    kind: SequenceKind = SequenceKind.NIGHT,
    sequence_id: str = "synthetic",
) -> str:
    """Write frames (and optional GT masks) as PNGs plus a manifest.

    Returns the manifest path.
    """
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, frame in enumerate(frames):
        name = f"frame{i:04d}.png"
        imgio.save_image(frame, os.path.join(out_dir, name))
        entry: dict = {"image": name}
        if gts is not None and gts[i] is not None:
            gt_name = f"gt{i:04d}.png"
            imgio.save_mask(gts[i], os.path.join(out_dir, gt_name))
            entry["gt"] = gt_name
        entries.append(entry)
    manifest = {
        "sequence_id": sequence_id,
        "kind": kind.value,
        "frames": entries,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def parse_beta_grid(spec: str) -> tuple[float, ...]:
    """Parse ``start:step:end`` into an inclusive grid of beta values."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"beta grid must be start:step:end, got {spec!r}")
    start, step, end = (float(p) for p in parts)
    if step <= 0 or end < start:
        raise ValueError(f"bad beta grid {spec!r}")
    count = int(np.floor((end - start) / step + 0.5)) + 1
    values = tuple(round(start + i * step, 10) for i in range(count))
    return tuple(validate_beta(v) for v in values)
