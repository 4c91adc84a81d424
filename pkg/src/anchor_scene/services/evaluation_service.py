"""Scene metrics and their JSON-lines reports."""

import json
import logging
import math
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Self

import numpy as np

from anchor_scene.domain.errors import ContractViolation, UndefinedMetricError
from anchor_scene.domain.models import CategoryTable, FloorPlanMask, Scene
from anchor_scene.domain.shapes import FloatArray
from anchor_scene.geometry.metrics import chamfer, mean_pairwise_chamfer
from anchor_scene.geometry.obb import PENETRATION_EPS, OrientedBox, colliding_mask
from anchor_scene.services.ports import ShapeDecoderPort

logger = logging.getLogger(__name__)

KL_SMOOTHING = 1e-4
METRICS = ("collision", "ckl", "consistency", "diversity", "inside")

type SceneSampler = Callable[[FloorPlanMask, np.random.Generator], Scene]


@dataclass(frozen=True)
class MetricReport:
    """One metric value; ``error`` replaces the value when the metric was undefined."""

    metric: str
    value: float | None
    n: int
    config_hash: str = ""
    per_scene: tuple[float, ...] = field(default=(), repr=False)
    error: str | None = None

    def __post_init__(self) -> None:
        if self.error is None:
            if self.value is None or not math.isfinite(self.value):
                raise ContractViolation(f"{self.metric} value must be finite, got {self.value}")
            if self.n <= 0:
                raise ContractViolation(f"{self.metric} needs a positive sample count")

    @classmethod
    def undefined(cls, metric: str, reason: str, config_hash: str = "") -> Self:
        return cls(metric=metric, value=None, n=0, config_hash=config_hash, error=reason)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "metric": self.metric,
            "value": self.value,
            "n": self.n,
            "config_hash": self.config_hash,
        }
        if self.error is not None:
            data["error"] = self.error
        return data


def write_reports(path: Path, reports: Iterable[MetricReport]) -> int:
    """One JSON object per line; returns the line count."""
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in reports]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def read_reports(path: Path) -> list[dict[str, Any]]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def scene_collision_fraction(scene: Scene, eps: float = PENETRATION_EPS) -> float:
    """C / N: share of objects overlapping at least one other object."""
    if not scene.furniture:
        raise ContractViolation("collision rate is undefined for an empty scene")
    hits = colliding_mask([OrientedBox.from_instance(f) for f in scene.furniture], eps)
    return float(hits.mean())


def collision_breakdown(scenes: Sequence[Scene], eps: float = PENETRATION_EPS) -> list[float]:
    if not scenes:
        raise ContractViolation("collision rate needs at least one scene")
    return [scene_collision_fraction(scene, eps) for scene in scenes]


def collision_rate(scenes: Sequence[Scene], eps: float = PENETRATION_EPS) -> float:
    """Mean over scenes of the fraction of colliding objects."""
    return float(np.mean(collision_breakdown(scenes, eps)))


def category_distribution(scenes: Iterable[Scene], labels: Sequence[str], alpha: float = KL_SMOOTHING) -> FloatArray:
    counts = Counter(f.category for scene in scenes for f in scene.furniture)
    unknown = set(counts) - set(labels)
    if unknown:
        raise ContractViolation(f"categories outside the label set: {sorted(unknown)}")
    freq = np.array([counts[label] for label in labels], dtype=np.float64)
    total = freq.sum()
    probs = freq / total if total > 0 else np.zeros_like(freq)
    smoothed = probs + alpha
    return smoothed / smoothed.sum()


def category_kl(
    generated: Sequence[Scene],
    reference: Sequence[Scene],
    labels: Sequence[str] | None = None,
    alpha: float = KL_SMOOTHING,
) -> float:
    """KL(P_generated || P_reference) over smoothed category frequencies."""
    if not generated or not reference:
        raise ContractViolation("category KL needs non-empty generated and reference sets")
    support = list(labels) if labels is not None else list(CategoryTable().content_labels)
    p = category_distribution(generated, support, alpha)
    q = category_distribution(reference, support, alpha)
    return float(np.sum(p * (np.log(p) - np.log(q))))


def consistency_breakdown(scenes: Sequence[Scene], category: str, decoder: ShapeDecoderPort) -> list[float]:
    """Mean pairwise Chamfer of decoded same-category shapes, per qualifying scene."""
    values: list[float] = []
    for scene in scenes:
        shapes = [f.shape for f in scene.furniture if f.category == category and f.shape is not None]
        if len(shapes) < 2:
            continue
        values.append(mean_pairwise_chamfer([decoder.boundary_cloud(shape) for shape in shapes]))
    return values


def within_scene_consistency(scenes: Sequence[Scene], category: str, decoder: ShapeDecoderPort) -> float:
    values = consistency_breakdown(scenes, category, decoder)
    if not values:
        raise UndefinedMetricError(f"no scene holds two or more '{category}' instances")
    return float(np.mean(values))


def cross_scene_baseline(
    scenes: Sequence[Scene],
    category: str,
    decoder: ShapeDecoderPort,
    rng: np.random.Generator,
    pairs: int = 100,
) -> float:
    """Mean Chamfer between random same-category instances drawn from two different scenes."""
    pools = [
        [f.shape for f in scene.furniture if f.category == category and f.shape is not None] for scene in scenes
    ]
    usable = [i for i, pool in enumerate(pools) if pool]
    if len(usable) < 2:
        raise UndefinedMetricError(f"fewer than two scenes contain '{category}'")
    values = []
    for _ in range(pairs):
        i, j = rng.choice(usable, size=2, replace=False)
        a = pools[i][int(rng.integers(len(pools[i])))]
        b = pools[j][int(rng.integers(len(pools[j])))]
        values.append(chamfer(decoder.boundary_cloud(a), decoder.boundary_cloud(b)))
    return float(np.mean(values))


def diversity_breakdown(
    masks: Sequence[FloorPlanMask],
    sample: SceneSampler,
    runs: int,
    category: str,
    decoder: ShapeDecoderPort,
    rng: np.random.Generator,
) -> list[float]:
    if runs < 2:
        raise ContractViolation(f"diversity needs at least 2 runs, got {runs}")
    values: list[float] = []
    for mask in masks:
        clouds = []
        for _ in range(runs):
            scene = sample(mask, np.random.default_rng(int(rng.integers(2**32))))
            shapes = [f.shape for f in scene.furniture if f.category == category and f.shape is not None]
            if not shapes:
                continue
            pick = shapes[int(rng.integers(len(shapes)))]
            clouds.append(decoder.boundary_cloud(pick))
        if len(clouds) < 2:
            logger.debug(f"mask skipped: only {len(clouds)} runs produced a '{category}'")
            continue
        values.append(mean_pairwise_chamfer(clouds))
    return values


def cross_run_diversity(
    masks: Sequence[FloorPlanMask],
    sample: SceneSampler,
    runs: int,
    category: str,
    decoder: ShapeDecoderPort,
    rng: np.random.Generator,
) -> float:
    """Mean pairwise Chamfer between one '<category>' instance per run, averaged over masks."""
    values = diversity_breakdown(masks, sample, runs, category, decoder, rng)
    if not values:
        raise UndefinedMetricError(f"fewer than two runs produced a '{category}' for every mask")
    return float(np.mean(values))


def inside_fraction(scenes: Sequence[Scene]) -> float:
    """Share of all generated translations that fall on an interior floor cell."""
    inside = total = 0
    for scene in scenes:
        if not scene.furniture:
            continue
        t = scene.translations()
        inside += int(scene.floor.contains(t[:, 0], t[:, 2]).sum())
        total += len(scene)
    if total == 0:
        raise UndefinedMetricError("no generated objects")
    return inside / total


def report(metric: str, compute: Callable[[], tuple[float, list[float]]], config_hash: str) -> MetricReport:
    """Run one metric; an undefined metric becomes an error report instead of an exception."""
    try:
        value, per_scene = compute()
    except UndefinedMetricError as e:
        logger.warning(f"{metric}: {e}")
        return MetricReport.undefined(metric, str(e), config_hash)
    logger.info(f"{metric} = {value:.6g} (n={len(per_scene)})")
    return MetricReport(metric, value, max(len(per_scene), 1), config_hash, tuple(per_scene))
