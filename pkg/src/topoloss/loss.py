"""Focal loss, per-class topological transport loss, and their combination.

The combined loss is ``focal + lam * topo_total``. The topological term
compares, per class and homology dimension, the sublevel persistence
diagram of the predicted field 1 - p_class against that of the ground-truth
field 1 - indicator(class); each comparison is the entropic transport cost
between the two (finite-ized, truncated) diagrams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cubical import PersistenceDiagram, sublevel_persistence
from .transport import (
    EmptyDiagramError,
    SinkhornConfig,
    transport_plan,
)
from .volume import LabelMask, ProbabilityField, field_from_mask, field_from_probs


@dataclass(frozen=True)
class FocalConfig:
    """alpha, gamma, and reduction of the per-voxel focal term.

    prob_floor clamps the true-class probability away from zero before the
    logarithm.
    """

    alpha: float = 1.0
    gamma: float = 2.0
    reduction: str = "mean"
    prob_floor: float = 1e-12

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"reduction must be 'mean' or 'sum', got {self.reduction}")
        if not self.prob_floor > 0:
            raise ValueError(f"prob_floor must be positive, got {self.prob_floor}")


def _default_sinkhorn() -> SinkhornConfig:
    # Real mask diagrams have unequal sizes and costs far above mu, so the
    # loss path defaults to the augmented square problem in log domain.
    return SinkhornConfig(stabilization="log-domain", cardinality_mode="diagonal-augmented")


@dataclass(frozen=True)
class TaflConfig:
    """Configuration of the combined loss.

    lam: weight of the topological term.
    homology_dims: which diagram dimensions contribute.
    classes: class ids to compare; None means every non-background class
        (background is class 0).
    top_k: keep at most this many pairs per diagram, by persistence.
    Infinite deaths are replaced by the maximum filtration value of the
    field they came from before transport.
    """

    lam: float = 0.001
    focal: FocalConfig = field(default_factory=FocalConfig)
    sinkhorn: SinkhornConfig = field(default_factory=_default_sinkhorn)
    homology_dims: tuple = (0, 1, 2)
    classes: tuple | None = None
    top_k: int = 128

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        dims = tuple(sorted(set(int(d) for d in self.homology_dims)))
        if not dims or any(d not in (0, 1, 2) for d in dims):
            raise ValueError(f"homology_dims must be a non-empty subset of {{0,1,2}}")
        object.__setattr__(self, "homology_dims", dims)
        if self.classes is not None:
            object.__setattr__(self, "classes", tuple(sorted(set(int(c) for c in self.classes))))


@dataclass(frozen=True)
class TopoTerm:
    """One (class, dimension) transport distance with diagnostics."""

    class_id: int
    dim: int
    distance: float
    converged: bool
    n1: int
    n2: int


@dataclass(frozen=True)
class LossReport:
    """Focal, topological, and combined values; total = focal + lam * topo_total."""

    focal: float
    lam: float
    topo_total: float
    topo_breakdown: tuple
    total: float

    def to_dict(self) -> dict:
        return {
            "focal": self.focal,
            "lambda": self.lam,
            "topo_total": self.topo_total,
            "topo_breakdown": [
                {
                    "class": t.class_id,
                    "dim": t.dim,
                    "distance": t.distance,
                    "converged": t.converged,
                    "n1": t.n1,
                    "n2": t.n2,
                }
                for t in self.topo_breakdown
            ],
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check_pair(probs: ProbabilityField, mask: LabelMask):
    if probs.dims != mask.dims:
        raise ValueError(f"prediction dims {probs.dims} != mask dims {mask.dims}")
    if probs.num_classes != mask.num_classes:
        raise ValueError(
            f"prediction has {probs.num_classes} classes, mask has {mask.num_classes}"
        )


def _true_class_probs(probs: ProbabilityField, mask: LabelMask) -> np.ndarray:
    idx = mask.labels.astype(np.int64)[None]
    return np.take_along_axis(probs.probs, idx, axis=0)[0]


def focal_loss(probs: ProbabilityField, mask: LabelMask, config: FocalConfig = FocalConfig()) -> float:
    """Reduced -alpha (1 - p_t)^gamma log(p_t) over voxels."""
    _check_pair(probs, mask)
    p_t = np.maximum(_true_class_probs(probs, mask), config.prob_floor)
    per_voxel = -config.alpha * (1.0 - p_t) ** config.gamma * np.log(p_t)
    return float(per_voxel.mean() if config.reduction == "mean" else per_voxel.sum())


@dataclass(frozen=True)
class FocalGradient:
    """Per-voxel d(loss)/d(p_t) and the voxels where it is undefined."""

    grad: np.ndarray
    flagged: np.ndarray  # x-fastest linear indices with p_t at a clamp boundary


def focal_loss_grad(
    probs: ProbabilityField, mask: LabelMask, config: FocalConfig = FocalConfig()
) -> FocalGradient:
    """Analytic per-voxel gradient of the focal term w.r.t. p_t.

    d/dp [-a (1-p)^g log p] = -a [ -g (1-p)^(g-1) log p + (1-p)^g / p ],
    scaled by the reduction factor. Voxels with p_t at or below the
    probability floor (or at 1 with gamma < 1) are flagged, not evaluated.
    """
    _check_pair(probs, mask)
    p_t = _true_class_probs(probs, mask)
    boundary = (p_t <= config.prob_floor) | (p_t >= 1.0)
    flagged = np.nonzero(boundary.ravel(order="F"))[0]

    with np.errstate(divide="ignore", invalid="ignore"):
        if config.gamma == 0:
            inner = 1.0 / p_t
        else:
            inner = (
                -config.gamma * (1.0 - p_t) ** (config.gamma - 1.0) * np.log(p_t)
                + (1.0 - p_t) ** config.gamma / p_t
            )
        grad = -config.alpha * inner
    scale = 1.0 / p_t.size if config.reduction == "mean" else 1.0
    grad = grad * scale
    grad[boundary] = np.nan
    return FocalGradient(grad=grad, flagged=flagged)


def _prepared_points(diagram: PersistenceDiagram, dim: int, field_max: float, top_k: int, p: float):
    """Finite-ized, persistence-truncated (birth, death) points for one dim.

    Infinite deaths become field_max; pairs degenerating to zero persistence
    are dropped. Keeps the top_k pairs by persistence (ties broken by
    (birth, death) for determinism).
    """
    pts = [
        (pr.birth, field_max if pr.essential else pr.death)
        for pr in diagram.in_dim(dim)
        if (field_max if pr.essential else pr.death) > pr.birth
    ]
    pts.sort(key=lambda bd: (-(bd[1] - bd[0]), bd[0], bd[1]))
    return pts[:top_k]


def _diagonal_cost(points, p: float) -> float:
    """Closed-form cost of matching every point to its diagonal projection."""
    return float(sum(2.0 * (abs(d - b) / 2.0) ** p for b, d in points))


def topological_loss(
    probs: ProbabilityField, mask: LabelMask, config: TaflConfig = TaflConfig()
) -> tuple:
    """(topo_total, breakdown) of per-class, per-dimension transport distances.

    For every selected class the predicted field 1 - p_class and the
    ground-truth field 1 - indicator are filtered; per homology dimension
    the two diagrams are compared under config.sinkhorn. With one empty
    diagram in diagonal-augmented mode the other side pays its diagonal
    projection cost; two empty diagrams contribute zero.
    """
    _check_pair(probs, mask)
    classes = config.classes
    if classes is None:
        classes = tuple(range(1, mask.num_classes))
    if any(not 0 <= c < mask.num_classes for c in classes):
        raise ValueError(f"classes {classes} out of range for {mask.num_classes} classes")

    max_dim = max(config.homology_dims)
    p = config.sinkhorn.p
    terms = []
    for class_id in classes:
        field_pred = field_from_probs(probs, class_id)
        field_true = field_from_mask(mask, class_id)
        diagram_pred = sublevel_persistence(field_pred, max_dim=max_dim)
        diagram_true = sublevel_persistence(field_true, max_dim=max_dim)
        max_pred = float(field_pred.values.max())
        max_true = float(field_true.values.max())
        for dim in config.homology_dims:
            pts_pred = _prepared_points(diagram_pred, dim, max_pred, config.top_k, p)
            pts_true = _prepared_points(diagram_true, dim, max_true, config.top_k, p)
            n1, n2 = len(pts_pred), len(pts_true)
            if n1 == 0 and n2 == 0:
                distance, converged = 0.0, True
            elif n1 == 0 or n2 == 0:
                if config.sinkhorn.cardinality_mode != "diagonal-augmented":
                    raise EmptyDiagramError(
                        f"class {class_id} dim {dim}: one diagram is empty; "
                        "paper-literal mode cannot match it"
                    )
                distance = _diagonal_cost(pts_pred if n1 else pts_true, p)
                converged = True
            else:
                plan, cost = transport_plan(pts_pred, pts_true, config.sinkhorn)
                distance = float(np.sum(plan.matrix * cost))
                converged = plan.converged
            terms.append(TopoTerm(class_id, dim, distance, converged, n1, n2))

    # summation in sorted (class, dim) order for determinism
    terms.sort(key=lambda t: (t.class_id, t.dim))
    topo_total = 0.0
    for t in terms:
        topo_total += t.distance
    return topo_total, tuple(terms)


def tafl_loss(
    probs: ProbabilityField, mask: LabelMask, config: TaflConfig = TaflConfig()
) -> LossReport:
    """Combined report: focal term, topological term, total = focal + lam * topo."""
    focal = focal_loss(probs, mask, config.focal)
    topo_total, breakdown = topological_loss(probs, mask, config)
    return LossReport(
        focal=focal,
        lam=config.lam,
        topo_total=topo_total,
        topo_breakdown=breakdown,
        total=focal + config.lam * topo_total,
    )
