"""Linear probing, embedding separability, and KNN-distance detection.

The probe is a least-squares linear head fit on in-distribution embeddings
with one-hot targets, via an eigendecomposition pseudoinverse.  Probing
error on covariate-shifted embeddings has deliberately strict semantics: an
example only counts as correct when its true class wins the score argmax by
a clear margin.  When embeddings collapse (all class scores tie), every
example is counted as misclassified, because no linear boundary separates
the classes; plain argmax with any tie-break would arbitrarily get a
fraction of a degenerate split right.  Reported predictions still use
argmax with ties broken toward the lowest class index, and the accuracy
helpers below score those plain predictions.

The detector scores a query by its Euclidean distance to the k-th nearest
reference embedding (reference points exclude themselves) and flags OUT
above a percentile threshold of the reference scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .spectral import eigendecompose

__all__ = [
    "LinearProbe",
    "ProbingResult",
    "KnnDetector",
    "DetectionMetrics",
    "MetricsReport",
    "EvaluationError",
    "fit_linear_probe",
    "probe_scores",
    "predict",
    "classification_accuracy",
    "probing_error",
    "separability",
    "fit_knn_detector",
    "knn_scores",
    "detection_metrics",
    "auroc_midrank",
]

TIE_TOLERANCE = 1e-8


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class LinearProbe:
    M: np.ndarray
    classes: tuple[int, ...]
    pinv_tolerance: float

    def __post_init__(self) -> None:
        self.M.setflags(write=False)


def _pinv_psd(gram: np.ndarray, tolerance: float) -> np.ndarray:
    """Pseudoinverse of a symmetric PSD matrix, dropping small eigenvalues."""
    emb = eigendecompose(gram, gram.shape[0])
    lam = emb.eigenvalues
    cutoff = tolerance * max(float(lam[0]), 0.0)
    inv = np.where(lam > cutoff, 1.0 / np.where(lam > cutoff, lam, 1.0), 0.0)
    v = emb.V_k
    return (v * inv) @ v.T


def fit_linear_probe(
    Z_id: np.ndarray,
    labels: Sequence[int],
    classes: Optional[Sequence[int]] = None,
    pinv_tolerance: float = 1e-10,
) -> LinearProbe:
    """Least-squares head M = (Z^t Z)^+ Z^t Y with one-hot targets Y.

    ``classes`` defaults to the sorted distinct labels; every class must
    appear at least once among ``labels``.
    """
    z = np.asarray(Z_id, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if z.ndim != 2 or z.shape[0] != labels.shape[0]:
        raise EvaluationError(f"got {z.shape[0]} embedding rows for {labels.shape[0]} labels")
    class_list = tuple(sorted(set(int(c) for c in labels))) if classes is None else tuple(classes)
    if not class_list:
        raise EvaluationError("no classes to fit")
    present = set(int(c) for c in labels)
    missing = [c for c in class_list if c not in present]
    if missing:
        raise EvaluationError(f"classes {missing} have no training examples")
    onehot = (labels[:, None] == np.array(class_list)[None, :]).astype(float)
    gram = z.T @ z
    m = _pinv_psd(gram, pinv_tolerance) @ z.T @ onehot
    return LinearProbe(M=m, classes=class_list, pinv_tolerance=pinv_tolerance)


def probe_scores(probe: LinearProbe, Z: np.ndarray) -> np.ndarray:
    z = np.asarray(Z, dtype=float)
    if z.shape[1] != probe.M.shape[0]:
        raise EvaluationError(
            f"embedding dimension {z.shape[1]} != probe dimension {probe.M.shape[0]}"
        )
    return z @ probe.M


def predict(probe: LinearProbe, Z: np.ndarray) -> np.ndarray:
    """Argmax class prediction; exact ties go to the lowest class index."""
    scores = probe_scores(probe, Z)
    return np.array(probe.classes)[np.argmax(scores, axis=1)]


def classification_accuracy(Z: np.ndarray, labels: Sequence[int], probe: LinearProbe) -> float:
    """Plain argmax accuracy of the probe on one split."""
    labels = np.asarray(labels, dtype=int)
    return float(np.mean(predict(probe, Z) == labels))


@dataclass(frozen=True)
class ProbingResult:
    rate: float
    count: int
    predictions: tuple[int, ...]


def probing_error(
    Z_cov: np.ndarray,
    labels: Sequence[int],
    probe: LinearProbe,
    tie_tolerance: float = TIE_TOLERANCE,
) -> ProbingResult:
    """Strict-margin misclassification on covariate-shifted embeddings.

    An example is correct only when the score of its true class exceeds
    every other class score by more than ``tie_tolerance`` times the
    example's score scale.  Degenerate decisions (collapsed embeddings)
    therefore count as errors for every example.  ``predictions`` carry the
    plain tie-broken argmax for inspection.
    """
    labels = np.asarray(labels, dtype=int)
    scores = probe_scores(probe, Z_cov)
    if labels.shape[0] != scores.shape[0]:
        raise EvaluationError(f"got {scores.shape[0]} rows for {labels.shape[0]} labels")
    class_arr = np.array(probe.classes)
    preds = class_arr[np.argmax(scores, axis=1)]
    errors = 0
    for i, label in enumerate(labels):
        where = np.flatnonzero(class_arr == label)
        if where.size == 0:
            errors += 1
            continue
        own = scores[i, where[0]]
        others = np.delete(scores[i], where[0])
        scale = float(np.max(np.abs(scores[i]))) or 1.0
        strict_win = others.size == 0 or own > float(np.max(others)) + tie_tolerance * scale
        if not strict_win:
            errors += 1
    return ProbingResult(
        rate=errors / len(labels), count=errors, predictions=tuple(int(p) for p in preds)
    )


def separability(Z_id: np.ndarray, Z_sem: np.ndarray) -> float:
    """Mean squared Euclidean distance over all ID x semantic embedding pairs."""
    a = np.asarray(Z_id, dtype=float)
    b = np.asarray(Z_sem, dtype=float)
    if a.size == 0 or b.size == 0:
        raise EvaluationError("separability needs nonempty ID and semantic sets")
    if a.shape[1] != b.shape[1]:
        raise EvaluationError(f"embedding dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    diff = a[:, None, :] - b[None, :, :]
    return float(np.mean(np.sum(diff * diff, axis=2)))


@dataclass(frozen=True)
class KnnDetector:
    reference: np.ndarray
    k_neighbors: int
    percentile: float
    threshold: float
    reference_scores: np.ndarray

    def __post_init__(self) -> None:
        self.reference.setflags(write=False)
        self.reference_scores.setflags(write=False)


def _pairwise_distances(queries: np.ndarray, reference: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(queries**2, axis=1)[:, None]
        + np.sum(reference**2, axis=1)[None, :]
        - 2.0 * queries @ reference.T
    )
    return np.sqrt(np.clip(d2, 0.0, None))


def fit_knn_detector(
    Z_ref: np.ndarray, k_neighbors: int, percentile: float = 0.95
) -> KnnDetector:
    """Calibrate the distance threshold on a clean reference set.

    Reference scores exclude the zero self-distance; the threshold is the
    requested percentile of those scores under linear interpolation between
    order statistics.
    """
    ref = np.asarray(Z_ref, dtype=float)
    n = ref.shape[0]
    if not 0.0 < percentile < 1.0:
        raise EvaluationError(f"percentile must lie in (0, 1), got {percentile}")
    if k_neighbors >= n:
        raise EvaluationError(f"k_neighbors={k_neighbors} must be < reference count {n}")
    if k_neighbors < 1:
        raise EvaluationError(f"k_neighbors must be >= 1, got {k_neighbors}")
    d = _pairwise_distances(ref, ref)
    np.fill_diagonal(d, np.inf)
    d.sort(axis=1)
    scores = d[:, k_neighbors - 1]
    threshold = float(np.quantile(scores, percentile, method="linear"))
    return KnnDetector(
        reference=ref.copy(),
        k_neighbors=k_neighbors,
        percentile=percentile,
        threshold=threshold,
        reference_scores=scores,
    )


def knn_scores(detector: KnnDetector, Z: np.ndarray) -> np.ndarray:
    """Distance of external queries to their k-th nearest reference point."""
    q = np.asarray(Z, dtype=float)
    d = _pairwise_distances(q, detector.reference)
    d.sort(axis=1)
    return d[:, detector.k_neighbors - 1]


@dataclass(frozen=True)
class DetectionMetrics:
    fpr_at_threshold: float
    fpr95: float
    auroc: float


def auroc_midrank(scores_id: np.ndarray, scores_ood: np.ndarray) -> float:
    """Probability that a random OOD score exceeds a random ID score.

    Rank statistic with midranks for ties, so identical score lists give
    exactly one half.
    """
    s_id = np.asarray(scores_id, dtype=float)
    s_ood = np.asarray(scores_ood, dtype=float)
    pooled = np.concatenate([s_id, s_ood])
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.shape[0])
    sorted_vals = pooled[order]
    i = 0
    while i < sorted_vals.shape[0]:
        j = i
        while j + 1 < sorted_vals.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_ood = float(np.sum(ranks[s_id.shape[0] :]))
    n_i, n_o = s_id.shape[0], s_ood.shape[0]
    u = rank_sum_ood - n_o * (n_o + 1) / 2.0
    return u / (n_i * n_o)


def detection_metrics(
    scores_id: np.ndarray, scores_ood: np.ndarray, detector: KnnDetector
) -> DetectionMetrics:
    """False-positive rates and ranking quality of the fitted detector.

    A score at or below a threshold is accepted as IN, so
    ``fpr_at_threshold`` is the fraction of OOD scores the detector lets
    through, and ``fpr95`` uses the 95th percentile of the ID scores as the
    threshold instead.
    """
    s_id = np.asarray(scores_id, dtype=float)
    s_ood = np.asarray(scores_ood, dtype=float)
    if s_id.size == 0 or s_ood.size == 0:
        raise EvaluationError("detection metrics need nonempty score lists")
    fpr_at = float(np.mean(s_ood <= detector.threshold))
    q95 = float(np.quantile(s_id, 0.95, method="linear"))
    fpr95 = float(np.mean(s_ood <= q95))
    return DetectionMetrics(
        fpr_at_threshold=fpr_at, fpr95=fpr95, auroc=auroc_midrank(s_id, s_ood)
    )


@dataclass(frozen=True)
class MetricsReport:
    id_acc: float
    ood_acc: float
    probing_error_rate: float
    probing_error_count: int
    separability: float
    fpr_at_threshold: float
    fpr95: float
    auroc: float

    def __post_init__(self) -> None:
        rates = {
            "id_acc": self.id_acc,
            "ood_acc": self.ood_acc,
            "probing_error_rate": self.probing_error_rate,
            "fpr_at_threshold": self.fpr_at_threshold,
            "fpr95": self.fpr95,
            "auroc": self.auroc,
        }
        for name, value in rates.items():
            if not 0.0 <= value <= 1.0:
                raise EvaluationError(f"{name} must lie in [0, 1], got {value}")
        if self.separability < 0:
            raise EvaluationError(f"separability must be nonnegative, got {self.separability}")

    def to_json_dict(self) -> dict:
        return {
            "id_acc": self.id_acc,
            "ood_acc": self.ood_acc,
            "probing_error_rate": self.probing_error_rate,
            "probing_error_count": self.probing_error_count,
            "separability": self.separability,
            "fpr95": self.fpr95,
            "auroc": self.auroc,
            "fpr_at_threshold": self.fpr_at_threshold,
        }
