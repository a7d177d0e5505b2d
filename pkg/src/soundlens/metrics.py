"""Consensus ground truth and localization metrics.

The consensus map credits each pixel by how many annotators' boxes cover
it, scaled by the number of opinions needed for agreement and clipped at
full credit.  cIoU scores a thresholded response map against it, charging
response mass that lands outside every annotation.  Brute-force per-pixel
oracles are kept alongside the vectorized implementations; the test suite
holds them bit-equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import SampleAnnotation, SubjectAnnotation, TAG_OBJECT
from .errors import InputError


def subject_mask(subject: SubjectAnnotation, frame_hw) -> np.ndarray:
    """Binary (H, W) map of a subject's boxes, clipped to the frame."""
    h, w = frame_hw
    mask = np.zeros((h, w), dtype=bool)
    for box in subject.boxes:
        x0, y0 = max(box.x, 0), max(box.y, 0)
        x1, y1 = min(box.x + box.w, w), min(box.y + box.h, h)
        if x1 > x0 and y1 > y0:
            mask[y0:y1, x0:x1] = True
    return mask


def consensus_map(subjects, frame_hw, consensus_count: int = 2) -> np.ndarray:
    """Per-pixel agreement score: min(sum_j b_j / consensus_count, 1)."""
    subjects = tuple(subjects)
    if not subjects:
        raise InputError("consensus map needs at least one subject annotation")
    if consensus_count < 1:
        raise InputError(f"consensus count must be >= 1, got {consensus_count}")
    for s in subjects:
        if s.tag != TAG_OBJECT:
            raise InputError(
                f"subject {s.subject_id!r} tagged {s.tag!r}; ambient annotations "
                "must be filtered before building a consensus map"
            )
    total = np.zeros(frame_hw)
    for s in subjects:
        total += subject_mask(s, frame_hw)
    return np.minimum(total / consensus_count, 1.0)


def consensus_map_bruteforce(subjects, frame_hw, consensus_count: int = 2) -> np.ndarray:
    """Per-pixel reimplementation of consensus_map (test oracle)."""
    subjects = tuple(subjects)
    if not subjects:
        raise InputError("consensus map needs at least one subject annotation")
    h, w = frame_hw
    masks = [subject_mask(s, frame_hw) for s in subjects]
    g = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            count = 0.0
            for mask in masks:
                if mask[y, x]:
                    count += 1.0
            g[y, x] = min(count / consensus_count, 1.0)
    return g


def ciou(response: np.ndarray, g: np.ndarray, tau: float = 0.5) -> float:
    """Consensus IoU at pixel threshold tau.

    With A = {i : response_i > tau} and G = {i : g_i > 0}:
    sum_{i in A} g_i / (sum_i g_i + |A \\ G|).
    """
    response = np.asarray(response, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if response.shape != g.shape:
        raise ValueError(f"response {response.shape} vs consensus map {g.shape}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {tau}")
    g_sum = float(g.sum())
    if g_sum == 0.0:
        raise InputError("consensus map is identically zero; sample must be skipped")
    a = response > tau
    num = float(g[a].sum())
    outside = int(np.count_nonzero(a & (g <= 0.0)))
    return num / (g_sum + outside)


def ciou_bruteforce(response: np.ndarray, g: np.ndarray, tau: float = 0.5) -> float:
    """Per-pixel reimplementation of ciou (test oracle)."""
    response = np.asarray(response, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    g_sum = 0.0
    for gi in g:
        g_sum += gi
    if g_sum == 0.0:
        raise InputError("consensus map is identically zero; sample must be skipped")
    num = 0.0
    outside = 0
    for ri, gi in zip(response, g):
        if ri > tau:
            if gi > 0.0:
                num += gi
            else:
                outside += 1
    return num / (g_sum + outside)


def success_rate(ciou_values, success_threshold: float = 0.5):
    """Fraction of samples with cIoU >= success_threshold, with the 95%
    normal-approximation binomial confidence half-width."""
    values = np.asarray(ciou_values, dtype=np.float64)
    if values.size == 0:
        raise InputError("success rate needs at least one scored sample")
    n = values.size
    p = float(np.count_nonzero(values >= success_threshold)) / n
    half_width = 1.96 * float(np.sqrt(p * (1.0 - p) / n))
    return p, half_width


def auc(ciou_values, step: float = 0.01) -> float:
    """Area under the success-rate curve over success thresholds 0..1."""
    values = np.asarray(ciou_values, dtype=np.float64)
    if values.size == 0:
        raise InputError("AUC needs at least one scored sample")
    thresholds = np.arange(0.0, 1.0 + step / 2, step)
    curve = [success_rate(values, t)[0] for t in thresholds]
    return float(np.trapezoid(curve, dx=step))


def per_subject_iou(response: np.ndarray, annotation: SampleAnnotation, tau: float = 0.5) -> dict:
    """cIoU of the response against each object-tagged subject alone."""
    scores = {}
    for subject in annotation.subjects:
        if subject.tag != TAG_OBJECT:
            continue
        g = subject_mask(subject, response.shape).astype(np.float64)
        if g.sum() == 0.0:
            continue
        scores[subject.subject_id] = ciou(response, g, tau)
    return scores


def baseline_response(frame_hw, mode: str, rng: np.random.Generator | None = None) -> np.ndarray:
    """Reference maps: i.i.d. uniform noise, or a centered box of half the
    frame's side lengths."""
    h, w = frame_hw
    if mode == "random_pattern":
        if rng is None:
            raise ValueError("random_pattern baseline needs an rng")
        return rng.uniform(0.0, 1.0, size=(h, w))
    if mode == "center_box":
        out = np.zeros((h, w))
        out[h // 4 : h // 4 + h // 2, w // 4 : w // 4 + w // 2] = 1.0
        return out
    raise ValueError(f"unknown baseline mode {mode!r}")


@dataclass
class EvalReport:
    tau: float
    success_threshold: float
    consensus_count: int
    n_scored: int
    n_skipped: int
    success_rate: float
    ci_half_width: float
    auc: float
    ciou_by_id: dict = field(default_factory=dict)
    per_subject: dict = field(default_factory=dict)
    baselines: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "success_threshold": self.success_threshold,
            "consensus_count": self.consensus_count,
            "n_scored": self.n_scored,
            "n_skipped": self.n_skipped,
            "success_rate": self.success_rate,
            "ci_half_width": self.ci_half_width,
            "auc": self.auc,
            "ciou_by_id": self.ciou_by_id,
            "per_subject": self.per_subject,
            "baselines": self.baselines,
        }

    def format_table(self) -> str:
        lines = [
            f"scored samples     {self.n_scored} (skipped {self.n_skipped})",
            f"success rate       {self.success_rate:.3f} +/- {self.ci_half_width:.3f} (cIoU tau={self.tau})",
            f"AUC                {self.auc:.3f}",
        ]
        if self.per_subject:
            lines.append("per-subject IoU:")
            for sid in sorted(self.per_subject):
                lines.append(f"  {sid:12s} {self.per_subject[sid]:.3f}")
        if self.baselines:
            lines.append("baselines (success rate / AUC):")
            for name in sorted(self.baselines):
                b = self.baselines[name]
                lines.append(f"  {name:16s} {b['success_rate']:.3f} / {b['auc']:.3f}")
        return "\n".join(lines)


def evaluate_predictions(
    responses: dict,
    annotations: dict,
    tau: float = 0.5,
    success_threshold: float = 0.5,
    consensus_count: int = 2,
    include_baselines: bool = True,
    baseline_seed: int = 0,
) -> EvalReport:
    """Score response maps (id -> H x W array) against annotations.

    Samples whose annotations are all ambient are excluded and counted.
    """
    if not responses:
        raise InputError("no predictions to evaluate")
    scored = {}
    subject_scores = {}
    skipped = 0
    for sid in sorted(responses):
        if sid not in annotations:
            raise InputError(f"no annotation for prediction id {sid!r}")
        ann = annotations[sid]
        subjects = ann.object_subjects()
        if not subjects:
            skipped += 1
            continue
        g = consensus_map(subjects, responses[sid].shape, consensus_count)
        if g.sum() == 0.0:
            skipped += 1
            continue
        scored[sid] = ciou(responses[sid], g, tau)
        for subj_id, score in per_subject_iou(responses[sid], ann, tau).items():
            subject_scores.setdefault(subj_id, []).append(score)
    if not scored:
        raise InputError("all samples were skipped; nothing to score")
    values = list(scored.values())
    rate, half_width = success_rate(values, success_threshold)
    report = EvalReport(
        tau=tau,
        success_threshold=success_threshold,
        consensus_count=consensus_count,
        n_scored=len(scored),
        n_skipped=skipped,
        success_rate=rate,
        ci_half_width=half_width,
        auc=auc(values),
        ciou_by_id=scored,
        per_subject={k: float(np.mean(v)) for k, v in sorted(subject_scores.items())},
    )
    if report.per_subject:
        report.per_subject["average"] = float(np.mean(list(report.per_subject.values())))
    if include_baselines:
        rng = np.random.default_rng(baseline_seed)
        for mode in ("random_pattern", "center_box"):
            b_values = []
            for sid in sorted(scored):
                ann = annotations[sid]
                g = consensus_map(ann.object_subjects(), responses[sid].shape, consensus_count)
                resp = baseline_response(responses[sid].shape, mode, rng)
                b_values.append(ciou(resp, g, tau))
            b_rate, _ = success_rate(b_values, success_threshold)
            report.baselines[mode] = {"success_rate": b_rate, "auc": auc(b_values)}
    return report
