"""Action-class model bank: training, role assignment, and evaluation.

Each action class carries up to two HMMs, one over single-track features and
one over agent+patient+pair features.  Scenes with two or more tracks are
scored only against two-track models, single-track scenes only against
one-track models.  The track-to-role mapping at test time is the ordered
pair of tracks with the highest forward likelihood.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .errors import ModelError, SchemaMismatchError
from .features import (
    ABLATIONS,
    Ablation,
    ClassRegistry,
    FeatureConfig,
    FeatureSeries,
    single_track_features,
    two_track_features,
)
from .hmm import Hmm, baum_welch, init_left_right, log_forward, parse_hmm, render_hmm
from .lexicon import ACTION_CLASSES, PERSON_CLASSES, pooled_class
from .posture import Codebook, parse_codebook, pose_vector, render_codebook
from .tracking import Track, mean_speed

log = logging.getLogger(__name__)

MIN_CLIPS_PER_MODEL = 2

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass
class ObjectStats:
    """Per-object-class size/shape statistics shared with sentence planning."""

    mean_area: float
    mean_aspect: float
    alpha: float
    beta: float


@dataclass
class ActionEntry:
    verb: str
    one_track: Hmm | None = None
    two_track: Hmm | None = None
    v1: float = 0.0
    v2: float = 0.0
    v3: float = 0.0
    decision_threshold: float = float("-inf")


@dataclass
class RoleAssignment:
    agent: int
    patient: int | None
    log_likelihood: float


@dataclass
class ScoredAction:
    verb: str
    score: float          # log-likelihood per frame
    roles: RoleAssignment


@dataclass
class TrainingClip:
    verb: str
    agent: Track
    patient: Track | None = None


@dataclass
class ActionModelBank:
    entries: dict[str, ActionEntry]
    object_stats: dict[str, ObjectStats]
    codebook: Codebook | None
    class_registry: ClassRegistry
    ablation_name: str
    n_parts: int
    max_roots: int
    role_search_cap: int = 6
    pose_coverage_min: float = 0.5

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            registry=self.class_registry,
            ablation=ABLATIONS[self.ablation_name],
            codebook=self.codebook,
            n_parts=self.n_parts,
            max_roots=self.max_roots,
        )


def speed_thresholds(speeds, v1_fraction: float = 0.5) -> tuple[float, float, float]:
    """(v1, v2, v3) from the tercile boundaries of training subject speeds.

    The slow/fast boundaries are the 33rd/67th percentiles; v1 (the minimum
    motion that counts at all) is a fraction of the lower boundary.  The
    v1 <= v3 <= v2 ordering is enforced by sorting.
    """
    speeds = np.asarray(list(speeds), dtype=float)
    if speeds.size == 0:
        return (0.0, 0.0, 0.0)
    lo = float(np.percentile(speeds, 100.0 / 3.0))
    hi = float(np.percentile(speeds, 200.0 / 3.0))
    v1, v3, v2 = sorted((v1_fraction * lo, lo, hi))
    return (v1, v2, v3)


def tripartition_stats(per_track_areas, per_track_aspects) -> ObjectStats:
    areas = np.asarray(list(per_track_areas), dtype=float)
    aspects = np.asarray(list(per_track_aspects), dtype=float)
    mean_area = float(areas.mean())
    mean_aspect = float(aspects.mean())
    if mean_area <= 0:
        raise ModelError("object areas must be positive")
    alpha = float(np.percentile(areas, 100.0 / 3.0)) / mean_area
    beta = float(np.percentile(areas, 200.0 / 3.0)) / mean_area
    if alpha > beta:
        alpha, beta = beta, alpha
    return ObjectStats(mean_area=mean_area, mean_aspect=mean_aspect,
                       alpha=alpha, beta=beta)


def _clip_series(clip: TrainingClip, fcfg: FeatureConfig,
                 two: bool) -> FeatureSeries:
    if two:
        assert clip.patient is not None
        return two_track_features(clip.agent, clip.patient, fcfg)
    return single_track_features(clip.agent, fcfg)


def train_bank(clips: list[TrainingClip], cfg: Config | None = None) -> ActionModelBank:
    """Train the per-class model bank from role-labeled clips.

    Builds the posture codebook from every person track's part displacements,
    per-object-class size statistics, per-class speed thresholds, and one HMM
    per (class, arity) with at least MIN_CLIPS_PER_MODEL clips.
    """
    cfg = cfg or Config()
    if not clips:
        raise ModelError("training requires at least one labeled clip")
    for clip in clips:
        if clip.verb not in ACTION_CLASSES:
            raise ModelError(f"unknown action class {clip.verb!r}")

    all_tracks: list[Track] = []
    for clip in clips:
        all_tracks.append(clip.agent)
        if clip.patient is not None:
            all_tracks.append(clip.patient)

    # posture codebook from pooled person part displacements
    vectors = []
    n_parts = 0
    for track in all_tracks:
        if pooled_class(track.object_class) != "person":
            continue
        for det in track.selections:
            if det.parts:
                n_parts = max(n_parts, len(det.parts))
    for track in all_tracks:
        if pooled_class(track.object_class) != "person":
            continue
        for det in track.selections:
            if det.parts:
                vectors.append(pose_vector(det, max_parts=n_parts))
    codebook = None
    if vectors:
        from .posture import build_codebook

        k = min(cfg.codebook_k, len(vectors))
        codebook = build_codebook(vectors, k=k, seed=cfg.codebook_seed)

    extra_classes = tuple(sorted({
        d.object_class for t in all_tracks for d in t.selections
    } - set(PERSON_CLASSES) - set(ClassRegistry().names)))
    registry = ClassRegistry(extra=extra_classes)

    # per-object-class area/aspect tripartitions
    by_class: dict[str, tuple[list[float], list[float]]] = {}
    for track in all_tracks:
        areas = [d.box.area() for d in track.selections]
        aspects = [d.box.aspect() for d in track.selections]
        bucket = by_class.setdefault(track.object_class, ([], []))
        bucket[0].append(float(np.mean(areas)))
        bucket[1].append(float(np.mean(aspects)))
    object_stats = {
        cls: tripartition_stats(areas, aspects)
        for cls, (areas, aspects) in by_class.items()
    }

    fcfg = FeatureConfig(
        registry=registry, ablation=ABLATIONS[cfg.ablation],
        codebook=codebook, n_parts=n_parts, max_roots=cfg.max_roots,
    )

    entries: dict[str, ActionEntry] = {}
    verbs = sorted({clip.verb for clip in clips})
    for vi, verb in enumerate(verbs):
        verb_clips = [c for c in clips if c.verb == verb]
        entry = ActionEntry(verb=verb)
        entry.v1, entry.v2, entry.v3 = speed_thresholds(
            (mean_speed(c.agent) for c in verb_clips), cfg.v1_fraction
        )
        training_lls: list[float] = []
        for arity, subset in (
            (1, verb_clips),
            (2, [c for c in verb_clips if c.patient is not None]),
        ):
            if len(subset) < MIN_CLIPS_PER_MODEL:
                if subset:
                    log.warning("class %s: only %d clip(s) for the %d-track model; omitted",
                                verb, len(subset), arity)
                continue
            series = [_clip_series(c, fcfg, two=arity == 2) for c in subset]
            schemas = {s.schema for s in series}
            if len(schemas) != 1:
                raise SchemaMismatchError(
                    f"class {verb}: {arity}-track clips produce inconsistent schemas"
                )
            seed = cfg.seed * 1009 + vi * 2 + arity
            model = init_left_right(
                series[0].schema, cfg.n_states, series, seed=seed,
                var_floor=cfg.var_floor, kappa_cap=cfg.kappa_cap,
                pseudo_count=cfg.pseudo_count,
            )
            model, _ = baum_welch(
                model, series, max_iters=cfg.em_max_iters, tol=cfg.em_tol,
                var_floor=cfg.var_floor, kappa_cap=cfg.kappa_cap,
                pseudo_count=cfg.pseudo_count,
            )
            if arity == 1:
                entry.one_track = model
            else:
                entry.two_track = model
            training_lls.extend(log_forward(model, s) / len(s) for s in series)
        if training_lls:
            entry.decision_threshold = float(
                np.quantile(training_lls, cfg.decision_quantile)
            )
        entries[verb] = entry

    return ActionModelBank(
        entries=entries, object_stats=object_stats, codebook=codebook,
        class_registry=registry, ablation_name=cfg.ablation, n_parts=n_parts,
        max_roots=cfg.max_roots, role_search_cap=cfg.role_search_cap,
        pose_coverage_min=cfg.pose_coverage_min,
    )


def assign_roles(model: Hmm, tracks: list[Track], fcfg: FeatureConfig,
                 search_cap: int = 6) -> RoleAssignment:
    """Maximum-likelihood ordered (agent, patient) pair over distinct tracks.

    Ties break to the lexicographically smallest (agent id, patient id) pair;
    incompatible pairs (schema mismatch or no temporal overlap) are skipped.
    """
    if len(tracks) < 2:
        raise ModelError("role assignment needs at least two tracks")
    if len(tracks) > search_cap:
        raise ModelError(
            f"{len(tracks)} tracks exceed the role search cap of {search_cap}"
        )
    from .errors import FeatureError

    ordered = sorted(tracks, key=lambda t: t.track_id)
    best: RoleAssignment | None = None
    for agent in ordered:
        for patient in ordered:
            if agent.track_id == patient.track_id:
                continue
            try:
                series = two_track_features(agent, patient, fcfg)
                ll = log_forward(model, series)
            except (SchemaMismatchError, FeatureError):
                continue
            if best is None or ll > best.log_likelihood:
                best = RoleAssignment(agent.track_id, patient.track_id, ll)
    if best is None:
        raise ModelError("no compatible (agent, patient) pair for this model")
    return best


def classify_scene(bank: ActionModelBank, tracks: list[Track]) -> list[ScoredAction]:
    """Rank action classes for a scene's tracks by per-frame log-likelihood.

    Two or more tracks consult only two-track models; exactly one track
    consults only one-track models.  Classes without an applicable model are
    skipped; the result is sorted by descending score, then by verb.
    """
    if not tracks:
        return []
    fcfg = bank.feature_config()
    results: list[ScoredAction] = []
    if len(tracks) >= 2:
        for verb in sorted(bank.entries):
            model = bank.entries[verb].two_track
            if model is None:
                continue
            try:
                roles = assign_roles(model, tracks, fcfg, bank.role_search_cap)
            except ModelError:
                continue
            agent = next(t for t in tracks if t.track_id == roles.agent)
            patient = next(t for t in tracks if t.track_id == roles.patient)
            overlap = min(agent.end, patient.end) - max(agent.start, patient.start)
            results.append(ScoredAction(verb, roles.log_likelihood / overlap, roles))
    else:
        track = tracks[0]
        for verb in sorted(bank.entries):
            model = bank.entries[verb].one_track
            if model is None:
                continue
            try:
                series = single_track_features(track, fcfg)
                ll = log_forward(model, series)
            except (SchemaMismatchError, ModelError):
                continue
            results.append(ScoredAction(
                verb, ll / len(series), RoleAssignment(track.track_id, None, ll)
            ))
    results.sort(key=lambda r: (-r.score, r.verb))
    return results


def roc_curve(scores, labels) -> tuple[list[tuple[float, float]], float]:
    """Threshold-sweep ROC points (sorted by FPR) and trapezoidal AUC.

    ``labels`` are truthy for positives.  Raises ModelError unless both a
    positive and a negative example are present.
    """
    scores = np.asarray(list(scores), dtype=float)
    labels = np.asarray(list(labels), dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ModelError("scores and labels must be equal-length vectors")
    n_pos = int(labels.sum())
    n_neg = int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ModelError("ROC needs at least one positive and one negative label")
    order = np.argsort(-scores, kind="stable")
    sorted_labels = labels[order]
    sorted_scores = scores[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    for i in range(len(sorted_scores)):
        if sorted_labels[i]:
            tp += 1
        else:
            fp += 1
        # emit a point only at distinct-threshold boundaries
        if i + 1 == len(sorted_scores) or sorted_scores[i + 1] != sorted_scores[i]:
            points.append((fp / n_neg, tp / n_pos))
    fprs = np.array([p[0] for p in points])
    tprs = np.array([p[1] for p in points])
    return points, float(_trapezoid(tprs, fprs))


# --- bank persistence -------------------------------------------------------

def save_bank(bank: ActionModelBank, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": 1,
        "ablation": bank.ablation_name,
        "n_parts": bank.n_parts,
        "max_roots": bank.max_roots,
        "role_search_cap": bank.role_search_cap,
        "pose_coverage_min": bank.pose_coverage_min,
        "extra_classes": [
            n for n in bank.class_registry.names
            if n not in ClassRegistry().names
        ],
        "object_stats": {
            cls: [s.mean_area, s.mean_aspect, s.alpha, s.beta]
            for cls, s in sorted(bank.object_stats.items())
        },
        "actions": {
            verb: {
                "v1": e.v1, "v2": e.v2, "v3": e.v3,
                "decision_threshold": e.decision_threshold,
                "one_track": e.one_track is not None,
                "two_track": e.two_track is not None,
            }
            for verb, e in sorted(bank.entries.items())
        },
    }
    (directory / "bank.meta").write_text(json.dumps(meta, indent=1, sort_keys=True))
    if bank.codebook is not None:
        (directory / "codebook.txt").write_text(render_codebook(bank.codebook))
    for verb, entry in bank.entries.items():
        if entry.one_track is not None:
            (directory / f"{verb}.1.hmm").write_text(render_hmm(entry.one_track))
        if entry.two_track is not None:
            (directory / f"{verb}.2.hmm").write_text(render_hmm(entry.two_track))


def load_bank(directory: str | Path) -> ActionModelBank:
    directory = Path(directory)
    meta_path = directory / "bank.meta"
    if not meta_path.exists():
        raise ModelError(f"no bank.meta under {directory}")
    meta = json.loads(meta_path.read_text())
    codebook = None
    cb_path = directory / "codebook.txt"
    if cb_path.exists():
        codebook = parse_codebook(cb_path.read_text())
    entries = {}
    for verb, info in meta["actions"].items():
        entry = ActionEntry(
            verb=verb, v1=info["v1"], v2=info["v2"], v3=info["v3"],
            decision_threshold=info["decision_threshold"],
        )
        if info["one_track"]:
            entry.one_track = parse_hmm((directory / f"{verb}.1.hmm").read_text())
        if info["two_track"]:
            entry.two_track = parse_hmm((directory / f"{verb}.2.hmm").read_text())
        entries[verb] = entry
    object_stats = {
        cls: ObjectStats(*vals) for cls, vals in meta["object_stats"].items()
    }
    return ActionModelBank(
        entries=entries, object_stats=object_stats, codebook=codebook,
        class_registry=ClassRegistry(extra=tuple(meta["extra_classes"])),
        ablation_name=meta["ablation"], n_parts=meta["n_parts"],
        max_roots=meta["max_roots"], role_search_cap=meta["role_search_cap"],
        pose_coverage_min=meta["pose_coverage_min"],
    )
