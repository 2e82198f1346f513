"""End-to-end wiring: corpus -> bank, scene -> ranked classes -> sentences."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .classifier import (
    ActionModelBank,
    ScoredAction,
    TrainingClip,
    classify_scene,
    roc_curve,
    train_bank,
)
from .config import Config
from .errors import ModelError
from .lexicon import pooled_class
from .nlg import generate_sentence
from .scene import Scene, parse_scene
from .synth import GroundTruth, parse_truth
from .tracking import Track, track_scene

log = logging.getLogger(__name__)


@dataclass
class CorpusItem:
    scene: Scene
    truth: GroundTruth
    name: str = ""


def load_corpus(directory: str | Path, per_frame_cap: int = 12) -> list[CorpusItem]:
    """Read every <name>.scene / <name>.truth pair under a directory."""
    directory = Path(directory)
    items = []
    for scene_path in sorted(directory.glob("*.scene")):
        truth_path = scene_path.with_suffix(".truth")
        if not truth_path.exists():
            raise ModelError(f"missing truth file for {scene_path.name}")
        items.append(CorpusItem(
            scene=parse_scene(scene_path.read_text(), per_frame_cap),
            truth=parse_truth(truth_path.read_text()),
            name=scene_path.stem,
        ))
    if not items:
        raise ModelError(f"no .scene files under {directory}")
    return items


def clip_from_item(item: CorpusItem, cfg: Config) -> TrainingClip | None:
    """Track a labeled scene and map tracks to roles via the truth classes.

    Returns None (with a warning) when the tracker fails to produce a track
    for a required role.
    """
    tracks = track_scene(item.scene, cfg)
    by_class: dict[str, Track] = {}
    for track in tracks:
        by_class.setdefault(track.object_class, track)

    def resolve(role: str) -> Track | None:
        idx = item.truth.roles.get(role)
        if idx is None:
            return None
        return by_class.get(pooled_class(item.truth.object_classes[idx]))

    agent = resolve("agent")
    if agent is None:
        log.warning("%s: tracker produced no agent track; clip skipped", item.name)
        return None
    patient = resolve("patient")
    if "patient" in item.truth.roles and patient is None:
        log.warning("%s: tracker produced no patient track; clip skipped", item.name)
        return None
    return TrainingClip(verb=item.truth.action_class, agent=agent, patient=patient)


def train_from_corpus(items: list[CorpusItem], cfg: Config) -> ActionModelBank:
    clips = [clip for item in items if (clip := clip_from_item(item, cfg)) is not None]
    if not clips:
        raise ModelError("no usable training clips (tracking failed everywhere)")
    return train_bank(clips, cfg)


def classify_item(bank: ActionModelBank, scene: Scene,
                  cfg: Config) -> list[ScoredAction]:
    return classify_scene(bank, track_scene(scene, cfg))


def describe_scene(bank: ActionModelBank, scene: Scene, cfg: Config,
                   top_k: int | None = None) -> list[tuple[int, str, str]]:
    """(rank, verb, sentence) for the top-k most likely action classes."""
    top_k = top_k or cfg.top_k
    tracks = track_scene(scene, cfg)
    ranked = classify_scene(bank, tracks)
    by_id = {t.track_id: t for t in tracks}
    out = []
    for rank, scored in enumerate(ranked[:top_k], start=1):
        agent = by_id[scored.roles.agent]
        patient = by_id.get(scored.roles.patient) if scored.roles.patient is not None else None
        out.append((rank, scored.verb,
                    generate_sentence(scored.verb, agent, patient, bank, cfg)))
    return out


def evaluate_corpus(bank: ActionModelBank, items: list[CorpusItem],
                    cfg: Config) -> dict[str, tuple[list[tuple[float, float]], float]]:
    """Per-class ROC over a labeled corpus.

    Every scene is scored against every class with an applicable model; the
    class's positives are the scenes labeled with it.  Classes without both a
    positive and a negative are skipped; an empty result is an error.
    """
    scored: list[tuple[str, dict[str, float]]] = []
    for item in items:
        ranked = classify_item(bank, item.scene, cfg)
        scored.append((item.truth.action_class, {r.verb: r.score for r in ranked}))

    results = {}
    for verb in sorted(bank.entries):
        labels = []
        scores = []
        for label, per_class in scored:
            if verb not in per_class:
                continue
            labels.append(label == verb)
            scores.append(per_class[verb])
        if not any(labels) or all(labels):
            continue
        results[verb] = roc_curve(scores, labels)
    if not results:
        raise ModelError("evaluation corpus has no class with both positives "
                         "and negatives")
    return results
