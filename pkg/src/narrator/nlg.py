"""Render a detected action class plus role-assigned tracks as one sentence.

The verb selects a fixed template; the subject's filtered average velocity
drives the optional adverb (quickly / slowly) and the optional motion
adjunct, which is either endogenous (leftward, ...) or exogenous (from the
left, ...) per template.  Noun phrases are referring expressions: head noun
from the object class, adjectives only as licensed (size/shape gated on
track stability, color and "other" only to break coreference, pose
adjectives only when the track carries part-based posture evidence), and
determiners chosen by uniqueness (the), subject-PP coreference (that), or
neither (some).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .classifier import ActionModelBank, ObjectStats
from .config import Config
from .errors import GenerationError
from .features import direction, finite_difference, wrap_angle
from .lexicon import (
    ENTERABLE_CLASSES,
    HANDOVER_SOURCE_CLASSES,
    OBJECT_CLASSES,
    REFLEXIVE_ITSELF,
    REFLEXIVE_THEMSELVES,
    TEMPLATES,
    noun_for,
)
from .tracking import Track, compute_score_stats, mean_speed, person_pose_label

ADJECTIVE_ORDER = ("other", "size", "shape", "color", "restrictive")

ENDO_WORDS = {"right": "rightward", "up": "upward", "left": "leftward", "down": "downward"}
EXO_WORDS = {
    "right": "from the left", "up": "from below",
    "left": "from the right", "down": "from above",
}
# Relation of the subject to the reference object, keyed by the quadrant of
# the subject-to-reference vector.
SPATIAL_WORDS = {
    "right": "to the left of", "left": "to the right of",
    "up": "below", "down": "above",
}


# --- templates --------------------------------------------------------------

@dataclass(frozen=True)
class Element:
    kind: str                      # subject|object|word|adv|adjunct|group
    words: tuple[str, ...] = ()
    has_y: bool = False
    style: str | None = None       # endo|exo for adjunct elements


@dataclass(frozen=True)
class Template:
    verb: str
    elements: tuple[Element, ...]

    @property
    def has_adverb_slot(self) -> bool:
        return any(e.kind == "adv" for e in self.elements)

    @property
    def adjunct_style(self) -> str | None:
        for e in self.elements:
            if e.kind == "adjunct":
                return e.style
        return None

    @property
    def requires_object(self) -> bool:
        return any(e.kind == "object" for e in self.elements)


def _parse_template(verb: str, text: str) -> Template:
    elements: list[Element] = []
    for token in re.findall(r"\[[^\]]+\]|\S+", text):
        if token == "X":
            elements.append(Element("subject"))
        elif token == "Y":
            elements.append(Element("object"))
        elif token == "[Adv]":
            elements.append(Element("adv"))
        elif token in ("[PP_endo]", "[PP_exo]"):
            elements.append(Element("adjunct", style=token[4:-1]))
        elif token.startswith("["):
            inner = token[1:-1].split()
            has_y = "Y" in inner
            words = tuple(w for w in inner if w != "Y")
            elements.append(Element("group", words=words, has_y=has_y))
        else:
            elements.append(Element("word", words=(token,)))
    return Template(verb=verb, elements=tuple(elements))


PARSED_TEMPLATES: dict[str, Template] = {
    verb: _parse_template(verb, text) for verb, text in TEMPLATES.items()
}


# --- motion summaries -------------------------------------------------------

def subject_motion(track: Track, v1: float) -> tuple[float, float]:
    """Magnitude and orientation of the average velocity over frames whose
    speed exceeds v1.  Returns (0, 0) when no frame passes the filter."""
    centers = track.centers()
    if len(centers) < 2:
        return (0.0, 0.0)
    vx = finite_difference(centers[:, 0], track.fps)
    vy = finite_difference(centers[:, 1], track.fps)
    speed = np.hypot(vx, vy)
    passing = speed > v1
    if not np.any(passing):
        return (0.0, 0.0)
    mean_vx = float(vx[passing].mean())
    mean_vy = float(vy[passing].mean())
    return (math.hypot(mean_vx, mean_vy), float(direction(mean_vx, mean_vy)))


def quadrant(angle: float, boundary_deg: float = 45.0) -> str:
    """Quantize an angle into right/up/left/down; boundary angles fall into
    the horizontal bins."""
    deg = math.degrees(float(wrap_angle(angle)))
    if -boundary_deg <= deg <= boundary_deg:
        return "right"
    if boundary_deg < deg < 180.0 - boundary_deg:
        return "up"
    if -(180.0 - boundary_deg) < deg < -boundary_deg:
        return "down"
    return "left"


def choose_adverb(v1: float, v2: float, v3: float, v: float) -> str | None:
    """quickly above v2, slowly inside [v1, v3], otherwise none."""
    if v > v2:
        return "quickly"
    if v1 <= v <= v3:
        return "slowly"
    return None


def choose_adjunct(style: str | None, v: float, v1: float, orientation: float,
                   boundary_deg: float = 45.0) -> str | None:
    """Motion-direction adjunct; omitted without a slot or when v < v1."""
    if style is None or v < v1:
        return None
    quad = quadrant(orientation, boundary_deg)
    return ENDO_WORDS[quad] if style == "endo" else EXO_WORDS[quad]


def spatial_pp(subject: Track, reference: Track, v1: float,
               boundary_deg: float = 45.0) -> str | None:
    """Static 2D relation of the subject to the reference object, emitted
    only when both tracks are stationary (average speed below v1)."""
    if mean_speed(subject) >= v1 or mean_speed(reference) >= v1:
        return None
    s = subject.centers().mean(axis=0)
    r = reference.centers().mean(axis=0)
    if np.allclose(s, r):
        return None
    angle = float(direction(r[0] - s[0], r[1] - s[1]))
    return SPATIAL_WORDS[quadrant(angle, boundary_deg)]


# --- referring expressions --------------------------------------------------

@dataclass
class NounPhrasePlan:
    referent: int
    head: str
    determiner: str = "some"
    adjectives: dict = field(default_factory=dict)   # slot -> word
    pp_relation: str | None = None
    pp_reference: int | None = None

    def adjective_words(self) -> tuple[str, ...]:
        return tuple(
            self.adjectives[slot] for slot in ADJECTIVE_ORDER
            if slot in self.adjectives
        )


def track_color(track: Track, cfg: Config) -> str | None:
    """Color word from the track's average HSV, when the evidence is strong
    enough (very dark, very bright, or saturated)."""
    hsvs = [d.hsv for d in track.selections if d.hsv is not None]
    if not hsvs:
        return None
    hues = np.radians([h for h, _, _ in hsvs])
    mean_h = math.degrees(math.atan2(
        float(np.sin(hues).mean()), float(np.cos(hues).mean())
    )) % 360.0
    mean_s = float(np.mean([s for _, s, _ in hsvs]))
    mean_v = float(np.mean([v for _, _, v in hsvs]))
    if mean_v <= cfg.color_black_v:
        return "black"
    if mean_v >= cfg.color_white_v:
        return "white"
    if mean_s >= cfg.color_sat_min:
        names = ("red", "yellow", "green", "teal", "blue", "pink")
        half = cfg.hue_bin_deg / 2.0
        return names[int(((mean_h + half) % 360.0) // cfg.hue_bin_deg) % len(names)]
    return None


def _is_stable(track: Track, cfg: Config) -> bool:
    if track.score_stats is None:
        compute_score_stats(track)
    aspects = np.array([d.box.aspect() for d in track.selections])
    return (track.score_stats.variance <= cfg.size_score_var_max
            and float(aspects.var()) <= cfg.size_aspect_var_max)


def _base_adjectives(track: Track, stats: ObjectStats | None,
                     cfg: Config) -> dict:
    """Size, shape, and restrictive/pose adjectives licensed for every
    mention (color and "other" are reserved for coreference breaking)."""
    adjs: dict = {}
    entry = OBJECT_CLASSES.get(track.object_class)
    stable = _is_stable(track, cfg)
    area = float(np.mean([d.box.area() for d in track.selections]))
    aspect = float(np.mean([d.box.aspect() for d in track.selections]))
    if stable:
        if entry is not None and entry.size is not None:
            adjs["size"] = entry.size
        elif stats is not None:
            if area >= stats.beta * stats.mean_area:
                adjs["size"] = "big"
            elif area <= stats.alpha * stats.mean_area:
                adjs["size"] = "small"
        if stats is not None:
            low = aspect <= cfg.aspect_low_factor * stats.mean_aspect
            high = aspect >= cfg.aspect_high_factor * stats.mean_aspect
            big = area >= stats.beta * stats.mean_area
            small = area <= stats.alpha * stats.mean_area
            if low and big:
                adjs["shape"] = "tall"
            elif high and small:
                adjs["shape"] = "short"
            elif low and small:
                adjs["shape"] = "narrow"
            elif high and big:
                adjs["shape"] = "wide"
    if entry is not None and entry.person_pose:
        pose_class = person_pose_label(track, cfg.pose_coverage_min)
        if pose_class is not None:
            adjs["restrictive"] = OBJECT_CLASSES[pose_class].restrictive
    elif entry is not None and entry.restrictive is not None:
        adjs["restrictive"] = entry.restrictive
    return adjs


def plan_noun_phrases(participants: list[Track], bank: ActionModelBank,
                      cfg: Config | None = None) -> dict[int, NounPhrasePlan]:
    """Jointly plan referring expressions for the event participants.

    Colliding descriptions escalate: a color adjective for nonhuman
    participants when it separates them, then an initial "other" on every
    later-mentioned participant.  "the" is only chosen when the head noun
    plus adjectives match a single participant; "other" forbids "the".
    """
    cfg = cfg or Config()
    plans: dict[int, NounPhrasePlan] = {}
    colors: dict[int, str | None] = {}
    human: dict[int, bool] = {}
    for track in participants:
        stats = bank.object_stats.get(track.object_class) if bank else None
        plan = NounPhrasePlan(referent=track.track_id, head=noun_for(track.object_class))
        plan.adjectives = _base_adjectives(track, stats, cfg)
        plans[track.track_id] = plan
        colors[track.track_id] = track_color(track, cfg)
        entry = OBJECT_CLASSES.get(track.object_class)
        human[track.track_id] = bool(entry and entry.person_pose)

    def description(plan: NounPhrasePlan) -> tuple:
        words = tuple(w for slot, w in sorted(plan.adjectives.items()) if slot != "other")
        return (plan.head, words)

    # break identical descriptions with color where it separates nonhumans
    order = [t.track_id for t in participants]
    for i, tid in enumerate(order):
        twins = [o for o in order if o != tid
                 and description(plans[o]) == description(plans[tid])]
        if not twins:
            continue
        group = [tid] + twins
        if all(not human[g] for g in group):
            group_colors = {g: colors[g] for g in group}
            distinct = len(set(group_colors.values())) == len(group)
            if distinct and all(c is not None for c in group_colors.values()):
                for g in group:
                    plans[g].adjectives["color"] = group_colors[g]

    # any remaining collisions take an initial "other" on later mentions
    seen: list[int] = []
    for tid in order:
        for prev in seen:
            if description(plans[prev]) == description(plans[tid]):
                plans[tid].adjectives["other"] = "other"
                break
        seen.append(tid)

    # determiners: "the" only for a uniquely matching description
    def matches(plan: NounPhrasePlan, other_id: int) -> bool:
        other = plans[other_id]
        if other.head != plan.head:
            return False
        applicable = set(other.adjectives.values())
        if colors[other_id] is not None:
            applicable.add(colors[other_id])
        mine = {w for slot, w in plan.adjectives.items() if slot != "other"}
        return mine <= applicable

    for tid in order:
        plan = plans[tid]
        ambiguous = any(matches(plan, other) for other in order if other != tid)
        if "other" in plan.adjectives or ambiguous:
            plan.determiner = "some"
        else:
            plan.determiner = "the"
    return plans


def plan_noun_phrase(track: Track, others: list[Track], bank: ActionModelBank,
                     cfg: Config | None = None) -> NounPhrasePlan:
    """Single-participant view of the joint planner."""
    return plan_noun_phrases([track] + list(others), bank, cfg)[track.track_id]


def render_noun_phrase(plan: NounPhrasePlan, plans: dict[int, NounPhrasePlan],
                       determiner: str | None = None) -> str:
    words = [determiner or plan.determiner]
    words.extend(plan.adjective_words())
    words.append(plan.head)
    if plan.pp_relation is not None and plan.pp_reference is not None:
        words.append(plan.pp_relation)
        words.append(render_noun_phrase(plans[plan.pp_reference], plans))
    return " ".join(words)


def choose_object_form(verb: str, patient: Track | None) -> str:
    """np | pronoun:<word> for a required object slot."""
    if patient is None:
        if verb in REFLEXIVE_THEMSELVES:
            return "pronoun:themselves"
        if verb in REFLEXIVE_ITSELF:
            return "pronoun:itself"
        return "pronoun:something"
    if verb in ("entered", "exited") and patient.object_class not in ENTERABLE_CLASSES:
        return "pronoun:something"
    return "np"


def _include_group(element: Element, verb: str, patient: Track | None) -> bool:
    if element.has_y:
        return patient is not None
    if verb == "received":
        return patient is not None and patient.object_class in HANDOVER_SOURCE_CLASSES
    return False


def generate_sentence(verb: str, agent: Track, patient: Track | None,
                      bank: ActionModelBank, cfg: Config | None = None) -> str:
    """Instantiate the verb's template for the given role-assigned tracks."""
    cfg = cfg or Config()
    template = PARSED_TEMPLATES.get(verb)
    if template is None:
        raise GenerationError(f"no template for action class {verb!r}")
    if agent is None:
        raise GenerationError("the agent role is required")

    entry = bank.entries.get(verb) if bank is not None else None
    v1 = entry.v1 if entry else 0.0
    v2 = entry.v2 if entry else 0.0
    v3 = entry.v3 if entry else 0.0

    subject, obj = agent, patient
    if (verb in ("approached", "fled") and patient is not None
            and mean_speed(agent) < v1 and mean_speed(patient) > mean_speed(agent)):
        subject, obj = patient, agent

    v, orientation = subject_motion(subject, v1)
    adverb = choose_adverb(v1, v2, v3, v) if template.has_adverb_slot else None
    adjunct = choose_adjunct(template.adjunct_style, v, v1, orientation,
                             cfg.quadrant_boundary_deg)

    participants = [subject] + ([obj] if obj is not None else [])
    plans = plan_noun_phrases(participants, bank, cfg)
    subject_plan = plans[subject.track_id]

    pp_ref: int | None = None
    if obj is not None:
        relation = spatial_pp(subject, obj, v1, cfg.quadrant_boundary_deg)
        if relation is not None:
            subject_plan.pp_relation = relation
            subject_plan.pp_reference = obj.track_id
            pp_ref = obj.track_id

    object_form = choose_object_form(verb, obj) if template.requires_object else "np"

    def render_object() -> str:
        if object_form.startswith("pronoun:"):
            return object_form.split(":", 1)[1]
        assert obj is not None
        determiner = "that" if pp_ref == obj.track_id else None
        return render_noun_phrase(plans[obj.track_id], plans, determiner)

    words: list[str] = []
    for element in template.elements:
        if element.kind == "subject":
            words.append(render_noun_phrase(subject_plan, plans))
        elif element.kind == "word":
            words.extend(element.words)
        elif element.kind == "adv":
            if adverb:
                words.append(adverb)
        elif element.kind == "adjunct":
            if adjunct:
                words.append(adjunct)
        elif element.kind == "object":
            words.append(render_object())
        elif element.kind == "group":
            if _include_group(element, verb, obj):
                words.extend(element.words)
                if element.has_y:
                    words.append(render_object())
    sentence = " ".join(" ".join(words).split())
    return sentence[0].upper() + sentence[1:] + "."
