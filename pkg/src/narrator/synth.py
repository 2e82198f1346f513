"""Scripted synthetic detection streams with ground truth.

Each supported action class has a motion profile that sketches the verb's
qualitative shape (an approach decelerates to rest near the patient, a
pick-up style carry moves both participants together, a collision stops
abruptly on contact, ...).  True detections get configurable score/center
jitter, dropouts, and flow hints; distractor detections of the same object
classes are sprinkled uniformly with scores drawn below the true-score mode.
Generation is deterministic for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SynthError
from .scene import BoundingBox, Detection, Scene, cap_candidates

TRUE_SCORE = 2.0
DISTRACTOR_SCORE = 0.9
DISTRACTOR_SCORE_SPREAD = 0.35
TRAINED_THRESHOLD = 1.0

BOX_SIZES: dict[str, tuple[float, float]] = {
    "person": (46.0, 110.0),
    "chair": (60.0, 80.0),
    "small-ball": (36.0, 36.0),
    "big-ball": (90.0, 90.0),
    "bag": (44.0, 52.0),
    "cart": (72.0, 60.0),
    "skateboard": (60.0, 20.0),
    "dog": (70.0, 48.0),
    "mailbox": (40.0, 70.0),
    "table": (110.0, 68.0),
}

# part offsets as fractions of (w, h) from the box center
POSE_NEUTRAL = ((0.0, -0.36), (0.0, -0.10), (-0.16, 0.38), (0.16, 0.38))
POSE_RAISED = ((0.0, -0.44), (0.26, -0.30), (-0.16, 0.38), (0.16, 0.38))
POSES = (POSE_NEUTRAL, POSE_RAISED)


@dataclass
class NoiseSpec:
    score_jitter: float = 0.0
    center_jitter: float = 0.0
    distractor_rate: float = 0.0   # expected distractors per frame per class
    dropout: float = 0.0           # per-frame true-detection dropout probability
    flow_jitter: float = 0.0
    part_jitter: float = 0.0


NOISE_PRESETS: dict[str, NoiseSpec] = {
    "clean": NoiseSpec(),
    "medium": NoiseSpec(score_jitter=0.25, center_jitter=2.0, distractor_rate=1.0,
                        dropout=0.05, flow_jitter=0.5, part_jitter=1.5),
    "hard": NoiseSpec(score_jitter=0.5, center_jitter=5.0, distractor_rate=3.0,
                      dropout=0.15, flow_jitter=1.0, part_jitter=3.0),
}


@dataclass
class ParticipantSpec:
    object_class: str
    role: str                                   # agent | patient
    hsv: tuple[float, float, float] | None = None


@dataclass
class EventScript:
    action_class: str
    duration: int = 72
    width: float = 640.0
    height: float = 480.0
    fps: float = 30.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    patient_hsv: tuple[float, float, float] | None = None


@dataclass
class GroundTruth:
    action_class: str
    roles: dict[str, int]                       # role -> participant index
    object_classes: list[str]
    boxes: list[list[BoundingBox]]              # [participant][frame]


@dataclass
class _Participant:
    spec: ParticipantSpec
    centers: np.ndarray                          # (T, 2)
    size: tuple[float, float]
    poses: list[int] | None = None               # per-frame pose prototype index


def _hold(point: tuple[float, float], t: int) -> np.ndarray:
    return np.tile(np.asarray(point, dtype=float), (t, 1))


def _approach(start, target, speed, stop_gap, t) -> np.ndarray:
    """Move from start toward target at constant speed, halting at stop_gap."""
    pos = np.asarray(start, dtype=float)
    target = np.asarray(target, dtype=float)
    out = np.empty((t, 2))
    for i in range(t):
        out[i] = pos
        gap = float(np.linalg.norm(target - pos))
        if gap > stop_gap:
            step = min(speed, gap - stop_gap)
            pos = pos + step * (target - pos) / gap
    return out


def _profile(script: EventScript, rng: np.random.Generator) -> list[_Participant]:
    t = script.duration
    w, h = script.width, script.height
    verb = script.action_class
    jx = float(rng.uniform(-18, 18))
    jy = float(rng.uniform(-12, 12))

    def person(centers, poses=None):
        return _Participant(ParticipantSpec("person", "agent"),
                            np.asarray(centers, dtype=float),
                            BOX_SIZES["person"], poses)

    def patient(cls, centers):
        return _Participant(ParticipantSpec(cls, "patient", script.patient_hsv),
                            np.asarray(centers, dtype=float), BOX_SIZES[cls])

    if verb == "approached":
        target = (0.66 * w + jx, 0.62 * h + jy)
        agent = _approach((0.14 * w + jx, 0.62 * h + jy), target,
                          speed=float(rng.uniform(3.6, 4.8)), stop_gap=72, t=t)
        return [person(agent), patient("chair", _hold(target, t))]
    if verb == "fled":
        anchor = (0.62 * w + jx, 0.60 * h + jy)
        top_speed = float(rng.uniform(6.4, 7.4))
        pos = np.array([anchor[0] - 64.0, anchor[1]])
        track = np.empty((t, 2))
        speed = 0.0
        for i in range(t):
            track[i] = pos
            speed = min(speed + 0.24, top_speed)
            pos = pos + np.array([-speed, 0.0])
            pos[0] = max(pos[0], 0.06 * w)
        return [person(track), patient("dog", _hold(anchor, t))]
    if verb == "chased":
        speed = float(rng.uniform(4.6, 5.6))
        base_y = 0.58 * h + jy
        xs = 0.12 * w + jx + speed * np.arange(t)
        agent = np.column_stack([xs, np.full(t, base_y)])
        lead = np.column_stack([xs + 92.0, np.full(t, base_y)])
        return [person(agent), patient("cart", lead)]
    if verb == "jumped":
        px, py = 0.56 * w + jx, 0.72 * h + jy
        speed = float(rng.uniform(4.2, 5.2))
        xs = 0.12 * w + jx + speed * np.arange(t)
        ys = np.full(t, py)
        width_px = 88.0
        arc = 1.0 - ((xs - px) / width_px) ** 2
        ys = ys - 132.0 * np.clip(arc, 0.0, None)
        return [person(np.column_stack([xs, ys])),
                patient("small-ball", _hold((px, py + 36.0), t))]
    if verb == "fell":
        floor_y = 0.78 * h
        x = 0.50 * w + jx
        ys = []
        y, vy = 0.22 * h + jy, 0.0
        wait = t // 6
        for i in range(t):
            ys.append(y)
            if i >= wait and y < floor_y:
                vy += 0.55
                y = min(y + vy, floor_y)
        agent = np.column_stack([np.full(t, x), ys])
        return [person(agent), patient("mailbox", _hold((x + 70.0, floor_y), t))]
    if verb == "carried":
        speed = float(rng.uniform(3.0, 3.8))
        xs = 0.16 * w + jx + speed * np.arange(t)
        y = 0.60 * h + jy
        agent = np.column_stack([xs, np.full(t, y)])
        held = np.column_stack([xs + 26.0, np.full(t, y + 16.0)])
        return [person(agent), patient("bag", held)]
    if verb == "bounced":
        floor_y = 0.72 * h + jy
        x0 = 0.18 * w + jx
        vy, y = 0.0, 0.30 * h
        ys = []
        for _ in range(t):
            ys.append(y)
            vy += 0.5
            y += vy
            if y >= floor_y:
                y = floor_y
                vy = -abs(vy) * 0.75
        xs = x0 + 2.1 * np.arange(t)
        return [person(np.column_stack([xs, ys])),
                patient("big-ball", _hold((0.78 * w, floor_y), t))]
    if verb == "collided":
        target = np.array([0.68 * w + jx, 0.60 * h + jy])
        speed = float(rng.uniform(6.2, 7.2))
        agent = _approach((0.14 * w + jx, target[1]), tuple(target), speed, 52.0, t)
        hit_frame = next(
            (i for i in range(t)
             if np.linalg.norm(agent[i] - target) <= 53.0), t)
        pat = np.tile(target, (t, 1))
        for i in range(hit_frame, min(hit_frame + 4, t)):
            pat[i:, 0] += 6.0
        return [person(agent), patient("table", pat)]
    if verb in ("lifted", "dropped"):
        center = (0.5 * w + jx, 0.58 * h + jy)
        ramp = np.clip((np.arange(t) - t / 3.0) / (t / 3.0), 0.0, 1.0)
        if verb == "dropped":
            ramp = 1.0 - ramp
        poses = [int(round(r)) for r in ramp]
        return [person(_hold(center, t), poses)]
    if verb == "walked":
        speed = float(rng.uniform(2.8, 3.6))
        xs = 0.14 * w + jx + speed * np.arange(t)
        return [person(np.column_stack([xs, np.full(t, 0.6 * h + jy)]))]
    if verb == "ran":
        speed = float(rng.uniform(6.4, 7.2))
        xs = 0.08 * w + jx + speed * np.arange(t)
        return [person(np.column_stack([xs, np.full(t, 0.6 * h + jy)]))]
    raise SynthError(f"no motion profile for action class {script.action_class!r}")


SUPPORTED_CLASSES = (
    "approached", "fled", "chased", "jumped", "fell", "carried", "bounced",
    "collided", "lifted", "dropped", "walked", "ran",
)
TWO_TRACK_CLASSES = SUPPORTED_CLASSES[:8]


def _person_parts(participant: _Participant, frame: int, step: np.ndarray,
                  rng: np.random.Generator, jitter: float) -> tuple[tuple[float, float], ...]:
    w, h = participant.size
    pose_idx = participant.poses[frame] if participant.poses else 0
    fracs = [list(p) for p in POSES[pose_idx]]
    if float(np.linalg.norm(step)) > 0.5:
        swing = 0.05 * math.sin(0.8 * frame)
        fracs[2][0] += swing
        fracs[3][0] -= swing
    parts = []
    for fx, fy in fracs:
        dx = fx * w + (rng.normal(0.0, jitter) if jitter > 0 else 0.0)
        dy = fy * h + (rng.normal(0.0, jitter) if jitter > 0 else 0.0)
        parts.append((float(dx), float(dy)))
    return tuple(parts)


def generate_scene(script: EventScript) -> tuple[Scene, GroundTruth]:
    """Simulate one scripted event; returns the noisy scene and its truth."""
    if script.duration < 3:
        raise SynthError("scripts need at least 3 frames")
    rng = np.random.default_rng(script.seed)
    participants = _profile(script, rng)
    t_len = script.duration
    noise = script.noise

    for p in participants:
        half_w, half_h = p.size[0] / 2.0, p.size[1] / 2.0
        xs, ys = p.centers[:, 0], p.centers[:, 1]
        if (xs.min() < half_w or xs.max() > script.width - half_w
                or ys.min() < half_h or ys.max() > script.height - half_h):
            raise SynthError(
                f"{p.spec.object_class} trajectory leaves the {script.width:g}x"
                f"{script.height:g} frame"
            )

    scene = Scene(frame_count=t_len, fps=script.fps,
                  width=script.width, height=script.height)
    for p in participants:
        scene.thresholds.setdefault(p.spec.object_class, TRAINED_THRESHOLD)
        scene.detections.setdefault(p.spec.object_class,
                                    [[] for _ in range(t_len)])

    truth_boxes: list[list[BoundingBox]] = []
    roles: dict[str, int] = {}
    for idx, p in enumerate(participants):
        roles[p.spec.role] = idx
        w, h = p.size
        truth_boxes.append([BoundingBox(float(cx), float(cy), w, h)
                            for cx, cy in p.centers])
        steps = np.diff(p.centers, axis=0)
        steps = np.vstack([steps, steps[-1]]) if len(steps) else np.zeros((1, 2))
        for frame in range(t_len):
            dropped = noise.dropout > 0 and rng.random() < noise.dropout
            cx = float(p.centers[frame, 0])
            cy = float(p.centers[frame, 1])
            if noise.center_jitter > 0:
                cx += float(rng.normal(0.0, noise.center_jitter))
                cy += float(rng.normal(0.0, noise.center_jitter))
            score = TRUE_SCORE
            if noise.score_jitter > 0:
                score += float(rng.normal(0.0, noise.score_jitter))
            flow = steps[frame].copy()
            if noise.flow_jitter > 0:
                flow = flow + rng.normal(0.0, noise.flow_jitter, 2)
            parts: tuple[tuple[float, float], ...] = ()
            root = 0
            if p.spec.object_class == "person":
                parts = _person_parts(p, frame, steps[frame], rng, noise.part_jitter)
                root = p.poses[frame] if p.poses else 0
            if dropped:
                continue
            scene.detections[p.spec.object_class][frame].append(Detection(
                frame=frame, object_class=p.spec.object_class, score=score,
                box=BoundingBox(cx, cy, w, h), parts=parts, root_index=root,
                hsv=p.spec.hsv, flow=(float(flow[0]), float(flow[1])),
            ))

    if noise.distractor_rate > 0:
        for p in participants:
            cls = p.spec.object_class
            w, h = p.size
            for frame in range(t_len):
                for _ in range(int(rng.poisson(noise.distractor_rate))):
                    scale = float(rng.uniform(0.75, 1.3))
                    bw, bh = w * scale, h * scale
                    cx = float(rng.uniform(bw / 2, script.width - bw / 2))
                    cy = float(rng.uniform(bh / 2, script.height - bh / 2))
                    score = max(
                        DISTRACTOR_SCORE + float(rng.normal(0.0, DISTRACTOR_SCORE_SPREAD)),
                        0.05,
                    )
                    parts = ()
                    if cls == "person":
                        parts = tuple(
                            (float(fx * bw + rng.normal(0, 6.0)),
                             float(fy * bh + rng.normal(0, 6.0)))
                            for fx, fy in POSE_NEUTRAL
                        )
                    scene.detections[cls][frame].append(Detection(
                        frame=frame, object_class=cls, score=score,
                        box=BoundingBox(cx, cy, bw, bh), parts=parts,
                        flow=(float(rng.normal(0, 1.0)), float(rng.normal(0, 1.0))),
                    ))

    for cls, frames in scene.detections.items():
        scene.detections[cls] = [cap_candidates(dets, 12) for dets in frames]

    truth = GroundTruth(
        action_class=script.action_class, roles=roles,
        object_classes=[p.spec.object_class for p in participants],
        boxes=truth_boxes,
    )
    return scene, truth


def render_truth(truth: GroundTruth) -> str:
    from .scene import _fmt

    lines = [f"truth {truth.action_class}"]
    for role in ("agent", "patient"):
        if role in truth.roles:
            idx = truth.roles[role]
            lines.append(f"participant {idx} {role} {truth.object_classes[idx]}")
    for idx, boxes in enumerate(truth.boxes):
        for frame, b in enumerate(boxes):
            lines.append(
                f"gt {idx} {frame} {_fmt(b.x)} {_fmt(b.y)} {_fmt(b.w)} {_fmt(b.h)}"
            )
    return "\n".join(lines) + "\n"


def parse_truth(text: str) -> GroundTruth:
    action = None
    roles: dict[str, int] = {}
    classes: dict[int, str] = {}
    boxes: dict[int, dict[int, BoundingBox]] = {}
    for line in text.splitlines():
        toks = line.split()
        if not toks:
            continue
        if toks[0] == "truth":
            action = toks[1]
        elif toks[0] == "participant":
            idx, role, cls = int(toks[1]), toks[2], toks[3]
            roles[role] = idx
            classes[idx] = cls
        elif toks[0] == "gt":
            idx, frame = int(toks[1]), int(toks[2])
            boxes.setdefault(idx, {})[frame] = BoundingBox(
                float(toks[3]), float(toks[4]), float(toks[5]), float(toks[6])
            )
    if action is None:
        raise SynthError("truth file is missing its header")
    ordered = [classes[i] for i in sorted(classes)]
    box_lists = [
        [boxes[i][f] for f in sorted(boxes[i])] for i in sorted(boxes)
    ]
    return GroundTruth(action_class=action, roles=roles,
                       object_classes=ordered, boxes=box_lists)


def make_script(action_class: str, seed: int, preset: str = "clean",
                duration: int = 72,
                patient_hsv: tuple[float, float, float] | None = None) -> EventScript:
    if action_class not in SUPPORTED_CLASSES:
        raise SynthError(
            f"no motion profile for {action_class!r}; supported: "
            + ", ".join(SUPPORTED_CLASSES)
        )
    if preset not in NOISE_PRESETS:
        raise SynthError(f"unknown noise preset {preset!r}")
    return EventScript(action_class=action_class, duration=duration,
                       noise=NOISE_PRESETS[preset], seed=seed,
                       patient_hsv=patient_hsv)
