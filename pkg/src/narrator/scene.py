"""Detection-stream data model and the line-delimited scene file format.

A scene file looks like:

    scene <frame_count> <fps> <width> <height>
    threshold <class> <value>
    det <frame> <class> <score> <cx> <cy> <w> <h> [parts dx1 dy1 ...]
        [hsv H S V] [flow vx vy] [root <k>]

Detection lines must appear in non-decreasing frame order.  Unknown line
keywords and unknown trailing groups are ignored so the format can grow.
Scenes are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import SceneParseError, SceneStructureError

DEFAULT_PER_FRAME_CAP = 12

_DET_GROUPS = ("parts", "hsv", "flow", "root")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by center and size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def area(self) -> float:
        return self.w * self.h

    def aspect(self) -> float:
        return self.w / self.h


@dataclass(frozen=True)
class Detection:
    """One candidate box in one frame, with optional part/appearance payload."""

    frame: int
    object_class: str
    score: float
    box: BoundingBox
    parts: tuple[tuple[float, float], ...] = ()
    root_index: int = 0
    hsv: tuple[float, float, float] | None = None
    flow: tuple[float, float] | None = None
    synthetic_origin: bool = False

    def center(self) -> tuple[float, float]:
        return (self.box.x, self.box.y)

    def predicted_center(self) -> tuple[float, float]:
        """Center one frame ahead under the flow hint (identity without one)."""
        if self.flow is None:
            return (self.box.x, self.box.y)
        return (self.box.x + self.flow[0], self.box.y + self.flow[1])


@dataclass
class Scene:
    """Per-frame detection candidates grouped by object class.

    ``detections[cls][frame]`` is the candidate list for that class in that
    frame; every class holds exactly ``frame_count`` lists.  Candidate lists
    are capped to ``per_frame_cap`` entries, keeping the highest scores with
    ties broken by input order.
    """

    frame_count: int
    fps: float = 30.0
    width: float = 1280.0
    height: float = 720.0
    detections: dict[str, list[list[Detection]]] = field(default_factory=dict)
    thresholds: dict[str, float] = field(default_factory=dict)

    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def classes(self) -> list[str]:
        return sorted(self.detections)

    def trained_threshold(self, object_class: str) -> float:
        return self.thresholds.get(object_class, 0.0)


@dataclass
class ValidationReport:
    classes_present: list[str]
    coverage_gaps: dict[str, list[tuple[int, int]]]
    warnings: list[str]


def cap_candidates(candidates: list[Detection], cap: int) -> list[Detection]:
    """Keep the ``cap`` highest-scoring candidates, stable in input order."""
    if len(candidates) <= cap:
        return candidates
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].score, i))
    keep = sorted(order[:cap])
    return [candidates[i] for i in keep]


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the float exactly."""
    f = float(value)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SceneParseError(line_no, f"bad {what}: {token!r}") from None
    if not math.isfinite(value):
        raise SceneParseError(line_no, f"non-finite {what}: {token!r}")
    return value


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _parse_det(tokens: list[str], line_no: int, frame_count: int) -> Detection:
    if len(tokens) < 8:
        raise SceneParseError(line_no, "det line needs frame, class, score and box")
    try:
        frame = int(tokens[1])
    except ValueError:
        raise SceneParseError(line_no, f"bad frame index: {tokens[1]!r}") from None
    if frame < 0 or frame >= frame_count:
        raise SceneParseError(line_no, f"frame {frame} outside scene of {frame_count} frames")
    object_class = tokens[2]
    score = _parse_float(tokens[3], line_no, "score")
    cx = _parse_float(tokens[4], line_no, "cx")
    cy = _parse_float(tokens[5], line_no, "cy")
    w = _parse_float(tokens[6], line_no, "w")
    h = _parse_float(tokens[7], line_no, "h")
    if w <= 0 or h <= 0:
        raise SceneParseError(line_no, "box width/height must be positive")

    parts: tuple[tuple[float, float], ...] = ()
    hsv = None
    flow = None
    root = 0
    i = 8
    while i < len(tokens):
        kw = tokens[i]
        i += 1
        numbers: list[float] = []
        while i < len(tokens) and _is_number(tokens[i]):
            numbers.append(_parse_float(tokens[i], line_no, f"{kw} value"))
            i += 1
        if kw == "parts":
            if len(numbers) % 2 != 0:
                raise SceneParseError(line_no, "parts group needs dx dy pairs")
            parts = tuple((numbers[j], numbers[j + 1]) for j in range(0, len(numbers), 2))
        elif kw == "hsv":
            if len(numbers) != 3:
                raise SceneParseError(line_no, "hsv group needs H S V")
            hue, sat, val = numbers
            if not (0.0 <= hue < 360.0):
                raise SceneParseError(line_no, f"H out of [0,360): {hue}")
            if not (0.0 <= sat <= 1.0 and 0.0 <= val <= 1.0):
                raise SceneParseError(line_no, "S and V must lie in [0,1]")
            hsv = (hue, sat, val)
        elif kw == "flow":
            if len(numbers) != 2:
                raise SceneParseError(line_no, "flow group needs vx vy")
            flow = (numbers[0], numbers[1])
        elif kw == "root":
            if len(numbers) != 1 or numbers[0] != int(numbers[0]):
                raise SceneParseError(line_no, "root group needs one integer")
            root = int(numbers[0])
        # unknown keyword groups are ignored

    return Detection(
        frame=frame, object_class=object_class, score=score,
        box=BoundingBox(cx, cy, w, h), parts=parts, root_index=root,
        hsv=hsv, flow=flow,
    )


def parse_scene(data: bytes | str, per_frame_cap: int = DEFAULT_PER_FRAME_CAP) -> Scene:
    """Parse the scene file format, capping per-class per-frame candidates.

    Raises SceneParseError with a line number on malformed records and
    SceneStructureError when detection lines are not frame-ordered.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    scene: Scene | None = None
    pending: dict[str, list[list[Detection]]] = {}
    last_frame = -1

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        kind = tokens[0]
        if kind == "scene":
            if scene is not None:
                raise SceneParseError(line_no, "duplicate scene header")
            if len(tokens) != 5:
                raise SceneParseError(line_no, "scene header needs frame_count fps width height")
            try:
                frame_count = int(tokens[1])
            except ValueError:
                raise SceneParseError(line_no, f"bad frame count: {tokens[1]!r}") from None
            if frame_count < 0:
                raise SceneParseError(line_no, "frame count must be >= 0")
            fps = _parse_float(tokens[2], line_no, "fps")
            width = _parse_float(tokens[3], line_no, "width")
            height = _parse_float(tokens[4], line_no, "height")
            scene = Scene(frame_count=frame_count, fps=fps, width=width, height=height)
            continue
        if scene is None:
            raise SceneParseError(line_no, "expected scene header first")
        if kind == "threshold":
            if len(tokens) != 3:
                raise SceneParseError(line_no, "threshold line needs class and value")
            scene.thresholds[tokens[1]] = _parse_float(tokens[2], line_no, "threshold")
        elif kind == "det":
            det = _parse_det(tokens, line_no, scene.frame_count)
            if det.frame < last_frame:
                raise SceneStructureError(
                    f"line {line_no}: detection frames must be non-decreasing "
                    f"({det.frame} after {last_frame})"
                )
            last_frame = det.frame
            per_frame = pending.setdefault(
                det.object_class, [[] for _ in range(scene.frame_count)]
            )
            per_frame[det.frame].append(det)
        # unknown line keywords are ignored

    if scene is None:
        raise SceneParseError(1, "empty input: missing scene header")

    for cls, frames in pending.items():
        scene.detections[cls] = [cap_candidates(dets, per_frame_cap) for dets in frames]
    return scene


def render_scene(scene: Scene) -> str:
    """Serialize a scene in canonical form; parse(render(s)) == s."""
    lines = [
        f"scene {scene.frame_count} {_fmt(scene.fps)} {_fmt(scene.width)} {_fmt(scene.height)}"
    ]
    for cls in sorted(scene.thresholds):
        lines.append(f"threshold {cls} {_fmt(scene.thresholds[cls])}")
    for frame in range(scene.frame_count):
        for cls in scene.classes():
            for det in scene.detections[cls][frame]:
                lines.append(render_detection(det))
    return "\n".join(lines) + "\n"


def render_detection(det: Detection) -> str:
    b = det.box
    fields = [
        "det", str(det.frame), det.object_class, _fmt(det.score),
        _fmt(b.x), _fmt(b.y), _fmt(b.w), _fmt(b.h),
    ]
    if det.parts:
        fields.append("parts")
        for dx, dy in det.parts:
            fields.extend((_fmt(dx), _fmt(dy)))
    if det.hsv is not None:
        fields.extend(("hsv", _fmt(det.hsv[0]), _fmt(det.hsv[1]), _fmt(det.hsv[2])))
    if det.flow is not None:
        fields.extend(("flow", _fmt(det.flow[0]), _fmt(det.flow[1])))
    if det.root_index:
        fields.extend(("root", str(det.root_index)))
    return " ".join(fields)


def validate_scene(scene: Scene) -> ValidationReport:
    """Report classes present, per-class frame coverage gaps, and missing
    part displacements on person-pose classes.  Never raises."""
    from .lexicon import PERSON_CLASSES

    classes = scene.classes()
    gaps: dict[str, list[tuple[int, int]]] = {}
    warnings: list[str] = []
    for cls in classes:
        frames = scene.detections[cls]
        occupied = [t for t, dets in enumerate(frames) if dets]
        if not occupied:
            continue
        cls_gaps = []
        for prev, nxt in zip(occupied, occupied[1:]):
            if nxt - prev > 1:
                cls_gaps.append((prev + 1, nxt - 1))
        if cls_gaps:
            gaps[cls] = cls_gaps
        if cls in PERSON_CLASSES:
            missing = sum(1 for t in occupied for d in frames[t] if not d.parts)
            if missing:
                warnings.append(
                    f"{cls}: {missing} detections missing part displacements"
                )
    return ValidationReport(classes_present=classes, coverage_gaps=gaps, warnings=warnings)
