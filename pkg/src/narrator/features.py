"""Per-frame feature time series for one track or an ordered track pair.

Single-track features, in schema order: box center (cx, cy), aspect ratio
and its derivative, velocity magnitude and direction, acceleration magnitude
and direction, normalized part displacements and their derivatives (person
classes only), then the discrete object class, root-filter index, and
posture codebook index.  Track-pair features: center distance, its
derivative, and the agent-to-patient orientation.

Derivatives are centered finite differences with one-sided fallback at span
edges, scaled to per-second units by the frame rate.  Angles use a y-up
convention (atan2(-dy, dx) on image coordinates) and live in [-pi, pi);
zero-magnitude vectors take direction 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FeatureError, SchemaMismatchError
from .lexicon import OBJECT_CLASSES, pooled_class
from .posture import Codebook, codebook_index, pose_vector
from .tracking import Track

LINEAR = "linear"
ANGULAR = "angular"
DISCRETE = "discrete"


@dataclass(frozen=True)
class FeatureKind:
    tag: str
    cardinality: int | None = None

    def __post_init__(self):
        if self.tag == DISCRETE and (self.cardinality is None or self.cardinality < 1):
            raise FeatureError("discrete features need a positive cardinality")
        if self.tag not in (LINEAR, ANGULAR, DISCRETE):
            raise FeatureError(f"unknown feature kind: {self.tag}")


Schema = tuple[tuple[str, FeatureKind], ...]


@dataclass
class FeatureSeries:
    schema: Schema
    values: np.ndarray  # (T, F)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema):
            raise FeatureError("values shape does not match schema")
        if not np.all(np.isfinite(self.values)):
            raise FeatureError("feature values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def column(self, name: str) -> np.ndarray:
        for i, (n, _) in enumerate(self.schema):
            if n == name:
                return self.values[:, i]
        raise KeyError(name)


@dataclass(frozen=True)
class Ablation:
    """Feature-group switches mirroring the three recognition experiments."""

    discrete: bool = True           # object class and root-filter index
    pose_continuous: bool = True    # part displacements and derivatives
    pose_discrete: bool = True      # codebook index


ABLATIONS: dict[str, Ablation] = {
    "full": Ablation(),
    "exp1": Ablation(discrete=False, pose_continuous=False, pose_discrete=False),
    "exp2": Ablation(discrete=False, pose_continuous=True, pose_discrete=False),
    "exp3": Ablation(discrete=True, pose_continuous=False, pose_discrete=True),
}


class ClassRegistry:
    """Stable object-class -> discrete symbol mapping.

    Seeded with the 25 trained classes; extra classes can be registered at
    training time.  Unseen classes at query time map to a shared tail slot.
    """

    def __init__(self, extra: tuple[str, ...] = ()):
        names = list(OBJECT_CLASSES)
        for name in extra:
            if name not in names:
                names.append(name)
        names.append("<other>")
        self.names: tuple[str, ...] = tuple(names)
        self._index = {name: i for i, name in enumerate(self.names)}

    @property
    def cardinality(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self._index.get(name, len(self.names) - 1)


@dataclass
class FeatureConfig:
    registry: ClassRegistry
    ablation: Ablation = Ablation()
    codebook: Codebook | None = None
    n_parts: int = 0
    max_roots: int = 4


def wrap_angle(theta):
    """Map angles into [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2 * np.pi) - np.pi


def direction(dx, dy):
    """Angle of an image-coordinate vector in a y-up frame; 0 for null vectors."""
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    angles = np.arctan2(-dy, dx)
    null = (dx == 0) & (dy == 0)
    return wrap_angle(np.where(null, 0.0, angles))


def finite_difference(x: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Centered differences with one-sided endpoints, times ``scale``."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise FeatureError("finite differences need at least two samples")
    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) / 2.0
    d[0] = x[1] - x[0]
    d[-1] = x[-1] - x[-2]
    return d * scale


def _is_person(track: Track) -> bool:
    return pooled_class(track.object_class) == "person"


def _pose_matrix(track: Track, n_parts: int) -> np.ndarray:
    """(T, 2*n_parts) normalized part displacements, zeros where missing."""
    rows = np.zeros((len(track), 2 * n_parts))
    for t, det in enumerate(track.selections):
        if det.parts:
            pv = pose_vector(det, max_parts=n_parts)
            rows[t] = pv.values
    return rows


def single_track_features(track: Track, cfg: FeatureConfig,
                          prefix: str = "") -> FeatureSeries:
    """Per-frame feature vectors for one smoothed track."""
    if len(track) < 3:
        raise FeatureError("tracks shorter than 3 frames have undefined derivatives")
    if not track.smoothed_boxes:
        raise FeatureError("track must be smoothed before feature extraction")
    fps = track.fps
    boxes = np.array([[b.x, b.y, b.w, b.h] for b in track.smoothed_boxes])
    cx, cy = boxes[:, 0], boxes[:, 1]
    aspect = boxes[:, 2] / boxes[:, 3]

    vx = finite_difference(cx, fps)
    vy = finite_difference(cy, fps)
    speed = np.hypot(vx, vy)
    vel_dir = direction(vx, vy)
    ax = finite_difference(vx, fps)
    ay = finite_difference(vy, fps)
    accel = np.hypot(ax, ay)
    accel_dir = direction(ax, ay)

    names: list[tuple[str, FeatureKind]] = [
        ("cx", FeatureKind(LINEAR)), ("cy", FeatureKind(LINEAR)),
        ("aspect", FeatureKind(LINEAR)), ("aspect_d", FeatureKind(LINEAR)),
        ("speed", FeatureKind(LINEAR)), ("vel_dir", FeatureKind(ANGULAR)),
        ("accel", FeatureKind(LINEAR)), ("accel_dir", FeatureKind(ANGULAR)),
    ]
    columns = [cx, cy, aspect, finite_difference(aspect, fps),
               speed, vel_dir, accel, accel_dir]

    person = _is_person(track)
    if cfg.ablation.pose_continuous and person:
        if cfg.n_parts < 1:
            raise FeatureError("pose features enabled but n_parts is 0")
        pose = _pose_matrix(track, cfg.n_parts)
        for d in range(pose.shape[1]):
            part, coord = divmod(d, 2)
            names.append((f"part{part}_{'dx' if coord == 0 else 'dy'}",
                          FeatureKind(LINEAR)))
            columns.append(pose[:, d])
        for d in range(pose.shape[1]):
            part, coord = divmod(d, 2)
            names.append((f"part{part}_{'dx' if coord == 0 else 'dy'}_d",
                          FeatureKind(LINEAR)))
            columns.append(finite_difference(pose[:, d], fps))

    if cfg.ablation.discrete:
        names.append(("object_class", FeatureKind(DISCRETE, cfg.registry.cardinality)))
        columns.append(np.array([
            float(cfg.registry.index(d.object_class)) for d in track.selections
        ]))
        names.append(("root_index", FeatureKind(DISCRETE, cfg.max_roots)))
        columns.append(np.array([
            float(min(d.root_index, cfg.max_roots - 1)) for d in track.selections
        ]))
    if cfg.ablation.pose_discrete and person:
        if cfg.codebook is None:
            raise FeatureError("pose codebook index enabled but no codebook given")
        codes = []
        for det in track.selections:
            if det.parts:
                codes.append(float(codebook_index(
                    cfg.codebook, pose_vector(det, max_parts=cfg.n_parts or None)
                )))
            else:
                codes.append(0.0)
        names.append(("pose_code", FeatureKind(DISCRETE, cfg.codebook.k)))
        columns.append(np.array(codes))

    schema = tuple((prefix + n, k) for n, k in names)
    return FeatureSeries(schema=schema, values=np.column_stack(columns))


def track_pair_features(agent: Track, patient: Track,
                        prefix: str = "pair_") -> FeatureSeries:
    """Distance, distance derivative, and agent-to-patient orientation over
    the overlapping frame span."""
    start = max(agent.start, patient.start)
    end = min(agent.end, patient.end)
    if end <= start:
        raise FeatureError("tracks do not overlap in time")
    a = agent.crop(start, end).centers()
    p = patient.crop(start, end).centers()
    if end - start < 3:
        raise FeatureError("overlap shorter than 3 frames")
    dx = p[:, 0] - a[:, 0]
    dy = p[:, 1] - a[:, 1]
    dist = np.hypot(dx, dy)
    schema: Schema = (
        (prefix + "dist", FeatureKind(LINEAR)),
        (prefix + "dist_d", FeatureKind(LINEAR)),
        (prefix + "orient", FeatureKind(ANGULAR)),
    )
    values = np.column_stack([
        dist, finite_difference(dist, agent.fps), direction(dx, dy)
    ])
    return FeatureSeries(schema=schema, values=values)


def two_track_features(agent: Track, patient: Track, cfg: FeatureConfig) -> FeatureSeries:
    """Agent and patient single-track features plus pair features, on the
    overlapping span."""
    start = max(agent.start, patient.start)
    end = min(agent.end, patient.end)
    if end - start < 3:
        raise FeatureError("tracks overlap for fewer than 3 frames")
    a = single_track_features(agent.crop(start, end), cfg, prefix="agent_")
    p = single_track_features(patient.crop(start, end), cfg, prefix="patient_")
    pair = track_pair_features(agent, patient)
    return FeatureSeries(
        schema=a.schema + p.schema + pair.schema,
        values=np.hstack([a.values, p.values, pair.values]),
    )


def check_schema(expected: Schema, series: FeatureSeries) -> None:
    if expected != series.schema:
        raise SchemaMismatchError(
            f"series schema ({len(series.schema)} features) does not match "
            f"model schema ({len(expected)} features)"
        )
