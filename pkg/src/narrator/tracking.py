"""Detection-based tracking: turn per-frame candidate lists into smoothed,
pruned object tracks.

The selection step is an exact dynamic program over one candidate per frame,
maximizing

    sum_t norm_score(d_t)  -  lambda_motion * sum_t |predict(d_t) - center(d_t+1)| / diag

where ``predict`` displaces a detection's center by its optical-flow hint
(identity when no hint is present) and ``diag`` is the scene diagonal, so the
motion penalty is scale-free.  Scores are normalized by a per-model offset:
the Otsu bipartition threshold of the per-frame top-score histogram, clamped
to the trained detector threshold plus a small margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import Config
from .errors import TrackingError
from .lexicon import PERSON_CLASSES, pooled_class
from .scene import BoundingBox, Detection, Scene, cap_candidates


@dataclass
class ScoreStats:
    mean: float
    variance: float
    histogram: tuple[int, ...]


@dataclass
class Track:
    """One object's selected detection per frame over a contiguous span."""

    track_id: int
    object_class: str
    start: int
    fps: float
    selections: list[Detection]
    smoothed_boxes: list[BoundingBox]
    score_stats: ScoreStats | None = None

    def __len__(self) -> int:
        return len(self.selections)

    @property
    def end(self) -> int:
        """One past the last frame of the span."""
        return self.start + len(self.selections)

    def frames(self) -> range:
        return range(self.start, self.end)

    def scores(self) -> np.ndarray:
        return np.array([d.score for d in self.selections])

    def centers(self) -> np.ndarray:
        """Smoothed centers, shape (T, 2)."""
        return np.array([[b.x, b.y] for b in self.smoothed_boxes])

    def crop(self, start: int, end: int) -> "Track":
        """Restrict the track to scene frames [start, end)."""
        if start < self.start or end > self.end or end <= start:
            raise TrackingError(f"crop [{start},{end}) outside span [{self.start},{self.end})")
        lo, hi = start - self.start, end - self.start
        cropped = Track(
            track_id=self.track_id, object_class=self.object_class,
            start=start, fps=self.fps,
            selections=self.selections[lo:hi],
            smoothed_boxes=self.smoothed_boxes[lo:hi],
            score_stats=self.score_stats,
        )
        return cropped


@dataclass
class CoherenceParams:
    lambda_motion: float = 1.0
    projection_depth: int = 5
    min_overlap: float = 0.0


def otsu_threshold(values, bins: int = 50) -> float:
    """Histogram bipartition value maximizing between-class variance.

    Scans every cut between adjacent bins; the first maximum wins.  Raises
    TrackingError when all values coincide (no histogram support).
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise TrackingError("otsu threshold needs at least two values")
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        raise TrackingError("degenerate histogram: all values identical")
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    total = counts.sum()
    best_var = -math.inf
    best_cut = None
    for cut in range(1, bins):
        w0 = counts[:cut].sum()
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = float((counts[:cut] * centers[:cut]).sum()) / w0
        mu1 = float((counts[cut:] * centers[cut:]).sum()) / w1
        between = (w0 / total) * (w1 / total) * (mu0 - mu1) ** 2
        if between > best_var:
            best_var = between
            best_cut = cut
    if best_cut is None:
        raise TrackingError("degenerate histogram: single occupied bin")
    return float(edges[best_cut])


def otsu_offset(top_scores, trained_threshold: float,
                bins: int = 50, margin: float = 0.4) -> float:
    """Score-normalization offset: min(otsu, trained_threshold + margin).

    ``top_scores`` are the per-frame top detection scores of one detector
    model.  Falls back to trained_threshold + margin when the histogram is
    degenerate (fewer than two frames, or all scores identical).
    """
    fallback = trained_threshold + margin
    top_scores = np.asarray(top_scores, dtype=float)
    if top_scores.size < 2 or float(top_scores.max()) <= float(top_scores.min()):
        return fallback
    return min(otsu_threshold(top_scores, bins=bins), fallback)


def augment_detections(per_frame: list[list[Detection]], depth: int,
                       decay: float = 0.9,
                       per_frame_cap: int | None = None) -> list[list[Detection]]:
    """Project every original detection up to ``depth`` frames forward.

    The projected copy at t+k is displaced by k * flow hint (unchanged
    position without a hint), keeps the box size, decays the score by
    decay**k, and is marked synthetic.  The per-frame cap is re-applied
    afterwards when given.
    """
    if depth < 0:
        raise TrackingError("projection depth must be >= 0")
    frame_count = len(per_frame)
    out = [list(dets) for dets in per_frame]
    for t, dets in enumerate(per_frame):
        for det in dets:
            if det.synthetic_origin:
                continue
            for k in range(1, depth + 1):
                target = t + k
                if target >= frame_count:
                    break
                if det.flow is None:
                    box = det.box
                else:
                    box = BoundingBox(det.box.x + k * det.flow[0],
                                      det.box.y + k * det.flow[1],
                                      det.box.w, det.box.h)
                out[target].append(replace(
                    det, frame=target, box=box,
                    score=det.score * decay ** k, synthetic_origin=True,
                ))
    if per_frame_cap is not None:
        out = [cap_candidates(dets, per_frame_cap) for dets in out]
    return out


def viterbi_select(candidates_per_frame: list[list[Detection]],
                   lambda_motion: float, diagonal: float) -> tuple[list[int], float]:
    """Exact argmax selection of one candidate per frame.

    Returns (indices, objective).  Every frame must hold at least one
    candidate; ties resolve to the lowest candidate index.
    """
    if not candidates_per_frame or any(not d for d in candidates_per_frame):
        raise TrackingError("every frame in the span needs at least one candidate")
    scores = [np.array([d.score for d in dets]) for dets in candidates_per_frame]
    n_frames = len(candidates_per_frame)
    if n_frames == 1:
        idx = int(np.argmax(scores[0]))
        return [idx], float(scores[0][idx])

    backptr: list[np.ndarray] = []
    acc = scores[0]
    for t in range(1, n_frames):
        prev = candidates_per_frame[t - 1]
        cur = candidates_per_frame[t]
        pred = np.array([d.predicted_center() for d in prev])          # (P, 2)
        cent = np.array([[d.box.x, d.box.y] for d in cur])             # (C, 2)
        diff = pred[:, None, :] - cent[None, :, :]
        dist = np.sqrt(diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2)
        coherence = -lambda_motion * dist / diagonal
        trans = acc[:, None] + coherence                               # (P, C)
        best_prev = np.argmax(trans, axis=0)
        backptr.append(best_prev)
        acc = trans[best_prev, np.arange(len(cur))] + scores[t]

    last = int(np.argmax(acc))
    objective = float(acc[last])
    path = [last]
    for bp in reversed(backptr):
        path.append(int(bp[path[-1]]))
    path.reverse()
    return path, objective


def viterbi_track(candidates_per_frame: list[list[Detection]],
                  params: CoherenceParams, diagonal: float, *,
                  object_class: str, start: int = 0, fps: float = 30.0,
                  track_id: int = 0) -> Track:
    """Select one candidate per frame into a Track (not yet smoothed)."""
    path, _ = viterbi_select(candidates_per_frame, params.lambda_motion, diagonal)
    selections = [candidates_per_frame[t][i] for t, i in enumerate(path)]
    return Track(track_id=track_id, object_class=object_class, start=start,
                 fps=fps, selections=selections, smoothed_boxes=[])


def smooth_track(track: Track, window: int = 5) -> Track:
    """Fill smoothed_boxes with a centered moving average over cx, cy, w, h.

    The window truncates at span edges; selections are untouched.
    """
    if window < 1 or window % 2 == 0:
        raise TrackingError("smoothing window must be odd and >= 1")
    raw = np.array([[d.box.x, d.box.y, d.box.w, d.box.h] for d in track.selections])
    half = window // 2
    n = len(raw)
    smoothed = np.empty_like(raw)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        smoothed[i] = raw[lo:hi].mean(axis=0)
    track.smoothed_boxes = [BoundingBox(*row) for row in smoothed]
    return track


def _local_maxima(values: np.ndarray) -> list[tuple[int, float]]:
    """(position, height) of local maxima; a flat run counts once."""
    n = len(values)
    peaks = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left_ok = i == 0 or values[i - 1] < values[i]
        right_ok = j == n - 1 or values[j + 1] < values[j]
        if left_ok and right_ok and values[i] > 0:
            peaks.append((i, float(values[i])))
        i = j + 1
    return peaks


def score_mode_count(scores, bins: int = 20, min_frac: float = 0.25,
                     valley_frac: float = 0.5) -> int:
    """Modes of the score histogram after 3-tap moving-average smoothing.

    Two local maxima are one mode unless the valley between them drops below
    valley_frac of the lower peak; peaks shorter than min_frac of the tallest
    smoothed bin are sampling noise and never count.
    """
    scores = np.asarray(scores, dtype=float)
    lo, hi = float(scores.min()), float(scores.max())
    if hi <= lo:
        return 1
    counts, _ = np.histogram(scores, bins=bins, range=(lo, hi))
    smoothed = np.empty(bins)
    for i in range(bins):
        a, b = max(0, i - 1), min(bins, i + 2)
        smoothed[i] = counts[a:b].mean()
    peaks = _local_maxima(smoothed)
    if not peaks:
        return 0
    merged = [peaks[0]]
    for pos, height in peaks[1:]:
        prev_pos, prev_height = merged[-1]
        valley = float(smoothed[prev_pos:pos + 1].min())
        if valley > valley_frac * min(prev_height, height):
            if height > prev_height:
                merged[-1] = (pos, height)
        else:
            merged.append((pos, height))
    tallest = max(h for _, h in merged)
    return sum(1 for _, h in merged if h >= min_frac * tallest)


def compute_score_stats(track: Track, bins: int = 20) -> Track:
    scores = track.scores()
    lo, hi = float(scores.min()), float(scores.max())
    if hi <= lo:
        hist = tuple([len(scores)] + [0] * (bins - 1))
    else:
        hist = tuple(int(c) for c in np.histogram(scores, bins=bins, range=(lo, hi))[0])
    track.score_stats = ScoreStats(
        mean=float(scores.mean()), variance=float(scores.var()), histogram=hist
    )
    return track


def prune_tracks(tracks: list[Track], var_max: float = 1.0,
                 hist_bins: int = 20, mode_min_frac: float = 0.25,
                 valley_frac: float = 0.5) -> list[Track]:
    """Drop tracks with score variance above var_max (strict) or whose score
    histogram shows more than two modes."""
    kept = []
    for track in tracks:
        if track.score_stats is None:
            track = compute_score_stats(track, bins=hist_bins)
        if track.score_stats.variance > var_max:
            continue
        if score_mode_count(track.scores(), bins=hist_bins,
                            min_frac=mode_min_frac,
                            valley_frac=valley_frac) > 2:
            continue
        kept.append(track)
    return kept


def _spans(per_frame: list[list[Detection]]) -> list[tuple[int, int]]:
    """Maximal contiguous runs of frames with at least one candidate."""
    spans = []
    start = None
    for t, dets in enumerate(per_frame):
        if dets and start is None:
            start = t
        elif not dets and start is not None:
            spans.append((start, t))
            start = None
    if start is not None:
        spans.append((start, len(per_frame)))
    return spans


def _normalized_stream(scene: Scene, object_class: str, cfg: Config) -> list[list[Detection]]:
    """Project one detector model's candidates forward, then offset-normalize.

    The offset histogram sees only the raw per-frame top scores; the decay is
    applied to raw scores so projected copies stay strictly weaker than the
    detections they echo.
    """
    per_frame = scene.detections.get(object_class)
    if per_frame is None:
        return [[] for _ in range(scene.frame_count)]
    tops = [max(d.score for d in dets) for dets in per_frame if dets]
    offset = otsu_offset(tops, scene.trained_threshold(object_class),
                         bins=cfg.otsu_bins, margin=cfg.otsu_margin)
    augmented = augment_detections(per_frame, cfg.projection_depth,
                                   cfg.projection_decay)
    return [
        [replace(d, score=d.score - offset) for d in dets] for dets in augmented
    ]


def track_scene(scene: Scene, cfg: Config | None = None) -> list[Track]:
    """Full per-scene tracking: normalize, project, select, smooth, prune.

    The three pose-specific person streams are normalized separately and then
    pooled into a single "person" stream before selection.
    """
    cfg = cfg or Config()
    streams: dict[str, list[list[Detection]]] = {}
    for object_class in scene.classes():
        merged = streams.setdefault(
            pooled_class(object_class), [[] for _ in range(scene.frame_count)]
        )
        for t, dets in enumerate(_normalized_stream(scene, object_class, cfg)):
            merged[t].extend(dets)

    params = CoherenceParams(lambda_motion=cfg.lambda_motion,
                             projection_depth=cfg.projection_depth,
                             min_overlap=cfg.min_overlap)
    tracks: list[Track] = []
    next_id = 0
    for stream_class in sorted(streams):
        per_frame = [cap_candidates(dets, cfg.per_frame_cap) for dets in streams[stream_class]]
        for start, end in _spans(per_frame):
            if end - start < cfg.min_track_len:
                continue
            track = viterbi_track(per_frame[start:end], params, scene.diagonal(),
                                  object_class=stream_class, start=start,
                                  fps=scene.fps, track_id=next_id)
            smooth_track(track, cfg.smooth_window)
            compute_score_stats(track, bins=cfg.prune_hist_bins)
            tracks.append(track)
            next_id += 1
    return prune_tracks(tracks, var_max=cfg.prune_var_max,
                        hist_bins=cfg.prune_hist_bins,
                        mode_min_frac=cfg.prune_mode_min_frac,
                        valley_frac=cfg.prune_valley_frac)


def render_tracks(tracks: list[Track], emit_raw: bool = False) -> str:
    """Track file: a header line per track, then per-frame selection lines."""
    from .scene import _fmt

    lines = []
    for track in tracks:
        lines.append(f"track {track.track_id} {track.object_class}")
        for frame, det, box in zip(track.frames(), track.selections, track.smoothed_boxes):
            lines.append(
                f"sel {frame} {_fmt(box.x)} {_fmt(box.y)} {_fmt(box.w)} {_fmt(box.h)} "
                f"{_fmt(det.score)}"
            )
        if emit_raw:
            for frame, det in zip(track.frames(), track.selections):
                b = det.box
                lines.append(
                    f"raw {frame} {_fmt(b.x)} {_fmt(b.y)} {_fmt(b.w)} {_fmt(b.h)} "
                    f"{_fmt(det.score)}"
                )
    return "\n".join(lines) + "\n" if lines else ""


def mean_speed(track: Track) -> float:
    """Average per-frame speed of the smoothed center, in pixels/second."""
    centers = track.centers()
    if len(centers) < 2:
        return 0.0
    steps = np.diff(centers, axis=0)
    return float(np.linalg.norm(steps, axis=1).mean() * track.fps)


def person_pose_label(track: Track, coverage_min: float = 0.5) -> str | None:
    """Majority pose-specific person class, when enough frames carry parts.

    Returns None for non-person tracks and for tracks whose part coverage is
    below ``coverage_min``.
    """
    if pooled_class(track.object_class) != "person":
        return None
    with_parts = [d.object_class for d in track.selections if d.parts]
    if len(with_parts) < coverage_min * len(track.selections) or not with_parts:
        return None
    counts: dict[str, int] = {}
    for cls in with_parts:
        if cls in PERSON_CLASSES:
            counts[cls] = counts.get(cls, 0) + 1
    if not counts:
        return None
    return max(sorted(counts), key=lambda c: counts[c])
