"""Body-posture codebook over normalized part displacements.

Part displacements are offsets from the detection center to each part
center, divided by sqrt(box area) so a box of unit area has unit-scale
offsets.  The codebook is built by repeated two-means bisection of the
highest-SSE cluster and queried by nearest centroid under Euclidean
distance.  Missing part dimensions are masked out of distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PostureError
from .scene import Detection


@dataclass
class PoseVector:
    """Flattened (dx, dy, dx, dy, ...) offsets with a validity mask."""

    values: np.ndarray
    mask: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass
class SplitRecord:
    parent: int
    children: tuple[int, int]
    sse_before: float
    sse_after: float


@dataclass
class Codebook:
    centroids: np.ndarray                      # (k, dim)
    tree: list[SplitRecord] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def pose_vector(det: Detection, max_parts: int | None = None) -> PoseVector:
    """Normalized part displacements of one detection.

    Offsets are divided by sqrt(w*h); joint scaling of box and offsets leaves
    the result unchanged.  Raises PostureError for part-less detections.
    """
    if not det.parts:
        raise PostureError(f"detection of class {det.object_class!r} has no parts")
    area = det.box.area()
    if area <= 0:
        raise PostureError("detection box must have positive area")
    n = len(det.parts) if max_parts is None else max_parts
    if len(det.parts) > n:
        raise PostureError(f"detection has {len(det.parts)} parts, capacity is {n}")
    scale = 1.0 / np.sqrt(area)
    values = np.zeros(2 * n)
    mask = np.zeros(2 * n, dtype=bool)
    for i, (dx, dy) in enumerate(det.parts):
        values[2 * i] = dx * scale
        values[2 * i + 1] = dy * scale
        mask[2 * i] = mask[2 * i + 1] = True
    if not np.all(np.isfinite(values)):
        raise PostureError("part displacements must be finite")
    return PoseVector(values=values, mask=mask)


def _masked_mean(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    support = m.sum(axis=0)
    total = (x * m).sum(axis=0)
    return np.divide(total, support, out=np.zeros(x.shape[1]), where=support > 0)


def _masked_sse(x: np.ndarray, m: np.ndarray, center: np.ndarray) -> float:
    return float((((x - center) ** 2) * m).sum())


def _two_means(x: np.ndarray, m: np.ndarray, rng: np.random.Generator,
               max_iter: int = 50) -> np.ndarray | None:
    """Cluster labels of a 2-means split, or None when the split degenerates."""
    center = _masked_mean(x, m)
    d0 = (((x - center) ** 2) * m).sum(axis=1)
    a = int(np.argmax(d0))
    da = (((x - x[a]) ** 2) * (m & m[a])).sum(axis=1)
    b = int(np.argmax(da))
    if a == b or np.array_equal(x[a] * m[a], x[b] * m[b]):
        return None
    means = np.stack([x[a].copy(), x[b].copy()])
    labels = np.zeros(len(x), dtype=int)
    for _ in range(max_iter):
        dists = np.stack([
            (((x - means[0]) ** 2) * m).sum(axis=1),
            (((x - means[1]) ** 2) * m).sum(axis=1),
        ])
        new_labels = np.argmin(dists, axis=0)
        for side in (0, 1):
            if not np.any(new_labels == side):
                # re-seed an empty side with the farthest point from the other
                far = int(np.argmax(dists[1 - side]))
                new_labels[far] = side
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        for side in (0, 1):
            sel = labels == side
            means[side] = _masked_mean(x[sel], m[sel])
    if not (np.any(labels == 0) and np.any(labels == 1)):
        return None
    return labels


def build_codebook(vectors: list[PoseVector], k: int, seed: int = 0,
                   max_iter: int = 50) -> Codebook:
    """Hierarchical (bisecting) k-means down to ``k`` leaf clusters.

    The leaf with the largest SSE is split by 2-means until k leaves exist;
    a degenerate split (duplicate points) falls back to an index-halving
    split after random perturbation fails to separate them.  Deterministic
    for a fixed seed.
    """
    if not vectors:
        raise PostureError("cannot build an empty codebook")
    if k < 1:
        raise PostureError("codebook size must be >= 1")
    if len(vectors) < k:
        raise PostureError(f"need at least {k} pose vectors, got {len(vectors)}")
    dim = max(v.dim for v in vectors)
    x = np.zeros((len(vectors), dim))
    m = np.zeros((len(vectors), dim), dtype=bool)
    for i, v in enumerate(vectors):
        x[i, : v.dim] = v.values
        m[i, : v.dim] = v.mask

    rng = np.random.default_rng(seed)
    members: list[np.ndarray] = [np.arange(len(vectors))]
    means: list[np.ndarray] = [_masked_mean(x, m)]
    sses: list[float] = [_masked_sse(x, m, means[0])]
    tree: list[SplitRecord] = []

    while len(members) < k:
        order = sorted(range(len(members)),
                       key=lambda i: (-sses[i], -len(members[i]), i))
        split_at = next((i for i in order if len(members[i]) >= 2), None)
        if split_at is None:
            raise PostureError("not enough distinct points to reach k clusters")
        idx = members[split_at]
        labels = _two_means(x[idx], m[idx], rng, max_iter=max_iter)
        if labels is None:
            # duplicates: perturb the mean to define an arbitrary stable order
            noise = rng.normal(0.0, 1e-9, size=len(idx))
            order_idx = np.argsort(noise, kind="stable")
            half = len(idx) // 2
            labels = np.ones(len(idx), dtype=int)
            labels[order_idx[:half]] = 0
        left, right = idx[labels == 0], idx[labels == 1]
        sse_before = sses[split_at]
        new_entries = []
        for part in (left, right):
            mean = _masked_mean(x[part], m[part])
            new_entries.append((part, mean, _masked_sse(x[part], m[part], mean)))
        members[split_at], means[split_at], sses[split_at] = new_entries[0]
        members.append(new_entries[1][0])
        means.append(new_entries[1][1])
        sses.append(new_entries[1][2])
        tree.append(SplitRecord(
            parent=split_at, children=(split_at, len(members) - 1),
            sse_before=sse_before,
            sse_after=new_entries[0][2] + new_entries[1][2],
        ))

    return Codebook(centroids=np.stack(means), tree=tree)


def codebook_index(codebook: Codebook, vector: PoseVector) -> int:
    """Index of the nearest centroid; ties break to the lowest index."""
    if vector.dim > codebook.dim:
        raise PostureError(
            f"pose vector dim {vector.dim} exceeds codebook dim {codebook.dim}"
        )
    values = np.zeros(codebook.dim)
    mask = np.zeros(codebook.dim, dtype=bool)
    values[: vector.dim] = vector.values
    mask[: vector.dim] = vector.mask
    diffs = (codebook.centroids - values) ** 2
    dists = (diffs * mask).sum(axis=1)
    return int(np.argmin(dists))


def total_sse(codebook: Codebook, vectors: list[PoseVector]) -> float:
    total = 0.0
    for v in vectors:
        i = codebook_index(codebook, v)
        c = codebook.centroids[i][: v.dim]
        total += float((((v.values - c) ** 2) * v.mask).sum())
    return total


def render_codebook(codebook: Codebook) -> str:
    from .scene import _fmt

    lines = [f"codebook {codebook.k} {codebook.dim}"]
    for row in codebook.centroids:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_codebook(text: str) -> Codebook:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("codebook"):
        raise PostureError("missing codebook header")
    _, k_s, dim_s = lines[0].split()
    k, dim = int(k_s), int(dim_s)
    if len(lines) != k + 1:
        raise PostureError(f"expected {k} centroid lines, got {len(lines) - 1}")
    centroids = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if centroids.shape != (k, dim):
        raise PostureError("centroid shape does not match header")
    return Codebook(centroids=centroids)
