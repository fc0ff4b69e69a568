"""Average-linkage agglomerative clustering over segment embeddings.

Merging always takes the pair of clusters with the smallest average
pairwise cosine distance; ties fall to the pair whose member segments
come first. Sequential and deterministic by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Turn
from .errors import DimMismatch, EmptyInput, KTooLarge, LengthMismatch, ZeroVector
from .vad import Segment

MERGE_GAP_S = 0.25


@dataclass(frozen=True)
class ClusterResult:
    """Cluster id per segment plus the merge history that produced it."""

    labels: tuple[int, ...]
    merge_trace: tuple[tuple[int, int, float], ...]

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels))


def _vec(x) -> np.ndarray:
    v = getattr(x, "vector", x)
    return np.asarray(v, dtype=np.float64)


def cosine_distance(a, b) -> float:
    """1 minus the cosine of the angle between two vectors, in [0, 2].

    Raises ZeroVector on a zero input and DimMismatch on unequal dims.
    """
    va, vb = _vec(a), _vec(b)
    if va.shape != vb.shape:
        raise DimMismatch(f"dims differ: {va.shape[0]} vs {vb.shape[0]}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine distance is undefined for zero vectors")
    d = 1.0 - float(np.dot(va, vb) / (na * nb))
    return float(min(2.0, max(0.0, d)))


def _pairwise(embs) -> np.ndarray:
    vectors = [_vec(e) for e in embs]
    dims = {v.shape for v in vectors}
    if len(dims) > 1 or any(v.ndim != 1 for v in vectors):
        raise DimMismatch("all embeddings must share one dimension")
    matrix = np.stack(vectors)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("embeddings must be nonzero for cosine distances")
    unit = matrix / norms[:, None]
    return np.clip(1.0 - unit @ unit.T, 0.0, 2.0)


def agglomerative_cluster(embs, stop) -> ClusterResult:
    """Cluster embeddings bottom-up by average cosine distance.

    ``stop`` is ``{"threshold": t}`` (merge while the best distance is
    at most t) or ``{"k": k}`` (merge down to k clusters). Labels are
    dense, numbered by each cluster's first segment; merge_trace rows
    are (first index of a, first index of b, distance) with a before b.

    Raises EmptyInput on no embeddings and KTooLarge when k exceeds n.
    """
    n = len(embs)
    if n == 0:
        raise EmptyInput("nothing to cluster")
    if not isinstance(stop, dict) or set(stop) not in ({"threshold"}, {"k"}):
        raise ValueError('stop must be {"threshold": t} or {"k": k}')
    threshold = stop.get("threshold")
    k = stop.get("k")
    if k is not None:
        if int(k) != k or k < 1:
            raise ValueError("k must be a positive integer")
        k = int(k)
        if k > n:
            raise KTooLarge(f"k={k} exceeds {n} embeddings")

    pair = _pairwise(embs)
    # Per active cluster slot: distance sums, member count, members,
    # lowest segment index. Average distance is sums / (size_a*size_b).
    sums = pair.copy()
    sizes = np.ones(n)
    members: list[list[int]] = [[i] for i in range(n)]
    first = np.arange(n)
    active = np.ones(n, dtype=bool)
    trace: list[tuple[int, int, float]] = []

    while int(active.sum()) > 1:
        if k is not None and int(active.sum()) <= k:
            break
        idx = np.flatnonzero(active)
        avg = sums[np.ix_(idx, idx)] / np.outer(sizes[idx], sizes[idx])
        iu = np.triu_indices(len(idx), k=1)
        dists = avg[iu]
        best = float(np.min(dists))
        if threshold is not None and best > threshold:
            break
        ties = np.flatnonzero(dists == best)
        keys = []
        for t in ties:
            a, b = idx[iu[0][t]], idx[iu[1][t]]
            lo, hi = sorted((int(first[a]), int(first[b])))
            keys.append((lo, hi, a, b))
        lo, hi, a, b = min(keys)
        trace.append((lo, hi, best))
        sums[a, :] += sums[b, :]
        sums[:, a] += sums[:, b]
        sizes[a] += sizes[b]
        members[a].extend(members[b])
        first[a] = lo
        active[b] = False

    order = sorted(np.flatnonzero(active), key=lambda s: int(first[s]))
    labels = [0] * n
    for label, slot in enumerate(order):
        for i in members[slot]:
            labels[i] = label
    return ClusterResult(labels=tuple(labels), merge_trace=tuple(trace))


def labels_to_turns(
    segments: list[Segment], labels, file_id: str
) -> list[Turn]:
    """Merge same-label segments into hypothesis Turns.

    Segments with one label whose gap is at most 0.25 s (or which
    overlap) fuse into a single Turn; speaker ids are "spk" plus the
    label. Raises LengthMismatch when counts differ.
    """
    labels = list(labels)
    if len(segments) != len(labels):
        raise LengthMismatch(
            f"{len(segments)} segments vs {len(labels)} labels"
        )
    by_label: dict[int, list[Segment]] = {}
    for seg, lab in zip(segments, labels):
        by_label.setdefault(int(lab), []).append(seg)

    turns: list[Turn] = []
    for lab, segs in by_label.items():
        segs = sorted(segs, key=lambda s: s.onset_s)
        span_on, span_off = segs[0].onset_s, segs[0].offset_s
        for s in segs[1:]:
            if s.onset_s - span_off <= MERGE_GAP_S:
                span_off = max(span_off, s.offset_s)
            else:
                turns.append(Turn(file_id, f"spk{lab}", span_on, span_off - span_on))
                span_on, span_off = s.onset_s, s.offset_s
        turns.append(Turn(file_id, f"spk{lab}", span_on, span_off - span_on))
    return sorted(turns, key=lambda t: (t.onset_s, t.speaker_id))
