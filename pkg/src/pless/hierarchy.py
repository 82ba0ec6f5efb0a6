"""Nested region hierarchies for 2D slices.

A slice is partitioned by a priority-flood watershed on a relief function
(by default the morphological gradient), then coarsened by waterfall
passes over the region-adjacency graph: each region merges across its
lowest-saliency boundary unless that boundary is a strict local maximum
among its neighbors' boundaries. Every coarser layer is an exact union
of finer regions, which is what the label spreading in
:mod:`pless.spreading` relies on.

All tie-breaking is by row-major pixel index, so identical inputs
produce bitwise-identical hierarchies.
"""

import heapq
from collections import deque

import numpy as np
from scipy import ndimage as ndi

from ._validation import check_slice

# 4-connectivity offsets, row-major order
_NEIGHBORS = ((-1, 0), (0, -1), (0, 1), (1, 0))
_CROSS = ndi.generate_binary_structure(2, 1)


class PartitionHierarchy:
    """Nested sequence of region labelings, finest first.

    layers[k] is an (H, W) int array of region ids 0..region_count-1;
    parents[k] maps layer-k region ids to layer-(k+1) region ids.
    """

    def __init__(self, layers, parents):
        self.layers = layers
        self.parents = parents

    @property
    def num_layers(self):
        return len(self.layers)

    def region_counts(self):
        return [int(lab.max()) + 1 for lab in self.layers]

    def check_nesting(self):
        """Raise ValueError unless every layer is an exact union of children."""
        if len(self.parents) != len(self.layers) - 1:
            raise ValueError("parent map count does not match layer count")
        for k, parent in enumerate(self.parents):
            fine, coarse = self.layers[k], self.layers[k + 1]
            if fine.shape != coarse.shape:
                raise ValueError("layer shapes differ")
            if not np.array_equal(parent[fine], coarse):
                raise ValueError(f"layer {k + 1} is not the parent-map image of layer {k}")
            n_fine = int(fine.max()) + 1
            n_coarse = int(coarse.max()) + 1
            if len(parent) != n_fine:
                raise ValueError(f"parent map {k} has wrong length")
            if n_coarse > n_fine:
                raise ValueError(f"region count increases at layer {k + 1}")


def preprocess(raw):
    """Linearly rescale a 2D field to [0, 1]; constant input maps to zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.size == 0:
        raise ValueError("expected a non-empty 2D array")
    if not np.isfinite(raw).all():
        raise ValueError("slice contains NaN or Inf")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


def gradient_magnitude(slice_values):
    """Morphological gradient: max - min over the 3x3 neighborhood.

    The window is clamped at the borders. This is the default relief for
    the watershed; any non-negative field of the same shape works.
    """
    values = check_slice(slice_values)
    hi = ndi.maximum_filter(values, size=3, mode="nearest")
    lo = ndi.minimum_filter(values, size=3, mode="nearest")
    return hi - lo


def _minima_plateau_seeds(relief):
    """Label 4-connected equal-value plateaus that have no lower neighbor.

    Returns (labels, count) with labels -1 outside seed plateaus. Seed ids
    are assigned in row-major order of each plateau's first pixel.
    """
    h, w = relief.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    visited = np.zeros((h, w), dtype=bool)
    next_id = 0
    for start in range(h * w):
        r, c = divmod(start, w)
        if visited[r, c]:
            continue
        level = relief[r, c]
        plateau = [(r, c)]
        visited[r, c] = True
        is_min = True
        queue = deque(plateau)
        while queue:
            pr, pc = queue.popleft()
            for dr, dc in _NEIGHBORS:
                nr, nc = pr + dr, pc + dc
                if not (0 <= nr < h and 0 <= nc < w):
                    continue
                v = relief[nr, nc]
                if v == level:
                    if not visited[nr, nc]:
                        visited[nr, nc] = True
                        plateau.append((nr, nc))
                        queue.append((nr, nc))
                elif v < level:
                    is_min = False
        if is_min:
            for pr, pc in plateau:
                labels[pr, pc] = next_id
            next_id += 1
    return labels, next_id


def watershed(relief):
    """Priority-flood watershed without watershed lines.

    Seeds are the regional-minima plateaus (4-connectivity). Pixels are
    popped in nondecreasing relief order, ties broken by smallest
    row-major index; an unlabeled neighbor takes the label of the pixel
    that reaches it first.
    """
    relief = np.asarray(relief, dtype=np.float64)
    if relief.ndim != 2 or relief.size == 0:
        raise ValueError("expected a non-empty 2D relief")
    if not np.isfinite(relief).all() or relief.min() < 0:
        raise ValueError("relief must be finite and non-negative")
    h, w = relief.shape
    labels, _ = _minima_plateau_seeds(relief)
    flat_relief = relief.ravel()
    flat_labels = labels.ravel()
    heap = [(flat_relief[i], i) for i in np.flatnonzero(flat_labels >= 0)]
    heapq.heapify(heap)
    while heap:
        _, idx = heapq.heappop(heap)
        r, c = divmod(idx, w)
        lab = flat_labels[idx]
        for dr, dc in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            nidx = nr * w + nc
            if flat_labels[nidx] < 0:
                flat_labels[nidx] = lab
                heapq.heappush(heap, (flat_relief[nidx], nidx))
    return labels


def _boundary_saliency(relief, labels):
    """Edge saliency of the region-adjacency graph.

    For each pair of 4-adjacent regions the saliency is the minimum relief
    over the pixels on either side of their shared boundary.
    """
    sal = {}

    def _feed(a, b, va, vb):
        la = labels[a]
        lb = labels[b]
        m = la != lb
        if not m.any():
            return
        lo = np.minimum(la[m], lb[m])
        hi = np.maximum(la[m], lb[m])
        v = np.minimum(va[m], vb[m])
        for key_lo, key_hi, val in zip(lo.tolist(), hi.tolist(), v.tolist()):
            key = (key_lo, key_hi)
            cur = sal.get(key)
            if cur is None or val < cur:
                sal[key] = val

    _feed(
        (slice(None, -1), slice(None)),
        (slice(1, None), slice(None)),
        relief[:-1, :],
        relief[1:, :],
    )
    _feed(
        (slice(None), slice(None, -1)),
        (slice(None), slice(1, None)),
        relief[:, :-1],
        relief[:, 1:],
    )
    return sal


def _waterfall_merge(saliency, n_regions):
    """One waterfall pass: every region floods across its lowest pass,
    unless that pass is a strict crest (a strict local maximum of
    saliency among the edges incident to either endpoint), which is the
    boundary the next layer keeps. A pass with no neighboring edges
    separates nothing at the coarser scale and always merges.

    Returns a parent map onto 0..n_new-1 (ids ordered by smallest member
    region id) or None when nothing merges.
    """
    incident = [[] for _ in range(n_regions)]
    for edge, val in saliency.items():
        incident[edge[0]].append((edge, val))
        incident[edge[1]].append((edge, val))

    # lowest pass per region, saliency ties resolved by smallest edge id
    lowest = [None] * n_regions
    for edge in sorted(saliency):
        val = saliency[edge]
        for node in edge:
            if lowest[node] is None or val < saliency[lowest[node]]:
                lowest[node] = edge

    def _is_crest(edge, val):
        others = [ov for oe, ov in incident[edge[0]] + incident[edge[1]] if oe != edge]
        return bool(others) and all(ov < val for ov in others)

    merged_edges = sorted(
        {e for e in lowest if e is not None and not _is_crest(e, saliency[e])}
    )
    if not merged_edges:
        return None

    # union-find over regions connected by merged edges
    parent = np.arange(n_regions, dtype=np.int64)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in merged_edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb

    roots = np.array([find(i) for i in range(n_regions)], dtype=np.int64)
    # compact ids, ordered by smallest member region id
    order = np.unique(roots)
    remap = np.empty(n_regions, dtype=np.int64)
    remap[order] = np.arange(len(order))
    return remap[roots]


def waterfall_hierarchy(relief, finest, max_layers=4):
    """Build the nested hierarchy from a finest watershed labeling.

    Each pass recomputes boundary saliencies from the pixel grid and
    merges every region across its lowest pass unless that pass is a
    strict crest among neighboring boundaries. Stops when one region
    remains or max_layers layers exist (the finest counts).
    """
    relief = np.asarray(relief, dtype=np.float64)
    finest = np.asarray(finest, dtype=np.int64)
    if finest.shape != relief.shape:
        raise ValueError("finest labeling does not match relief dims")
    if max_layers < 1:
        raise ValueError("max_layers must be >= 1")

    layers = [finest]
    parents = []
    while len(layers) < max_layers:
        current = layers[-1]
        n = int(current.max()) + 1
        if n == 1:
            break
        saliency = _boundary_saliency(relief, current)
        parent = _waterfall_merge(saliency, n)
        if parent is None:
            break
        layers.append(parent[current])
        parents.append(parent)
    return PartitionHierarchy(layers, parents)


def build_hierarchy(image, max_layers=4, relief=None):
    """Convenience: preprocess -> gradient relief -> watershed -> waterfall."""
    slice_values = preprocess(image)
    if relief is None:
        relief = gradient_magnitude(slice_values)
    finest = watershed(relief)
    return waterfall_hierarchy(relief, finest, max_layers=max_layers)
