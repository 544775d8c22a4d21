"""Density-based clustering of scene partitions.

Implements hierarchical density clustering from scratch: core distances
from a kd-tree, a minimum spanning tree of the mutual-reachability graph,
single-linkage hierarchy, condensed cluster tree, and excess-of-mass (or
leaf) cluster extraction. Points left unclustered are noise and can be
reassigned to their nearest cluster with a small kNN classifier.

Two MST routes exist: a Boruvka-style construction that batches kd-tree
queries (used for large inputs) and a dense vectorized Prim sweep that
serves as the simple exact fallback and internal cross-check for small
inputs. Both produce identical partitions.
"""

from dataclasses import dataclass
from collections import deque

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, NoClusters

NOISE = -1

# 1/distance diverges on duplicate points; clamp so stabilities stay finite
LAMBDA_MAX = 1e15

_DENSE_MST_MAX = 2000  # auto mode switches to the kd-tree MST above this
_EXTEND_K_CAP = 4096  # beyond this, stragglers use chunked dense scans


class KdTree:
    """Exact spatial index over (n, 3) points (kNN + radius queries)."""

    def __init__(self, points: np.ndarray):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2 or len(self.points) == 0:
            raise ConfigError("kd-tree needs a non-empty (n, d) point array")
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def query(self, x, k: int):
        """k nearest neighbors; returns (distances, indices), each (m, k)."""
        d, i = self._tree.query(np.atleast_2d(np.asarray(x, dtype=np.float64)), k=k)
        if k == 1:
            d, i = d[:, None], i[:, None]
        return d, i

    def query_radius(self, x, r: float) -> np.ndarray:
        """Indices of all points within distance r of x, ascending."""
        idx = self._tree.query_ball_point(np.asarray(x, dtype=np.float64), r)
        return np.array(sorted(idx), dtype=np.intp)

    def query_pairs(self, r: float):
        return self._tree.query_pairs(r, output_type="ndarray")


def build_kdtree(points) -> KdTree:
    return KdTree(points)


@dataclass
class ClusterParams:
    min_cluster_size: int = 5
    min_samples: int | None = None  # None: follows min_cluster_size
    selection: str = "eom"  # "eom" or "leaf"
    mst_method: str = "auto"  # "auto", "kdtree" or "dense"

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ConfigError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ConfigError("min_samples must be >= 1")
        if self.selection not in ("eom", "leaf"):
            raise ConfigError(f"unknown selection method {self.selection!r}")
        if self.mst_method not in ("auto", "kdtree", "dense"):
            raise ConfigError(f"unknown mst method {self.mst_method!r}")

    @property
    def resolved_min_samples(self) -> int:
        return self.min_samples if self.min_samples is not None else self.min_cluster_size


@dataclass
class Clustering:
    cluster_id: np.ndarray  # (n,) int32; NOISE = -1
    count: int

    def __post_init__(self):
        self.cluster_id = np.ascontiguousarray(self.cluster_id, dtype=np.int32)

    def __len__(self) -> int:
        return len(self.cluster_id)


def core_distances(points: np.ndarray, min_samples: int, tree: KdTree | None = None):
    """Distance to the min_samples-th nearest neighbor, counting the point itself."""
    tree = tree or build_kdtree(points)
    k = min(min_samples, len(tree))
    d, _ = tree.query(tree.points, k=k)
    return d[:, -1]


def mutual_reachability(i_core, j_core, dist):
    return np.maximum(np.maximum(i_core, j_core), dist)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.intp)

    def find(self, x: int) -> int:
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:  # path compression
            p[x], x = root, p[x]
        return int(root)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True

    def roots(self) -> np.ndarray:
        p = self.parent.copy()
        while True:
            pp = p[p]
            if np.array_equal(pp, p):
                return p
            p = pp


def _mst_dense(points: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Vectorized Prim over the implicit mutual-reachability graph, O(n^2)."""
    n = len(points)
    pts = points.astype(np.float64)
    in_tree = np.zeros(n, dtype=bool)
    best_w = np.full(n, np.inf)
    best_src = np.zeros(n, dtype=np.intp)
    edges = np.empty((n - 1, 3))
    current = 0
    in_tree[0] = True
    for t in range(n - 1):
        d = np.linalg.norm(pts - pts[current], axis=1)
        w = np.maximum(np.maximum(core, core[current]), d)
        w[in_tree] = np.inf
        upd = w < best_w
        best_w[upd] = w[upd]
        best_src[upd] = current
        best_w[current] = np.inf
        nxt = int(np.argmin(best_w))  # ties: lowest point index
        edges[t] = (best_src[nxt], nxt, best_w[nxt])
        in_tree[nxt] = True
        current = nxt
    return edges


def _dense_best_cross(pts, core, comp, rows):
    """Exact min-weight cross-component edge per row point, by full scan."""
    bw = np.full(len(rows), np.inf)
    bj = np.full(len(rows), -1, dtype=np.intp)
    for off in range(0, len(rows), 128):
        chunk = rows[off : off + 128]
        d = np.linalg.norm(pts[chunk, None, :] - pts[None, :, :], axis=2)
        w = np.maximum(np.maximum(core[chunk, None], core[None, :]), d)
        w[comp[chunk, None] == comp[None, :]] = np.inf
        cols = np.argmin(w, axis=1)
        bw[off : off + len(chunk)] = w[np.arange(len(chunk)), cols]
        bj[off : off + len(chunk)] = cols
    return bw, bj


def _foreign_box_bounds(pts: np.ndarray, comp_c: np.ndarray, n_comp: int) -> np.ndarray:
    """Per point: Euclidean lower bound to the nearest other component,
    via component bounding boxes (chunked to bound memory)."""
    lo = np.full((n_comp, 3), np.inf)
    hi = np.full((n_comp, 3), -np.inf)
    np.minimum.at(lo, comp_c, pts)
    np.maximum.at(hi, comp_c, pts)
    out = np.empty(len(pts))
    comp_rows = np.arange(n_comp)
    for off in range(0, len(pts), 2048):
        chunk = slice(off, min(off + 2048, len(pts)))
        p = pts[chunk]
        d2 = np.zeros((p.shape[0], n_comp))
        for dim in range(3):
            gap = np.maximum(lo[None, :, dim] - p[:, None, dim], p[:, None, dim] - hi[None, :, dim])
            np.maximum(gap, 0.0, out=gap)
            d2 += gap * gap
        d2[comp_rows[None, :] == comp_c[chunk, None]] = np.inf
        out[chunk] = np.sqrt(d2.min(axis=1))
    return out


_BRIDGE_COMPONENTS = 128  # few big components: search complements directly
_BRIDGE_PENDING = 1500  # pending points that justify complement trees
_BOX_PRUNE_COMPONENTS = 768  # mid-game bound via per-component boxes


def _bridge_components(pts, core, comp_c, pending, bw, bj, best_w_comp):
    """Exact best outgoing edges via complement trees.

    Used for components whose pending points would otherwise flood the
    global kNN search (scattered components with useless box bounds);
    every complement candidate is foreign, so points resolve after a
    handful of neighbors.
    """
    for c in np.unique(comp_c[pending]):
        members = pending[comp_c[pending] == c]
        complement = np.flatnonzero(comp_c != c)
        ctree = cKDTree(pts[complement])
        active = members
        k = 8
        while active.size:
            kk = min(k, len(complement))
            d, ii = ctree.query(pts[active], k=kk)
            if kk == 1:
                d, ii = d[:, None], ii[:, None]
            nb = complement[ii]
            w = np.maximum(np.maximum(core[active, None], core[nb]), d)
            rows = np.arange(len(active))
            cols = np.argmin(w, axis=1)
            w_best = w[rows, cols]
            j_best = nb[rows, cols]
            improved = w_best < bw[active]
            bw[active[improved]] = w_best[improved]
            bj[active[improved]] = j_best[improved]
            if w_best.size:
                best_w_comp[c] = min(best_w_comp[c], float(w_best.min()))
            if kk >= len(complement):
                break
            d_last = d[:, -1]
            unresolved = np.maximum(core[active], d_last) < best_w_comp[c]
            active = active[unresolved]
            k *= 4


def _mst_kdtree(points: np.ndarray, core: np.ndarray, tree: KdTree, min_samples: int = 5) -> np.ndarray:
    """Boruvka construction of the mutual-reachability MST.

    Per round, every component contributes its minimum-weight outgoing
    edge. Candidates come from cached kNN lists; a point whose scan
    radius (or distance to the nearest foreign bounding box) cannot beat
    its component's best known edge is pruned, the rest widen their
    neighborhood until their minimum is certain. Once few components
    remain, candidate search switches to complement trees.
    """
    n = len(points)
    pts = points.astype(np.float64)
    # cache must reach past the core radius or certainty checks starve
    k0 = min(max(16, min_samples + 8), n)
    cd, ci = tree.query(pts, k=k0)
    cw = np.maximum(np.maximum(core[:, None], core[ci]), cd)
    row_idx = np.arange(n)

    uf = _UnionFind(n)
    edges = []
    while len(edges) < n - 1:
        comp = uf.roots()
        cross = comp[ci] != comp[:, None]
        wv = np.where(cross, cw, np.inf)
        col = np.argmin(wv, axis=1)
        bw = wv[row_idx, col]
        bj = ci[row_idx, col]
        certain = (bw < cd[:, -1]) | (k0 >= n)

        uroots, comp_c = np.unique(comp, return_inverse=True)
        best_w_comp = np.full(len(uroots), np.inf)
        np.minimum.at(best_w_comp, comp_c, bw)

        lower = np.maximum(core, cd[:, -1])
        if len(uroots) <= min(_BOX_PRUNE_COMPONENTS, n // 4):
            # box bounds kill interior points cheaply in the mid-game
            lower = np.maximum(lower, _foreign_box_bounds(pts, comp_c, len(uroots)))
        pending = np.flatnonzero(~certain & (lower < best_w_comp[comp_c]))
        if pending.size > _BRIDGE_PENDING and len(uroots) <= _BRIDGE_COMPONENTS:
            # scattered components defeat the box bound: search complements
            _bridge_components(pts, core, comp_c, pending, bw, bj, best_w_comp)
            pending = np.array([], dtype=np.intp)
        k = k0
        while pending.size:
            k = min(k * 4, n)
            if k > _EXTEND_K_CAP and k < n:
                bw2, bj2 = _dense_best_cross(pts, core, comp, pending)
                d_last = np.full(len(pending), np.inf)
            else:
                d2, i2 = tree.query(pts[pending], k=k)
                w2 = np.maximum(np.maximum(core[pending, None], core[i2]), d2)
                wv2 = np.where(comp[i2] != comp[pending, None], w2, np.inf)
                col2 = np.argmin(wv2, axis=1)
                r2 = np.arange(len(pending))
                bw2 = wv2[r2, col2]
                bj2 = i2[r2, col2]
                d_last = d2[:, -1]
            improved = bw2 < bw[pending]
            bw[pending[improved]] = bw2[improved]
            bj[pending[improved]] = bj2[improved]
            np.minimum.at(best_w_comp, comp_c[pending], bw2)
            certain2 = (bw2 < d_last) | (k >= n) | ~np.isfinite(d_last)
            lower2 = np.maximum(lower[pending], np.maximum(core[pending], d_last))
            keep = ~certain2 & (lower2 < best_w_comp[comp_c[pending]])
            pending = pending[keep]

        # lexicographically first finite candidate per component
        finite = np.isfinite(bw)
        fi = np.flatnonzero(finite)
        order = np.lexsort((fi, bw[fi], comp_c[fi]))
        _, firsts = np.unique(comp_c[fi][order], return_index=True)
        for o in firsts:
            i = int(fi[order[o]])
            j = int(bj[i])
            if uf.union(i, j):
                edges.append((i, j, bw[i]))
    return np.array(edges, dtype=np.float64)


class _Hierarchy:
    """Single-linkage merge tree with ties merged atomically.

    Edges of exactly equal weight are applied as one n-ary merge event,
    so the tree depends only on the connected components of the graph as
    a function of distance, not on which valid MST produced the edges.
    Node ids: points 0..n-1, internal nodes n.. in creation order; the
    last node is the root.
    """

    def __init__(self, n: int, children: list, dists: list, sizes: list):
        self.n = n
        self.children = children  # per internal node: list of child node ids
        self.dists = dists
        self.sizes = sizes

    @property
    def root(self) -> int:
        return self.n + len(self.children) - 1

    def size_of(self, node: int) -> int:
        return 1 if node < self.n else self.sizes[node - self.n]

    def leaves_of(self, node: int) -> list:
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < self.n:
                out.append(cur)
            else:
                stack.extend(self.children[cur - self.n])
        return out


def _build_hierarchy(edges: np.ndarray) -> _Hierarchy:
    n = len(edges) + 1
    order = np.lexsort((edges[:, 1], edges[:, 0], edges[:, 2]))
    e = edges[order]
    weights = e[:, 2]

    uf = _UnionFind(n)
    node_at = np.arange(n, dtype=np.intp)  # current node id per union root
    children: list = []
    dists: list = []
    sizes: list = []
    next_id = n

    t = 0
    while t < n - 1:
        # batch: all edges of exactly this weight
        stop = t
        w = weights[t]
        while stop < n - 1 and weights[stop] == w:
            stop += 1
        merged: dict = {}  # union root -> accumulated child node ids
        for a, b, _ in e[t:stop]:
            ra, rb = uf.find(int(a)), uf.find(int(b))
            ca = merged.pop(ra, None) or [int(node_at[ra])]
            cb = merged.pop(rb, None) or [int(node_at[rb])]
            uf.union(ra, rb)
            merged[uf.find(ra)] = ca + cb
        for root, childlist in sorted(merged.items()):
            children.append(childlist)
            dists.append(w)
            sizes.append(sum(1 if c < n else sizes[c - n] for c in childlist))
            node_at[root] = next_id
            next_id += 1
        t = stop
    return _Hierarchy(n, children, dists, sizes)


def _condense_tree(tree: _Hierarchy, min_cluster_size: int):
    """Collapse the hierarchy into (parent, child, lambda, size) rows.

    Condensed cluster ids start at n (the root); point children keep ids
    < n. A branch smaller than min_cluster_size leaves its cluster at the
    lambda of the split that shed it.
    """
    n = tree.n
    relabel = {tree.root: n}
    next_label = n + 1
    rows_parent, rows_child, rows_lam, rows_size = [], [], [], []

    def shed(parent_label: int, node: int, lam: float):
        for p in tree.leaves_of(node):
            rows_parent.append(parent_label)
            rows_child.append(p)
            rows_lam.append(lam)
            rows_size.append(1)

    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        dist = tree.dists[node - n]
        lam = min(1.0 / dist, LAMBDA_MAX) if dist > 0 else LAMBDA_MAX
        p = relabel.pop(node)
        kids = tree.children[node - n]
        big = [c for c in kids if tree.size_of(c) >= min_cluster_size]
        if len(big) >= 2:
            for child in kids:
                if tree.size_of(child) >= min_cluster_size:
                    relabel[child] = next_label
                    rows_parent.append(p)
                    rows_child.append(next_label)
                    rows_lam.append(lam)
                    rows_size.append(tree.size_of(child))
                    next_label += 1
                    if child >= n:
                        queue.append(child)
                else:
                    shed(p, child, lam)
        elif len(big) == 1:
            for child in kids:
                if child != big[0]:
                    shed(p, child, lam)
            relabel[big[0]] = p
            if big[0] >= n:
                queue.append(big[0])
        else:
            for child in kids:
                shed(p, child, lam)
    return (
        np.array(rows_parent, dtype=np.intp),
        np.array(rows_child, dtype=np.intp),
        np.array(rows_lam),
        np.array(rows_size, dtype=np.int64),
        next_label,
    )


def _stability(parent, child, lam, size, n: int, next_label: int) -> np.ndarray:
    """Per-cluster excess-of-mass stability, indexed by condensed id - n."""
    births = np.zeros(next_label - n)
    cluster_children = child >= n
    births[child[cluster_children] - n] = lam[cluster_children]
    stab = np.zeros(next_label - n)
    np.add.at(stab, parent - n, (lam - births[parent - n]) * size)
    return stab


def _cluster_children_map(parent, child, n: int) -> dict:
    children: dict = {}
    for p, c in zip(parent[child >= n], child[child >= n]):
        children.setdefault(int(p), []).append(int(c))
    return children


def _select_eom(stability: np.ndarray, children: dict, n: int, next_label: int) -> list:
    """Excess-of-mass selection; the root is never selectable."""
    stab = stability.copy()
    is_cluster = {c: True for c in range(n + 1, next_label)}
    for node in range(next_label - 1, n, -1):
        subtree = sum(stab[c - n] for c in children.get(node, ()))
        if subtree > stab[node - n]:
            is_cluster[node] = False
            stab[node - n] = subtree
        else:
            stack = list(children.get(node, ()))
            while stack:
                c = stack.pop()
                is_cluster[c] = False
                stack.extend(children.get(c, ()))
    return sorted(c for c, keep in is_cluster.items() if keep)


def _select_leaf(children: dict, n: int, next_label: int) -> list:
    leaves = [
        c for c in range(n + 1, next_label) if not children.get(c)
    ]
    return sorted(leaves)


def _label_points(parent, child, n: int, next_label: int, selected: list) -> np.ndarray:
    """Resolve every point to its nearest selected ancestor, else noise."""
    selected_set = set(selected)
    anc = np.full(next_label - n, -1, dtype=np.int64)
    label_of = {c: i for i, c in enumerate(selected)}
    cluster_parent = np.full(next_label - n, -1, dtype=np.intp)
    mask = child >= n
    cluster_parent[child[mask] - n] = parent[mask]
    for c in range(n, next_label):  # ascending: parents resolve first
        if c in selected_set:
            anc[c - n] = label_of[c]
        elif cluster_parent[c - n] >= 0:
            anc[c - n] = anc[cluster_parent[c - n] - n]
    labels = np.full(n, NOISE, dtype=np.int32)
    pmask = child < n
    labels[child[pmask]] = anc[parent[pmask] - n]
    return labels


def hdbscan(points: np.ndarray, params: ClusterParams | None = None) -> Clustering:
    """Cluster 3D points; unassigned points get the NOISE id (-1).

    Deterministic given input order. Every returned cluster has at least
    ``min_cluster_size`` members.
    """
    params = params or ClusterParams()
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise ConfigError("hdbscan needs a non-empty (n, d) point array")
    n = len(pts)
    if n < params.min_cluster_size:
        return Clustering(np.full(n, NOISE, dtype=np.int32), 0)

    tree = build_kdtree(pts)
    core = core_distances(pts, params.resolved_min_samples, tree)
    method = params.mst_method
    if method == "auto":
        method = "dense" if n <= _DENSE_MST_MAX else "kdtree"
    edges = (
        _mst_dense(pts, core)
        if method == "dense"
        else _mst_kdtree(pts, core, tree, params.resolved_min_samples)
    )

    hierarchy = _build_hierarchy(edges)
    parent, child, lam, size, next_label = _condense_tree(hierarchy, params.min_cluster_size)
    children = _cluster_children_map(parent, child, n)
    if params.selection == "eom":
        stab = _stability(parent, child, lam, size, n, next_label)
        selected = _select_eom(stab, children, n, next_label)
    else:
        selected = _select_leaf(children, n, next_label)
    labels = _label_points(parent, child, n, next_label, selected)
    return Clustering(labels, len(selected))


def reassign_noise(points: np.ndarray, clustering: Clustering, k: int = 5) -> Clustering:
    """Give every noise point the majority cluster id of its k nearest
    clustered neighbors (ties: the id of the nearest tied neighbor)."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    ids = clustering.cluster_id
    if len(ids) != len(points):
        raise ConfigError("clustering not parallel to points")
    donors = np.flatnonzero(ids != NOISE)
    if donors.size == 0 or clustering.count == 0:
        raise NoClusters("clustering contains no non-noise cluster")
    noise = np.flatnonzero(ids == NOISE)
    if noise.size == 0:
        return Clustering(ids.copy(), clustering.count)

    pts = np.asarray(points, dtype=np.float64)
    tree = build_kdtree(pts[donors])
    kk = min(k, len(donors))
    _, idx = tree.query(pts[noise], k=kk)
    nb = ids[donors[idx]]  # (m, kk), columns ordered by distance
    counts = np.zeros(nb.shape, dtype=np.int64)
    for c in range(kk):
        counts[:, c] = (nb == nb[:, [c]]).sum(axis=1)
    # first column reaching the max count holds the winning id: among tied
    # ids the nearest neighbor carrying one of them decides
    win_col = np.argmax(counts, axis=1)
    out = ids.copy()
    out[noise] = nb[np.arange(len(noise)), win_col]
    return Clustering(out, clustering.count)


def single_cluster_fallback(n: int) -> Clustering:
    """All points in one cluster; used when a partition is pure noise."""
    return Clustering(np.zeros(n, dtype=np.int32), 1)
