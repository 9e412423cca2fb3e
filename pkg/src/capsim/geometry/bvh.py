"""Bounding-volume hierarchy over triangles: ray casts and closest points.

BVH traversal and the brute-force reference evaluate the exact same
vectorized per-triangle kernels, so accelerated results are bit-identical
to brute force (ties broken by lowest triangle id in both).
"""

from __future__ import annotations

import numpy as np

_PARALLEL_EPS = 1e-12


def ray_triangle_ts(origin, direction, v0, v1, v2):
    """Moller-Trumbore for one ray against stacked triangles.

    Returns an array of hit parameters t (inf where there is no
    intersection). Two-sided: triangles hit from either face.
    """
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(direction[None, :], e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > _PARALLEL_EPS
    inv_det = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin[None, :] - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", direction, qvec) * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det
    ok &= (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t >= 0.0)
    return np.where(ok, t, np.inf)


def closest_on_triangles(query, v0, v1, v2):
    """Closest point on each of the stacked triangles to ``query``.

    Vectorized version of Ericson's ClosestPtPointTriangle. Returns
    (points (M,3), squared distances (M,)). ``query`` is one point (3,)
    tested against every triangle, or per-row points (M, 3); the row
    arithmetic is the same either way.
    """
    q = np.asarray(query, dtype=float)
    q = q if q.ndim == 2 else q[None, :]
    ab = v1 - v0
    ac = v2 - v0
    ap = q - v0

    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)

    bp = q - v1
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)

    cp = q - v2
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    denom_face = va + vb + vc
    safe = np.where(np.abs(denom_face) > 0, denom_face, 1.0)
    v_face = vb / safe
    w_face = vc / safe
    result = v0 + ab * v_face[:, None] + ac * w_face[:, None]

    # edge BC region
    denom = (d4 - d3) + (d5 - d6)
    wbc = np.where(np.abs(denom) > 0, (d4 - d3) / np.where(denom == 0, 1.0, denom), 0.0)
    on_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
    result = np.where(on_bc[:, None], v1 + (v2 - v1) * wbc[:, None], result)

    # edge AC region
    denom = d2 - d6
    wac = np.where(np.abs(denom) > 0, d2 / np.where(denom == 0, 1.0, denom), 0.0)
    on_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    result = np.where(on_ac[:, None], v0 + ac * wac[:, None], result)

    # edge AB region
    denom = d1 - d3
    vab = np.where(np.abs(denom) > 0, d1 / np.where(denom == 0, 1.0, denom), 0.0)
    on_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    result = np.where(on_ab[:, None], v0 + ab * vab[:, None], result)

    # vertex regions override edges/face
    at_c = (d6 >= 0.0) & (d5 <= d6)
    result = np.where(at_c[:, None], v2, result)
    at_b = (d3 >= 0.0) & (d4 <= d3)
    result = np.where(at_b[:, None], v1, result)
    at_a = (d1 <= 0.0) & (d2 <= 0.0)
    result = np.where(at_a[:, None], v0, result)

    diff = result - q
    return result, np.einsum("ij,ij->i", diff, diff)


def _pick_nearest(ts, ids):
    """Index of min t with ties broken by lowest triangle id."""
    tmin = ts.min()
    if not np.isfinite(tmin):
        return None
    cand = np.flatnonzero(ts == tmin)
    return cand[np.argmin(ids[cand])]


class Bvh:
    """Median-split BVH stored as flat arrays; parents precede children."""

    def __init__(self, vertices, triangles, leaf_size: int = 8):
        self.leaf_size = int(leaf_size)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self._build(np.asarray(vertices, dtype=float))

    def _build(self, vertices):
        tris = self.triangles
        n = len(tris)
        centroids = vertices[tris].mean(axis=1)
        lo_all = vertices[tris].min(axis=1)
        hi_all = vertices[tris].max(axis=1)

        node_lo, node_hi = [], []
        node_left, node_right = [], []
        node_start, node_count = [], []
        order = np.empty(n, dtype=np.int64)

        # stack of (triangle-id array, node slot); children allocated after parent
        stack = [(np.arange(n, dtype=np.int64), 0)]
        node_lo.append(None)
        node_hi.append(None)
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        cursor = 0

        while stack:
            idx, slot = stack.pop()
            lo = lo_all[idx].min(axis=0)
            hi = hi_all[idx].max(axis=0)
            node_lo[slot] = lo
            node_hi[slot] = hi
            if len(idx) <= self.leaf_size:
                node_start[slot] = cursor
                node_count[slot] = len(idx)
                order[cursor:cursor + len(idx)] = np.sort(idx)
                cursor += len(idx)
                continue
            axis = int(np.argmax(hi - lo))
            key = centroids[idx, axis]
            half = len(idx) // 2
            part = np.argpartition(key, half)
            left_ids, right_ids = idx[part[:half]], idx[part[half:]]

            for child_ids in (left_ids, right_ids):
                node_lo.append(None)
                node_hi.append(None)
                node_left.append(-1)
                node_right.append(-1)
                node_start.append(0)
                node_count.append(0)
            node_left[slot] = len(node_lo) - 2
            node_right[slot] = len(node_lo) - 1
            stack.append((left_ids, node_left[slot]))
            stack.append((right_ids, node_right[slot]))

        self.node_lo = np.asarray(node_lo, dtype=float)
        self.node_hi = np.asarray(node_hi, dtype=float)
        self.node_left = np.asarray(node_left, dtype=np.int64)
        self.node_right = np.asarray(node_right, dtype=np.int64)
        self.node_start = np.asarray(node_start, dtype=np.int64)
        self.node_count = np.asarray(node_count, dtype=np.int64)
        self.order = order
        self.refit(vertices)

    def refit(self, vertices):
        """Recompute node bounds for updated vertex positions (same topology)."""
        vertices = np.asarray(vertices, dtype=float)
        self._v0 = vertices[self.triangles[:, 0]]
        self._v1 = vertices[self.triangles[:, 1]]
        self._v2 = vertices[self.triangles[:, 2]]
        tri_lo = np.minimum(np.minimum(self._v0, self._v1), self._v2)
        tri_hi = np.maximum(np.maximum(self._v0, self._v1), self._v2)
        for i in range(len(self.node_lo) - 1, -1, -1):
            left = self.node_left[i]
            if left < 0:
                s, c = self.node_start[i], self.node_count[i]
                ids = self.order[s:s + c]
                self.node_lo[i] = tri_lo[ids].min(axis=0)
                self.node_hi[i] = tri_hi[ids].max(axis=0)
            else:
                right = self.node_right[i]
                self.node_lo[i] = np.minimum(self.node_lo[left], self.node_lo[right])
                self.node_hi[i] = np.maximum(self.node_hi[left], self.node_hi[right])

    def _leaf_ids(self, node):
        s, c = self.node_start[node], self.node_count[node]
        return self.order[s:s + c]

    def ray_cast(self, origin, direction, max_dist):
        """Nearest hit: (t, triangle_id) or None. Ties -> lowest id."""
        origin = np.asarray(origin, dtype=float)
        direction = np.asarray(direction, dtype=float)
        with np.errstate(divide="ignore"):
            inv = 1.0 / direction
        best_t = np.inf
        best_id = -1
        stack = [0]
        while stack:
            node = stack.pop()
            t_entry = self._slab_entry(node, origin, inv)
            limit = min(best_t, max_dist)
            if t_entry > limit:
                continue
            left = self.node_left[node]
            if left < 0:
                ids = self._leaf_ids(node)
                ts = ray_triangle_ts(origin, direction,
                                     self._v0[ids], self._v1[ids], self._v2[ids])
                ts = np.where(ts <= max_dist, ts, np.inf)
                k = _pick_nearest(ts, ids)
                if k is not None:
                    t, tid = ts[k], ids[k]
                    if t < best_t or (t == best_t and tid < best_id):
                        best_t, best_id = t, int(tid)
            else:
                stack.append(int(self.node_right[node]))
                stack.append(int(left))
        if best_id < 0:
            return None
        return best_t, best_id

    def _slab_entry(self, node, origin, inv):
        with np.errstate(invalid="ignore"):
            t1 = (self.node_lo[node] - origin) * inv
            t2 = (self.node_hi[node] - origin) * inv
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        entry = max(np.nanmax(tmin), 0.0)
        exit_ = np.nanmin(tmax)
        return entry if entry <= exit_ else np.inf

    def closest_point(self, query):
        """(point, squared distance, triangle_id); ties -> lowest id."""
        query = np.asarray(query, dtype=float)
        # greedy descent to one nearby leaf gives a cheap upper bound
        node = 0
        while self.node_left[node] >= 0:
            pair = np.array([self.node_left[node], self.node_right[node]])
            node = int(pair[int(np.argmin(self._aabb_d2_many(pair, query)))])
        seed = self._leaf_ids(node)
        _, seed_d2 = closest_on_triangles(query, self._v0[seed],
                                          self._v1[seed], self._v2[seed])
        bound = seed_d2.min()

        # breadth-first sweep keeps every node that could still tie the
        # bound, then one batched kernel call decides; node boxes only
        # ever prune (never pick), so the result matches brute force
        frontier = np.array([0], dtype=np.int64)
        leaves = []
        while len(frontier):
            frontier = frontier[self._aabb_d2_many(frontier, query) <= bound]
            is_leaf = self.node_left[frontier] < 0
            leaves.extend(self._leaf_ids(n) for n in frontier[is_leaf])
            inner = frontier[~is_leaf]
            frontier = np.concatenate((self.node_left[inner],
                                       self.node_right[inner]))
        ids = np.concatenate(leaves)
        pts, d2 = closest_on_triangles(query, self._v0[ids],
                                       self._v1[ids], self._v2[ids])
        k = _pick_nearest(d2, ids)
        return pts[k], d2[k], int(ids[k])

    def closest_points(self, queries):
        """Batched closest_point: (points (Q,3), squared distances (Q,),
        triangle ids (Q,)), each row exactly what closest_point returns.

        All queries share one traversal; per query the same candidate
        superset survives and the same kernel row wins, so the batch is
        bit-identical to Q single calls.
        """
        queries = np.asarray(queries, dtype=float)
        nq = len(queries)
        if nq == 0:
            return (np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=np.int64))
        every = np.arange(nq)

        # greedy per-query descent, all queries walking in lockstep
        node = np.zeros(nq, dtype=np.int64)
        active = self.node_left[node] >= 0
        while np.any(active):
            left = self.node_left[node[active]]
            right = self.node_right[node[active]]
            dl = self._aabb_d2_many(left, queries[active])
            dr = self._aabb_d2_many(right, queries[active])
            node[active] = np.where(dl <= dr, left, right)
            active = self.node_left[node] >= 0
        bound = np.full(nq, np.inf)
        ids, qs = self._gather_leaves(node, every)
        _, d2 = closest_on_triangles(queries[qs], self._v0[ids],
                                     self._v1[ids], self._v2[ids])
        np.minimum.at(bound, qs, d2)

        # one frontier of (node, query) pairs instead of Q sweeps
        fnode = np.zeros(nq, dtype=np.int64)
        fq = every.copy()
        cand_ids, cand_qs = [], []
        while len(fnode):
            keep = self._aabb_d2_many(fnode, queries[fq]) <= bound[fq]
            fnode, fq = fnode[keep], fq[keep]
            at_leaf = self.node_left[fnode] < 0
            if np.any(at_leaf):
                ids, qs = self._gather_leaves(fnode[at_leaf], fq[at_leaf])
                cand_ids.append(ids)
                cand_qs.append(qs)
            inner, iq = fnode[~at_leaf], fq[~at_leaf]
            fnode = np.concatenate((self.node_left[inner],
                                    self.node_right[inner]))
            fq = np.concatenate((iq, iq))

        ids = np.concatenate(cand_ids)
        qs = np.concatenate(cand_qs)
        pts, d2 = closest_on_triangles(queries[qs], self._v0[ids],
                                       self._v1[ids], self._v2[ids])
        order = np.lexsort((ids, d2, qs))
        first = order[np.searchsorted(qs[order], every)]
        return pts[first], d2[first], ids[first]

    def _gather_leaves(self, nodes, owners):
        """Triangle ids of the given leaves plus each id's owner tag."""
        counts = self.node_count[nodes]
        ids = np.concatenate([self._leaf_ids(n) for n in nodes])
        return ids, np.repeat(owners, counts)

    def _aabb_d2_many(self, nodes, query):
        d = np.maximum(self.node_lo[nodes] - query, 0.0)
        d = np.maximum(d, query - self.node_hi[nodes])
        return np.einsum("ij,ij->i", d, d)


def ray_cast_brute(vertices, triangles, origin, direction, max_dist):
    """Reference: test every triangle. Same kernel as the BVH leaves."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    ts = ray_triangle_ts(origin, direction, vertices[triangles[:, 0]],
                         vertices[triangles[:, 1]], vertices[triangles[:, 2]])
    ts = np.where(ts <= max_dist, ts, np.inf)
    k = _pick_nearest(ts, np.arange(len(triangles)))
    if k is None:
        return None
    return ts[k], int(k)


def closest_point_brute(vertices, triangles, query):
    """Reference closest point over every triangle."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    query = np.asarray(query, dtype=float)
    pts, d2 = closest_on_triangles(query, vertices[triangles[:, 0]],
                                   vertices[triangles[:, 1]], vertices[triangles[:, 2]])
    k = _pick_nearest(d2, np.arange(len(triangles)))
    return pts[k], d2[k], int(k)
