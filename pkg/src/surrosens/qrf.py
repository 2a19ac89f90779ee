"""Quantile regression forest and a k-nearest-neighbour fallback.

Trees are CART-style variance-reduction splitters over quantile-binned
feature thresholds; leaves keep the training outcomes they contain.  A
query's conditional quantiles are weighted empirical quantiles of the
training outcomes, with weights aggregated over the leaves the query falls
into.  Out-of-bag prediction is available for training rows so that fitted
quantiles feeding downstream pseudo-outcomes never use a row's own tree
memberships.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ForestConfig", "KnnConfig", "QuantileForest", "KnnQuantiles", "fit_quantile_forest"]


@dataclass(frozen=True)
class ForestConfig:
    # leaves of 50 suit the default location-centred use, where the forest
    # models residual quantiles and small leaves only add noise; mtry
    # defaults to sqrt(p) + 1 capped at p, since plain sqrt degenerates to
    # single-feature splits in low dimension and degrades tail cutoffs
    trees: int = 200
    min_leaf: int = 50
    bins: int = 64
    mtry: int | None = None


@dataclass(frozen=True)
class KnnConfig:
    k: int = 50


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    node_leaf: np.ndarray  # node id -> leaf id, -1 for internal nodes
    # ragged per-leaf membership over original training rows
    leaf_ptr: np.ndarray
    leaf_rows: np.ndarray
    leaf_wts: np.ndarray


def _build_tree(Fb, y, n_train, orig_idx, min_leaf, mtry, rng, edges):
    """Grow one tree on a bootstrap sample given globally binned features."""
    feature, threshold, left, right, node_leaf = [], [], [], [], []
    leaf_rows_list, leaf_wts_list = [], []
    stack = [(np.arange(Fb.shape[0]), -1, False)]
    while stack:
        node_rows, parent, is_right = stack.pop()
        node_id = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        node_leaf.append(-1)
        if parent >= 0:
            if is_right:
                right[parent] = node_id
            else:
                left[parent] = node_id
        yv = y[node_rows]
        m = node_rows.size
        best = None
        if m >= 2 * min_leaf and yv.max() > yv.min():
            p = Fb.shape[1]
            feats = rng.choice(p, size=min(mtry, p), replace=False)
            tot = yv.sum()
            for f in feats:
                fb = Fb[node_rows, f]
                nb = np.bincount(fb, minlength=edges[f].size + 1)
                if np.count_nonzero(nb) < 2:
                    continue
                sy = np.bincount(fb, weights=yv, minlength=nb.size)
                cn = np.cumsum(nb)[:-1]
                cy = np.cumsum(sy)[:-1]
                ok = (cn >= min_leaf) & (m - cn >= min_leaf)
                if not ok.any():
                    continue
                # maximising between-group sum of squares == minimising SSE
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = cy**2 / cn + (tot - cy) ** 2 / (m - cn)
                gain = np.where(ok, gain, -np.inf)
                b = int(np.argmax(gain))
                if best is None or gain[b] > best[0]:
                    best = (gain[b], f, b)
        if best is None:
            node_leaf[node_id] = len(leaf_rows_list)
            rows, counts = np.unique(orig_idx[node_rows], return_counts=True)
            leaf_rows_list.append(rows)
            leaf_wts_list.append(counts / m)
            continue
        _, f, b = best
        feature[node_id] = f
        threshold[node_id] = edges[f][b]
        go_left = Fb[node_rows, f] <= b
        stack.append((node_rows[~go_left], node_id, True))
        stack.append((node_rows[go_left], node_id, False))
    ptr = np.zeros(len(leaf_rows_list) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([r.size for r in leaf_rows_list])
    return _Tree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(node_leaf, dtype=np.int32),
        ptr,
        np.concatenate(leaf_rows_list) if leaf_rows_list else np.zeros(0, dtype=np.int64),
        np.concatenate(leaf_wts_list) if leaf_wts_list else np.zeros(0),
    )


def _descend(tree: _Tree, F: np.ndarray) -> np.ndarray:
    node = np.zeros(F.shape[0], dtype=np.int32)
    while True:
        internal = tree.feature[node] >= 0
        if not internal.any():
            return tree.node_leaf[node]
        idx = np.flatnonzero(internal)
        feats = tree.feature[node[idx]]
        go_left = F[idx, feats] <= tree.threshold[node[idx]]
        node[idx] = np.where(go_left, tree.left[node[idx]], tree.right[node[idx]])


def _accumulate(W, tree: _Tree, leaves: np.ndarray, query_ids: np.ndarray) -> None:
    """Add one tree's leaf weights into the query-by-train matrix W."""
    order = np.argsort(leaves, kind="stable")
    sorted_leaves = leaves[order]
    starts = np.flatnonzero(np.r_[True, np.diff(sorted_leaves) != 0])
    ends = np.r_[starts[1:], sorted_leaves.size]
    for s, e in zip(starts, ends):
        lv = sorted_leaves[s]
        sl = slice(tree.leaf_ptr[lv], tree.leaf_ptr[lv + 1])
        qg = query_ids[order[s:e]]
        W[qg[:, None], tree.leaf_rows[sl][None, :]] += tree.leaf_wts[sl][None, :]


def _weighted_quantiles(W, y_sorted, order, u_grid):
    """Weighted empirical quantiles per row of the weight matrix."""
    Ws = W[:, order]
    cum = np.cumsum(Ws, axis=1)
    totals = cum[:, -1]
    out = np.empty((W.shape[0], u_grid.size))
    for i in range(W.shape[0]):
        t = totals[i]
        if t <= 0:
            out[i] = np.median(y_sorted)
            continue
        idx = np.searchsorted(cum[i], u_grid * t, side="left")
        out[i] = y_sorted[np.minimum(idx, y_sorted.size - 1)]
    # weighted empirical quantiles are monotone already; sorting is a no-op
    # safety net for tie handling
    out.sort(axis=1)
    return out


def _weighted_quantile_at(W, y_sorted, order, levels):
    """One weighted quantile per row at that row's own level."""
    Ws = W[:, order]
    cum = np.cumsum(Ws, axis=1)
    totals = cum[:, -1]
    out = np.empty(W.shape[0])
    for i in range(W.shape[0]):
        t = totals[i]
        if t <= 0:
            out[i] = np.median(y_sorted)
            continue
        idx = np.searchsorted(cum[i], levels[i] * t, side="left")
        out[i] = y_sorted[min(idx, y_sorted.size - 1)]
    return out


class QuantileForest:
    """Forest of variance-reduction trees returning conditional quantiles."""

    def __init__(self, cfg: ForestConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self._trees: list[_Tree] = []

    def fit(self, F, y):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        y = np.asarray(y, dtype=float)
        n, p = F.shape
        if n < 2 * self.cfg.min_leaf:
            raise ValueError(f"need at least {2 * self.cfg.min_leaf} rows, got {n}")
        self._F = F
        self._y = y
        self._order = np.argsort(y, kind="stable")
        self._y_sorted = y[self._order]
        mtry = self.cfg.mtry or min(p, int(np.sqrt(p)) + 1)
        # per-feature quantile bin edges; binned value counts edges <= value
        edges = []
        Fb = np.empty((n, p), dtype=np.int64)
        for j in range(p):
            qs = np.quantile(F[:, j], np.linspace(0, 1, self.cfg.bins + 1)[1:-1])
            e = np.unique(qs)
            edges.append(e)
            Fb[:, j] = np.searchsorted(e, F[:, j], side="left")
        self._edges = edges
        rng = np.random.default_rng(self.seed)
        self._inbag = np.zeros((self.cfg.trees, n), dtype=bool)
        self._trees = []
        for t in range(self.cfg.trees):
            idx = rng.integers(0, n, size=n)
            self._inbag[t, np.unique(idx)] = True
            self._trees.append(
                _build_tree(Fb[idx], y[idx], n, idx, self.cfg.min_leaf, mtry, rng, edges)
            )
        return self

    def _weights(self, F, oob: bool = False):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        nq = F.shape[0]
        W = np.zeros((nq, self._y.size))
        used = np.zeros(nq)
        all_ids = np.arange(nq)
        for t, tree in enumerate(self._trees):
            if oob:
                ids = np.flatnonzero(~self._inbag[t])
                if ids.size == 0:
                    continue
                leaves = _descend(tree, F[ids])
            else:
                ids = all_ids
                leaves = _descend(tree, F)
            _accumulate(W, tree, leaves, ids)
            used[ids] += 1.0
        empty = used == 0
        if empty.any():
            # never out of bag: fall back to the all-tree weights
            W[empty] = self._weights(self._F[empty])[0]
            used[empty] = 1.0
        W /= used[:, None]
        return W, used

    def predict_quantiles(self, F, u_grid) -> np.ndarray:
        """(n_query, n_levels) conditional quantiles, monotone along levels."""
        u_grid = np.asarray(u_grid, dtype=float)
        W, _ = self._weights(F)
        return _weighted_quantiles(W, self._y_sorted, self._order, u_grid)

    def predict_quantiles_oob(self, u_grid) -> np.ndarray:
        """Out-of-bag quantiles at the training rows themselves."""
        u_grid = np.asarray(u_grid, dtype=float)
        W, _ = self._weights(self._F, oob=True)
        return _weighted_quantiles(W, self._y_sorted, self._order, u_grid)

    def predict_quantile_at(self, F, levels, oob: bool = False) -> np.ndarray:
        """Quantile at a per-row level; set ``oob`` when F is the training set."""
        levels = np.asarray(levels, dtype=float)
        W, _ = self._weights(F, oob=oob)
        return _weighted_quantile_at(W, self._y_sorted, self._order, levels)


class KnnQuantiles:
    """Empirical quantiles over the k nearest training rows (standardized)."""

    def __init__(self, cfg: KnnConfig = KnnConfig()):
        self.cfg = cfg

    def fit(self, F, y):
        F = np.atleast_2d(np.asarray(F, dtype=float))
        self._mean = F.mean(axis=0)
        sd = F.std(axis=0)
        self._sd = np.where(sd < 1e-12, 1.0, sd)
        self._Z = (F - self._mean) / self._sd
        self._y = np.asarray(y, dtype=float)
        if self._y.size < 2:
            raise ValueError("need at least two rows")
        return self

    def predict_quantiles(self, F, u_grid, exclude_self: bool = False) -> np.ndarray:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        Z = (F - self._mean) / self._sd
        u_grid = np.asarray(u_grid, dtype=float)
        k = min(self.cfg.k, self._y.size)
        out = np.empty((Z.shape[0], u_grid.size))
        for i in range(Z.shape[0]):
            d2 = ((self._Z - Z[i]) ** 2).sum(axis=1)
            if exclude_self:
                d2[np.argmin(d2)] = np.inf
            nn = np.argpartition(d2, min(k, d2.size - 1))[:k]
            out[i] = np.quantile(self._y[nn], u_grid, method="inverted_cdf")
        out.sort(axis=1)
        return out

    def predict_quantiles_oob(self, u_grid) -> np.ndarray:
        return self.predict_quantiles(
            self._Z * self._sd + self._mean, u_grid, exclude_self=True
        )

    def predict_quantile_at(self, F, levels, oob: bool = False) -> np.ndarray:
        levels = np.asarray(levels, dtype=float)
        out = np.empty(levels.size)
        for i in range(levels.size):
            out[i] = self.predict_quantiles(
                np.atleast_2d(F)[i : i + 1], np.array([levels[i]]), exclude_self=oob
            )[0, 0]
        return out


def fit_quantile_forest(F, y, cfg: ForestConfig = ForestConfig(), seed: int = 0) -> QuantileForest:
    return QuantileForest(cfg, seed).fit(F, y)
