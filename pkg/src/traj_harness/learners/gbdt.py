"""Multiclass gradient-boosted trees on the weighted softmax log-loss.

One implementation covers both level-wise (depth-capped) and leaf-wise
(leaf-count-capped) configurations: trees grow best-first until either cap is
hit, which produces the same tree as level-wise growth whenever the leaf cap
is at least ``2 ** max_depth``.
"""

from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numba import njit

from .. import N_CLASSES
from .weights import (ClassWeights, LearnerError, check_predict_input, check_xy, log_softmax,
                      softmax)

MAX_HALVINGS = 30


@dataclass(frozen=True)
class GbdtParams:
    learning_rate: float = 0.01
    max_depth: int = 3
    n_estimators: int = 100
    min_child_weight: float = 1.0
    min_child_samples: int = 1
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    num_leaves: int | None = None
    # Halve a round's step until the train loss does not go up.
    monotone_guard: bool = True

    def validate(self) -> "GbdtParams":
        if self.n_estimators < 0:
            raise LearnerError(f"n_estimators must be >= 0, got {self.n_estimators}")
        if not 0 < self.learning_rate <= 1:
            raise LearnerError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if not 1 <= self.max_depth <= 16:
            raise LearnerError(f"max_depth must be in 1..16, got {self.max_depth}")
        if not (0 < self.subsample <= 1 and 0 < self.colsample_bytree <= 1):
            raise LearnerError("subsample and colsample_bytree must be in (0, 1]")
        if self.reg_alpha < 0 or self.reg_lambda < 0 or self.min_child_weight < 0:
            raise LearnerError("regularization terms must be non-negative")
        if self.num_leaves is not None and self.num_leaves < 2:
            raise LearnerError(f"num_leaves must be >= 2, got {self.num_leaves}")
        return self

    @property
    def leaf_cap(self) -> int:
        return self.num_leaves if self.num_leaves is not None else 2 ** self.max_depth


PRESETS = {
    "gbdt": GbdtParams(),
    "gbdt_leafwise": GbdtParams(learning_rate=0.01, max_depth=3, n_estimators=50,
                                num_leaves=31, min_child_samples=30, min_child_weight=1e-3,
                                subsample=0.8, reg_lambda=0.1),
}


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray  # go left when x < threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    cover: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            idx = np.flatnonzero(inner)
            go_left = X[idx, f[idx]] < self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "gain", "cover")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = {"feature", "left", "right"}
        return cls(**{k: np.asarray(v, dtype=np.int64 if k in ints else float)
                      for k, v in d.items()})


@dataclass(frozen=True)
class GbdtModel:
    params: GbdtParams
    base_margin: np.ndarray
    trees: tuple  # trees[round][class]
    feature_names: tuple[str, ...]
    seed: int = 42
    round_scale: tuple = ()
    train_loss: tuple = field(default=(), repr=False)

    kind = "gbdt"

    def decision_function(self, X) -> np.ndarray:
        X = check_predict_input(X, self.feature_names)
        F = np.tile(self.base_margin, (len(X), 1))
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                F[:, c] += tree.predict(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    @property
    def n_trees(self) -> int:
        return sum(len(r) for r in self.trees)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": asdict(self.params),
                "base_margin": self.base_margin.tolist(),
                "trees": [[t.to_dict() for t in r] for r in self.trees],
                "feature_names": list(self.feature_names), "seed": self.seed,
                "round_scale": list(self.round_scale), "train_loss": list(self.train_loss)}

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        return cls(GbdtParams(**d["params"]), np.asarray(d["base_margin"], dtype=float),
                   tuple(tuple(Tree.from_dict(t) for t in r) for r in d["trees"]),
                   tuple(d["feature_names"]), int(d["seed"]), tuple(d["round_scale"]),
                   tuple(d["train_loss"]))


def _soft(G, alpha):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0) if alpha > 0 else G


def _score(G, H, alpha, lam):
    T = _soft(G, alpha)
    return T * T / np.maximum(H + lam, 1e-300)


@njit(cache=True)
def _score_nb(G, H, alpha, lam):
    if alpha > 0:
        if G > alpha:
            G = G - alpha
        elif G < -alpha:
            G = G + alpha
        else:
            G = 0.0
    d = H + lam
    if d < 1e-300:
        d = 1e-300
    return G * G / d


@njit(cache=True, nogil=True)
def _grow_kernel(X, sorted_rows, sorted_vals, cols, rows, g, h, max_depth, min_child_weight,
                 min_child_samples, alpha, lam):
    """Level-wise exact greedy search over heap-numbered nodes.

    ``sorted_rows[fi]`` lists the sampled rows in ascending order of feature
    ``cols[fi]``. A node's candidate split sits between consecutive distinct
    values; ties on gain keep the earliest feature, then the earliest position.
    """
    n_nodes = 2 ** (max_depth + 1)
    node = np.full(X.shape[0], -1, dtype=np.int64)
    G = np.zeros(n_nodes)
    H = np.zeros(n_nodes)
    cnt = np.zeros(n_nodes, dtype=np.int64)
    gain = np.zeros(n_nodes)
    feat = np.full(n_nodes, -1, dtype=np.int64)
    thr = np.zeros(n_nodes)
    for r in rows:
        node[r] = 0
        G[0] += g[r]
        H[0] += h[r]
        cnt[0] += 1
    q, m = sorted_rows.shape
    for level in range(max_depth):
        off = 2 ** level - 1
        width = 2 ** level
        best = np.zeros(width)
        for fi in range(q):
            f = cols[fi]
            GL = np.zeros(width)
            HL = np.zeros(width)
            nl = np.zeros(width, dtype=np.int64)
            last = np.zeros(width)
            for pos in range(m):
                r = sorted_rows[fi, pos]
                j = node[r] - off
                if j < 0 or j >= width:
                    continue
                nd = node[r]
                v = sorted_vals[fi, pos]
                if nl[j] > 0 and v > last[j]:
                    hl = HL[j]
                    hr = H[nd] - hl
                    nr = cnt[nd] - nl[j]
                    if (hl >= min_child_weight and hr >= min_child_weight
                            and nl[j] >= min_child_samples and nr >= min_child_samples):
                        gl = GL[j]
                        gv = 0.5 * (_score_nb(gl, hl, alpha, lam)
                                    + _score_nb(G[nd] - gl, hr, alpha, lam)
                                    - _score_nb(G[nd], H[nd], alpha, lam))
                        if gv > best[j]:
                            best[j] = gv
                            feat[nd] = f
                            t = 0.5 * (last[j] + v)
                            if not last[j] < t:
                                t = v
                            thr[nd] = t
                GL[j] += g[r]
                HL[j] += h[r]
                nl[j] += 1
                last[j] = v
        any_split = False
        for j in range(width):
            if feat[off + j] >= 0:
                gain[off + j] = best[j]
                any_split = True
        if not any_split:
            break
        for r in rows:
            nd = node[r]
            if nd >= off and feat[nd] >= 0:
                child = 2 * nd + 1
                if X[r, feat[nd]] >= thr[nd]:
                    child += 1
                node[r] = child
                G[child] += g[r]
                H[child] += h[r]
                cnt[child] += 1
    return G, H, cnt, gain, feat, thr


class _TreeBuilder:
    """Exact greedy trees: depth-capped level-wise search, then best-first pruning.

    Splits are found for the full depth-capped tree; best-first selection under
    the leaf cap keeps a prefix of it, which is exact because a node's best
    split depends only on its own rows.
    """

    def __init__(self, X, order_t, params: GbdtParams):
        self.X = np.ascontiguousarray(X)
        self.order_t = order_t  # (p, n) row indices sorted by each column
        self.sorted_t = np.take_along_axis(np.ascontiguousarray(X.T), order_t, axis=1)
        self.p = params

    def _leaf(self, G, H):
        return -_soft(G, self.p.reg_alpha) / max(H + self.p.reg_lambda, 1e-300)

    def grow(self, rows, g, h, cols):
        n = len(self.X)
        base, vals = self.order_t[cols], self.sorted_t[cols]
        if len(rows) < n:
            sampled = np.zeros(n, dtype=bool)
            sampled[rows] = True
            keep = sampled[base]
            base = base[keep].reshape(len(cols), len(rows))
            vals = vals[keep].reshape(len(cols), len(rows))
        prm = self.p
        G, H, cnt, gain, feat, thr = _grow_kernel(
            self.X, np.ascontiguousarray(base), np.ascontiguousarray(vals),
            np.asarray(cols, dtype=np.int64),
            np.asarray(rows, dtype=np.int64), g, h, prm.max_depth,
            float(prm.min_child_weight), int(prm.min_child_samples),
            float(prm.reg_alpha), float(prm.reg_lambda))
        info = {}
        for nid in np.flatnonzero(cnt > 0).tolist():
            split = (float(gain[nid]), int(feat[nid]), float(thr[nid])) if feat[nid] >= 0 else None
            info[nid] = [float(G[nid]), float(H[nid]), int(cnt[nid]), split]
        return info

    def build(self, rows, g, h, cols, lr) -> Tree:
        info = self.grow(rows, g, h, cols)
        chosen = {0}
        heap = []

        def push(nid):
            s = info[nid][3]
            if s is not None:
                heapq.heappush(heap, (-s[0], nid))

        push(0)
        n_leaves = 1
        split_nodes = set()
        while heap and n_leaves < self.p.leaf_cap:
            _, nid = heapq.heappop(heap)
            split_nodes.add(nid)
            n_leaves += 1
            for child in (2 * nid + 1, 2 * nid + 2):
                chosen.add(child)
                push(child)
        order = sorted(chosen)
        index = {nid: j for j, nid in enumerate(order)}
        k = len(order)
        feat = np.full(k, -1, dtype=np.int64)
        thr = np.zeros(k)
        left = np.full(k, -1, dtype=np.int64)
        right = np.full(k, -1, dtype=np.int64)
        value = np.zeros(k)
        gain = np.zeros(k)
        cover = np.zeros(k)
        for nid, j in index.items():
            G, H, _, s = info[nid]
            cover[j] = H
            if nid in split_nodes:
                gain[j], feat[j], thr[j] = s
                left[j], right[j] = index[2 * nid + 1], index[2 * nid + 2]
            else:
                value[j] = lr * float(self._leaf(G, H))
        return Tree(feat, thr, left, right, value, gain, cover)


def _scaled(tree: Tree, s: float) -> Tree:
    return replace(tree, value=tree.value * s)


def _loss(y, F, w) -> float:
    lp = log_softmax(F)
    return float(-(w * lp[np.arange(len(y)), y]).sum() / w.sum())


def fit_gbdt(X, y, params: GbdtParams | None = None,
             class_weights: ClassWeights | None = None, seed: int = 42,
             sample_weight=None, feature_names=None) -> GbdtModel:
    params = (params or GbdtParams()).validate()
    X, y, names = check_xy(X, y, feature_names)
    n, p = X.shape
    if sample_weight is None:
        sample_weight = class_weights.sample_weights(y) if class_weights else np.ones(n)
    w = np.asarray(sample_weight, dtype=float)
    Y = np.eye(N_CLASSES)[y]

    prior = (w[:, None] * Y).sum(axis=0) / w.sum()
    base = np.log(np.maximum(prior, 1e-12))
    base -= base.mean()
    F = np.tile(base, (n, 1))
    loss = _loss(y, F, w)
    losses, scales, rounds = [loss], [], []
    order_t = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    builder = _TreeBuilder(X, order_t, params)
    n_rows = max(1, int(round(params.subsample * n)))
    n_cols = max(1, int(np.ceil(params.colsample_bytree * p)))

    for r in range(params.n_estimators):
        rng = np.random.default_rng([seed, r])
        rows = (np.sort(rng.choice(n, n_rows, replace=False)) if n_rows < n
                else np.arange(n))
        cols = (np.sort(rng.choice(p, n_cols, replace=False)) if n_cols < p
                else np.arange(p))
        P = softmax(F)
        G = w[:, None] * (P - Y)
        Hs = w[:, None] * P * (1 - P)
        trees = [builder.build(rows, G[:, c], Hs[:, c], cols, params.learning_rate)
                 for c in range(N_CLASSES)]
        delta = np.column_stack([t.predict(X) for t in trees])
        s = 1.0
        new_loss = _loss(y, F + delta, w)
        if params.monotone_guard:
            halvings = 0
            while new_loss > loss and halvings < MAX_HALVINGS:
                s *= 0.5
                halvings += 1
                new_loss = _loss(y, F + s * delta, w)
            if new_loss > loss:
                s, new_loss = 0.0, loss
            if s != 1.0:
                trees = [_scaled(t, s) for t in trees]
        F = F + s * delta
        loss = new_loss
        losses.append(loss)
        scales.append(s)
        rounds.append(tuple(trees))
    return GbdtModel(params, base, tuple(rounds), tuple(names), int(seed), tuple(scales),
                     tuple(losses))


def gain_importance(model: GbdtModel) -> dict[str, float]:
    """Total split gain per feature over all trees and classes, as shares of the total."""
    total = np.zeros(len(model.feature_names))
    for round_trees in model.trees:
        for t in round_trees:
            inner = t.feature >= 0
            np.add.at(total, t.feature[inner], t.gain[inner])
    s = total.sum()
    if s <= 0:
        return {}
    return {model.feature_names[j]: float(total[j] / s) for j in np.flatnonzero(total > 0)}
