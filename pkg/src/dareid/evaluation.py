"""Retrieval evaluation: distance matrices, rank-K mAP, CMC, and
k-reciprocal re-ranking.

Ranking always sorts distances ascending with ties broken by gallery index
(stable sort), so results are deterministic.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class RerankParams:
    k1: int = 20
    k2: int = 6
    lambda_orig: float = 0.3

    def __post_init__(self):
        if not 0.0 <= self.lambda_orig <= 1.0:
            raise ValueError("lambda_orig must be in [0, 1]")
        if self.k2 > self.k1:
            raise ValueError("k2 must not exceed k1")


@dataclass
class EvalConfig:
    top_k: int = 100
    metric: str = "euclidean"
    same_camera_exclusion: bool = False
    rerank: Optional[RerankParams] = None

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.metric not in ("euclidean", "squared-euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass
class EvalReport:
    map_at_k: float
    per_query_ap: list
    cmc: dict                 # rank -> hit rate
    config: dict
    reranked: bool

    def to_json(self):
        return json.dumps({
            "mAP": self.map_at_k,
            "per_query_ap": self.per_query_ap,
            "cmc": {str(r): v for r, v in self.cmc.items()},
            "config": self.config,
            "reranked": self.reranked,
        }, indent=2)


def pairwise_distances(queries, gallery, metric="euclidean"):
    """Distance matrix between query rows and gallery rows."""
    q = np.asarray(queries, dtype=np.float64)
    g = np.asarray(gallery, dtype=np.float64)
    if q.shape[1] != g.shape[1]:
        raise ValueError(f"dimension mismatch: {q.shape[1]} vs {g.shape[1]}")
    sq = ((q[:, None, :] - g[None, :, :]) ** 2).sum(axis=2)
    if metric == "squared-euclidean":
        return sq
    if metric == "euclidean":
        return np.sqrt(np.maximum(sq, 0.0))
    raise ValueError(f"unknown metric {metric!r}")


def _ranked_matches(dist, query_ids, gallery_ids, exclude):
    """Per query: relevance of gallery items in ranked order, exclusions removed."""
    query_ids = np.asarray(query_ids).reshape(-1)
    gallery_ids = np.asarray(gallery_ids).reshape(-1)
    order = np.argsort(dist, axis=1, kind="stable")
    out = []
    for qi in range(dist.shape[0]):
        row = order[qi]
        if exclude is not None:
            row = row[~exclude[qi][row]]
        out.append(gallery_ids[row] == query_ids[qi])
    return out


def average_precision_at_k(matches, k):
    """AP from a ranked boolean relevance vector, truncated to the top k."""
    num_rel = int(matches.sum())
    if num_rel == 0:
        raise ValueError("query has no relevant gallery items")
    top = matches[:k]
    hits = np.cumsum(top)
    precisions = hits[top] / (np.flatnonzero(top) + 1.0)
    return float(precisions.sum() / min(num_rel, k))


def mean_average_precision(dist, query_ids, gallery_ids, k, exclude=None):
    """mAP@k plus per-query APs; errors if any query lacks relevant items."""
    ranked = _ranked_matches(dist, query_ids, gallery_ids, exclude)
    empty = [qi for qi, m in enumerate(ranked) if not m.any()]
    if empty:
        raise ValueError(f"queries with no relevant gallery items: {empty}")
    aps = [average_precision_at_k(m, k) for m in ranked]
    return float(np.mean(aps)), aps


def cmc(dist, query_ids, gallery_ids, ranks=(1, 5, 10), exclude=None):
    """Fraction of queries whose first relevant item appears within each rank."""
    ranked = _ranked_matches(dist, query_ids, gallery_ids, exclude)
    empty = [qi for qi, m in enumerate(ranked) if not m.any()]
    if empty:
        raise ValueError(f"queries with no relevant gallery items: {empty}")
    first_hit = np.array([int(np.flatnonzero(m)[0]) for m in ranked])
    return {r: float((first_hit < r).mean()) for r in ranks}


def precision_recall_points(matches):
    """(recall, precision) at each relevant hit of one ranked relevance vector."""
    num_rel = int(matches.sum())
    hits = np.cumsum(matches)
    pos = np.flatnonzero(matches)
    return [(float(hits[p] / num_rel), float(hits[p] / (p + 1))) for p in pos]


# ---- k-reciprocal re-ranking ----

def _reciprocal_set(rank, i, k):
    forward = rank[i, :k + 1]
    back = rank[forward, :k + 1]
    return forward[np.any(back == i, axis=1)]


def _encode_neighbors(original, rank, k1):
    """Row-normalized Gaussian weights over expanded k-reciprocal sets."""
    n = original.shape[0]
    half = int(round(k1 / 2.0))
    recip = [_reciprocal_set(rank, i, k1) for i in range(n)]
    recip_half = [_reciprocal_set(rank, i, half) for i in range(n)]
    v = np.zeros_like(original)
    for i in range(n):
        expanded = recip[i]
        for cand in recip[i]:
            overlap = np.intersect1d(recip_half[cand], recip[i])
            if len(overlap) > (2.0 / 3.0) * len(recip_half[cand]):
                expanded = np.append(expanded, recip_half[cand])
        expanded = np.unique(expanded)
        weight = np.exp(-original[i, expanded])
        v[i, expanded] = weight / weight.sum()
    return v


def _jaccard_distances(v, num_queries):
    n = v.shape[0]
    owners = [np.flatnonzero(v[:, j]) for j in range(n)]
    jac = np.zeros((num_queries, n))
    for i in range(num_queries):
        overlap = np.zeros(n)
        for j in np.flatnonzero(v[i]):
            overlap[owners[j]] += np.minimum(v[i, j], v[owners[j], j])
        jac[i] = 1.0 - overlap / (2.0 - overlap)
    return jac


def k_reciprocal_rerank(queries, gallery, rerank=None, metric="euclidean"):
    """Blend the original distances with a Jaccard distance over k-reciprocal
    neighbor sets (with local query expansion), returning an Nq x Ng matrix.
    """
    if rerank is None:
        rerank = RerankParams()
    q = np.asarray(queries, dtype=np.float64)
    g = np.asarray(gallery, dtype=np.float64)
    if rerank.k1 >= g.shape[0]:
        raise ValueError(f"k1={rerank.k1} must be below gallery size {g.shape[0]}")
    nq = q.shape[0]
    allf = np.concatenate([q, g])
    original = pairwise_distances(allf, allf, metric) ** 2
    original = (original / original.max(axis=0)).T
    rank = np.argsort(original, axis=1, kind="stable")

    v = _encode_neighbors(original, rank, rerank.k1)
    if rerank.k2 != 1:
        v = np.stack([v[rank[i, :rerank.k2]].mean(axis=0)
                      for i in range(v.shape[0])])
    jac = _jaccard_distances(v, nq)
    final = (rerank.lambda_orig * original[:nq]
             + (1.0 - rerank.lambda_orig) * jac)
    return final[:, nq:]


def evaluate_retrieval(query_feats, gallery_feats, query_ids, gallery_ids,
                       config=None, exclude=None):
    """Full evaluation pass producing an EvalReport."""
    if config is None:
        config = EvalConfig()
    if config.rerank is not None:
        dist = k_reciprocal_rerank(query_feats, gallery_feats, config.rerank,
                                   config.metric)
        reranked = True
    else:
        dist = pairwise_distances(query_feats, gallery_feats, config.metric)
        reranked = False
    map_k, aps = mean_average_precision(dist, query_ids, gallery_ids,
                                        config.top_k, exclude)
    cmc_points = cmc(dist, query_ids, gallery_ids, exclude=exclude)
    cfg_echo = {
        "top_k": config.top_k,
        "metric": config.metric,
        "same_camera_exclusion": config.same_camera_exclusion,
        "rerank": None if config.rerank is None else {
            "k1": config.rerank.k1, "k2": config.rerank.k2,
            "lambda_orig": config.rerank.lambda_orig,
        },
    }
    return EvalReport(map_k, aps, cmc_points, cfg_echo, reranked)
