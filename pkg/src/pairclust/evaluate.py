"""Evaluation: permutation-aligned MSE, clustering metrics, geometry predicates.

Cluster labels are identifiable only up to a permutation, so every comparison
here aligns rows/labels through an exact linear-assignment solve first. The
anchor and scattering predicates test whether a membership matrix has the
geometry that makes recovery well posed.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, nnls

from . import linalg
from .exceptions import ConfigError, DegenerateInputError, ShapeError
from .model import forward

SSC_CERTIFIED_BY_ASC = "certified-by-ASC"
SSC_SAMPLED_PASS = "sampled-pass"
SSC_SAMPLED_FAIL = "sampled-fail"


def hungarian(cost):
    """Minimum-cost assignment on a square cost matrix.

    Returns ``(perm, total_cost)`` where row i is assigned to column perm[i]
    and the total cost is minimal over all bijections.
    """
    cost = linalg.as_matrix(cost)
    if cost.shape[0] != cost.shape[1]:
        raise ShapeError(f"cost matrix must be square, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ShapeError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm, float(cost[rows, cols].sum())


def aligned_mse(m_hat, m_true):
    """Permutation-aligned MSE between row-l2-normalized membership matrices.

    mse = (1/K) min over row permutations of sum_k || t_perm(k) - h_k ||^2
    where h_k, t_l are the unit-normalized rows of m_hat and m_true. The
    minimization is exact (assignment on the K x K row-pair cost matrix).
    Returns ``(mse, perm)`` with perm[k] the m_true row aligned to m_hat row k.
    """
    m_hat = linalg.as_matrix(m_hat)
    m_true = linalg.as_matrix(m_true)
    if m_hat.shape != m_true.shape:
        raise ShapeError(f"shape mismatch: {m_hat.shape} vs {m_true.shape}")
    k = m_hat.shape[0]
    hn = np.linalg.norm(m_hat, axis=1)
    tn = np.linalg.norm(m_true, axis=1)
    if hn.min() == 0.0 or tn.min() == 0.0:
        raise DegenerateInputError("membership matrix has an all-zero row")
    h = m_hat / hn[:, None]
    t = m_true / tn[:, None]
    # ||h_k - t_l||^2 = 2 - 2 <h_k, t_l> since rows are unit norm
    cost = 2.0 - 2.0 * (h @ t.T)
    perm, total = hungarian(cost)
    return max(total, 0.0) / k, perm


def _contingency(labels_true, labels_pred):
    labels_true = np.asarray(labels_true, dtype=np.int64)
    labels_pred = np.asarray(labels_pred, dtype=np.int64)
    if labels_true.shape != labels_pred.shape or labels_true.ndim != 1:
        raise ShapeError("label arrays must be 1-D with equal length")
    if len(labels_true) == 0:
        raise ShapeError("label arrays must be non-empty")
    if labels_true.min() < 0 or labels_pred.min() < 0:
        raise ShapeError("labels must be nonnegative integers")
    k = int(max(labels_true.max(), labels_pred.max())) + 1
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (labels_true, labels_pred), 1)
    return table


def clustering_accuracy(labels_pred, labels_true):
    """Best label-matching accuracy via assignment on the negated contingency table."""
    table = _contingency(labels_true, labels_pred)
    _, neg_matches = hungarian(-table.astype(np.float64))
    return -neg_matches / len(np.asarray(labels_true))


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def normalized_mutual_info(labels_pred, labels_true):
    """NMI with geometric-mean normalization and natural logs.

    Defined as 1 when both partitions are a single cluster, 0 when only one
    of them is (zero mutual information).
    """
    table = _contingency(labels_true, labels_pred)
    n = len(np.asarray(labels_true))
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    h_true = _entropy(a, n)
    h_pred = _entropy(b, n)
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    norm = np.sqrt(h_true * h_pred)
    if norm == 0.0:
        return 0.0
    nz = table > 0
    # exactly one nonzero per occupied row and column <=> the partitions are
    # identical up to relabeling, where NMI is exactly 1
    if np.all(nz.sum(axis=0)[b > 0] == 1) and np.all(nz.sum(axis=1)[a > 0] == 1):
        return 1.0
    pij = table[nz] / n
    outer = np.outer(a, b)[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    return min(1.0, mi / norm)


def adjusted_rand_index(labels_pred, labels_true):
    """Pair-counting adjusted Rand index."""
    table = _contingency(labels_true, labels_pred)
    n = len(np.asarray(labels_true))

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table.astype(np.float64)).sum()
    sum_a = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    if total == 0.0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions are trivial (e.g. all singletons or one cluster)
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def clustering_metrics(labels_pred, labels_true):
    """(accuracy, NMI, ARI) for two hard labelings; all permutation-invariant."""
    return (
        clustering_accuracy(labels_pred, labels_true),
        normalized_mutual_info(labels_pred, labels_true),
        adjusted_rand_index(labels_pred, labels_true),
    )


def check_asc(m, tol):
    """Anchor check: does every cluster own a column near its identity vector?

    Returns ``(flag, witnesses)`` where witnesses[k] is a column index within
    l-infinity distance tol of identity vector k, or None if cluster k has no
    anchor (making the overall flag False).
    """
    if not 0.0 < tol < 0.5:
        raise ConfigError(f"tol must lie in (0, 0.5), got {tol}")
    m = linalg.as_matrix(m)
    k = m.shape[0]
    witnesses = []
    flag = True
    for row in range(k):
        dist = np.abs(m - np.eye(k)[:, [row]]).max(axis=0)
        best = int(np.argmin(dist))
        if dist[best] <= tol:
            witnesses.append(best)
        else:
            witnesses.append(None)
            flag = False
    return flag, witnesses


def sample_cone_directions(k, n_directions, rng):
    """Unit vectors uniform on the sphere cap inside the second-order cone
    {x : sqrt(K-1) ||x|| <= 1^T x}, drawn by rejection."""
    out = np.empty((k, n_directions))
    filled = 0
    while filled < n_directions:
        cand = rng.normal(size=(k, 4 * n_directions))
        cand /= np.linalg.norm(cand, axis=0, keepdims=True)
        keep = cand[:, cand.sum(axis=0) >= np.sqrt(k - 1.0)]
        take = min(keep.shape[1], n_directions - filled)
        out[:, filled : filled + take] = keep[:, :take]
        filled += take
    return out


def check_ssc_sampled(m, n_directions=200, seed=0, asc_tol=1e-6, residual_tol=1e-8):
    """Sampled scattering check: is the second-order cone inside cone(m)?

    Anchor-containing matrices short-circuit to certified (their conic hull
    is the whole nonnegative orthant, which contains the test cone).
    Otherwise unit directions sampled inside the cone are each tested for
    membership in cone(m) by a nonnegative least-squares feasibility solve;
    the verdict is sampled-pass only if every direction fits with residual
    below ``residual_tol``. A sampled verdict never certifies the condition.
    """
    if n_directions < 100:
        raise ConfigError(f"need at least 100 directions, got {n_directions}")
    m = linalg.as_matrix(m)
    flag, _ = check_asc(m, asc_tol)
    if flag:
        return SSC_CERTIFIED_BY_ASC
    rng = np.random.default_rng(seed)
    directions = sample_cone_directions(m.shape[0], n_directions, rng)
    for d in directions.T:
        _, residual = nnls(m, d)
        if residual >= residual_tol:
            return SSC_SAMPLED_FAIL
    return SSC_SAMPLED_PASS


def kmeans_reference(x, k, seed=0, restarts=5, max_iter=300):
    """Plain Lloyd's k-means on feature columns, k-means++ seeded, best of restarts.

    Empty clusters are re-seeded from the point farthest from its assigned
    centroid. Deterministic given the seed.
    """
    x = linalg.as_matrix(x)
    d, n = x.shape
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= {n}, got k={k}")
    rng = np.random.default_rng(seed)
    best_labels = None
    best_inertia = np.inf
    for _ in range(max(1, restarts)):
        centers = _kmeans_pp(x, k, rng)
        labels = None
        for _ in range(max_iter):
            d2 = _sq_dists(x, centers)
            new_labels = d2.argmin(axis=0)
            closest = d2[new_labels, np.arange(n)]
            for c in range(k):
                members = new_labels == c
                if not members.any():
                    far = int(np.argmax(closest))
                    centers[:, c] = x[:, far]
                    new_labels[far] = c
                    closest[far] = 0.0
                else:
                    centers[:, c] = x[:, members].mean(axis=1)
            if labels is not None and np.array_equal(labels, new_labels):
                break
            labels = new_labels
        inertia = float(_sq_dists(x, centers)[labels, np.arange(n)].sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def _sq_dists(x, centers):
    # (k, n) squared euclidean distances between centroid columns and sample columns
    return (
        np.sum(centers * centers, axis=0)[:, None]
        - 2.0 * centers.T @ x
        + np.sum(x * x, axis=0)[None, :]
    )


def _kmeans_pp(x, k, rng):
    n = x.shape[1]
    centers = np.empty((x.shape[0], k))
    centers[:, 0] = x[:, rng.integers(n)]
    closest = _sq_dists(x, centers[:, :1])[0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total))
            idx = min(idx, n - 1)
        centers[:, c] = x[:, idx]
        closest = np.minimum(closest, _sq_dists(x, centers[:, c : c + 1])[0])
    return centers


@dataclass
class EvalReport:
    """Everything measured about one trained model, seen and unseen splits."""

    mse_seen: float
    mse_unseen: float
    acc_seen: float
    acc_unseen: float
    nmi_seen: float
    nmi_unseen: float
    ari_seen: float
    ari_unseen: float
    gram_logdet: float
    asc_satisfied: bool
    asc_witnesses: list = field(default_factory=list)
    ssc_verdict: str = SSC_SAMPLED_FAIL
    permutation: list = field(default_factory=list)

    CSV_FIELDS = (
        "mse_seen",
        "mse_unseen",
        "acc_seen",
        "acc_unseen",
        "nmi_seen",
        "nmi_unseen",
        "ari_seen",
        "ari_unseen",
        "gram_logdet",
        "asc_satisfied",
        "ssc_verdict",
    )

    def csv_row(self):
        return {name: getattr(self, name) for name in self.CSV_FIELDS}

    def save(self, csv_path, sidecar_path):
        """One-row CSV plus a JSON sidecar carrying permutation and witnesses."""
        with open(csv_path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=self.CSV_FIELDS)
            writer.writeheader()
            writer.writerow(self.csv_row())
        with open(sidecar_path, "w") as f:
            json.dump(
                {
                    "permutation": [int(p) for p in self.permutation],
                    "asc_witnesses": [
                        None if w is None else int(w) for w in self.asc_witnesses
                    ],
                },
                f,
                indent=2,
            )


def evaluate_model(params, gt, ssc_directions=200, seed=0, asc_tol=0.05):
    """Score a trained membership network against ground truth.

    MSE/ACC/NMI/ARI are reported per split; the Gram volume and the
    anchor/scattering verdicts describe the estimated seen memberships
    (diagnosing collapsed or degenerate solutions).
    """
    m_hat_seen, _ = forward(params, gt.x_seen)
    mse_seen, perm = aligned_mse(m_hat_seen, gt.m_seen)
    true_labels = gt.hard_labels()
    pred_seen = np.argmax(m_hat_seen, axis=0)
    acc_s, nmi_s, ari_s = clustering_metrics(pred_seen, true_labels[: gt.seen_count])

    if gt.seen_count < gt.n_samples:
        m_hat_unseen, _ = forward(params, gt.x_unseen)
        mse_unseen, _ = aligned_mse(m_hat_unseen, gt.m_unseen)
        pred_unseen = np.argmax(m_hat_unseen, axis=0)
        acc_u, nmi_u, ari_u = clustering_metrics(
            pred_unseen, true_labels[gt.seen_count :]
        )
    else:
        mse_unseen, acc_u, nmi_u, ari_u = mse_seen, acc_s, nmi_s, ari_s

    gram_logdet, _ = linalg.logdet_gram(m_hat_seen, ridge=1e-12)
    asc_flag, witnesses = check_asc(m_hat_seen, asc_tol)
    verdict = check_ssc_sampled(
        m_hat_seen, n_directions=ssc_directions, seed=seed, asc_tol=asc_tol
    )
    return EvalReport(
        mse_seen=mse_seen,
        mse_unseen=mse_unseen,
        acc_seen=acc_s,
        acc_unseen=acc_u,
        nmi_seen=nmi_s,
        nmi_unseen=nmi_u,
        ari_seen=ari_s,
        ari_unseen=ari_u,
        gram_logdet=gram_logdet,
        asc_satisfied=asc_flag,
        asc_witnesses=witnesses,
        ssc_verdict=verdict,
        permutation=[int(p) for p in perm],
    )
