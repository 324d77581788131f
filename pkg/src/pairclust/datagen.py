"""Synthetic ground truth, feature construction and pairwise-annotation samplers.

Memberships are sampled as noisy unit vectors projected onto the simplex by
truncation and l1 normalization; features come from an explicit inverse
feature map so that a genuine feature-to-membership function exists. All
randomness flows through numpy's seeded PCG64 generator, so identical seeds
reproduce identical datasets byte for byte.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    DataError,
    ModelError,
    ShapeError,
    UnsupportedClusterCountError,
)

PROB_TOL = 1e-9


@dataclass
class GroundTruth:
    """True memberships (K x N), features (D x N) and the seen/unseen split.

    The first ``seen_count`` columns are the seen samples (eligible for
    annotation); the remainder are held out to measure generalization.
    """

    m_true: np.ndarray
    x_features: np.ndarray
    seen_count: int

    def __post_init__(self):
        self.m_true = np.asarray(self.m_true, dtype=np.float64)
        self.x_features = np.asarray(self.x_features, dtype=np.float64)
        if self.m_true.ndim != 2 or self.x_features.ndim != 2:
            raise ShapeError("memberships and features must be 2-D")
        if self.m_true.shape[1] != self.x_features.shape[1]:
            raise ShapeError(
                f"memberships have {self.m_true.shape[1]} columns, features "
                f"{self.x_features.shape[1]}"
            )
        if self.m_true.min() < 0.0 or np.abs(self.m_true.sum(axis=0) - 1.0).max() > PROB_TOL:
            raise DataError("membership columns must lie on the probability simplex")
        if not 0 < self.seen_count <= self.m_true.shape[1]:
            raise ConfigError(f"invalid seen_count {self.seen_count}")

    @property
    def n_samples(self):
        return self.m_true.shape[1]

    @property
    def n_clusters(self):
        return self.m_true.shape[0]

    @property
    def m_seen(self):
        return self.m_true[:, : self.seen_count]

    @property
    def m_unseen(self):
        return self.m_true[:, self.seen_count :]

    @property
    def x_seen(self):
        return self.x_features[:, : self.seen_count]

    @property
    def x_unseen(self):
        return self.x_features[:, self.seen_count :]

    def hard_labels(self):
        return np.argmax(self.m_true, axis=0)


@dataclass
class AnnotationSet:
    """Pairwise similarity triplets (i, j, y) over samples 0..n-1."""

    i: np.ndarray
    j: np.ndarray
    y: np.ndarray
    n: int

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64)
        self.j = np.asarray(self.j, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if not (self.i.shape == self.j.shape == self.y.shape) or self.i.ndim != 1:
            raise ShapeError("annotation arrays must be 1-D and equally long")
        if len(self.i) and (
            self.i.min() < 0
            or self.j.min() < 0
            or self.i.max() >= self.n
            or self.j.max() >= self.n
        ):
            raise DataError(f"annotation indices out of range for n={self.n}")
        if not np.isin(self.y, (0, 1)).all():
            raise DataError("annotation labels must be 0 or 1")

    def __len__(self):
        return len(self.i)

    def subset(self, idx):
        return AnnotationSet(self.i[idx], self.j[idx], self.y[idx], self.n)


def inverse_feature_map_k3(m):
    """Built-in 3-cluster inverse feature map.

    Maps membership columns m = (m1, m2, m3) to features
    (2 m1, 3 m2 + 1, m1 m2 + m3 - 2); invertible on the simplex, so a true
    feature-to-membership function exists.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape[0] != 3:
        raise UnsupportedClusterCountError(
            f"built-in inverse map needs K=3, got K={m.shape[0]}"
        )
    return np.vstack([2.0 * m[0], 3.0 * m[1] + 1.0, m[0] * m[1] + m[2] - 2.0])


def synth_generate(n, k, seed, seen_count=None, noise_var=0.1, inverse_map=None):
    """Generate a synthetic GroundTruth with n samples and k clusters.

    Memberships: random unit vectors plus elementwise Gaussian noise with the
    given variance, negatives truncated to zero, columns l1-normalized
    (all-zero columns are re-drawn). Features are the inverse feature map
    applied columnwise; pass ``inverse_map`` for k != 3.
    """
    if k < 2:
        raise ConfigError(f"need k >= 2, got {k}")
    if n < 2 * k:
        raise ConfigError(f"need n >= 2k, got n={n}, k={k}")
    if inverse_map is None:
        if k != 3:
            raise UnsupportedClusterCountError(
                "built-in inverse feature map only supports k=3; pass inverse_map"
            )
        inverse_map = inverse_feature_map_k3
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(noise_var)

    def draw(count):
        g = rng.normal(size=(k, count))
        u = g / np.linalg.norm(g, axis=0, keepdims=True)
        m = np.maximum(u + rng.normal(scale=sigma, size=(k, count)), 0.0)
        return m

    m = draw(n)
    # re-draw columns fully truncated to zero; vanishing probability but the
    # l1 normalization below must never divide by zero
    while True:
        sums = m.sum(axis=0)
        bad = np.flatnonzero(sums == 0.0)
        if len(bad) == 0:
            break
        m[:, bad] = draw(len(bad))
    m /= m.sum(axis=0, keepdims=True)

    x = inverse_map(m)
    if seen_count is None:
        seen_count = n // 2
    return GroundTruth(m_true=m, x_features=x, seen_count=int(seen_count))


def default_confusion_k3():
    """The built-in 3-class column-stochastic annotator confusion matrix."""
    return np.array(
        [
            [1.0, 0.2, 0.3],
            [0.0, 0.8, 0.3],
            [0.0, 0.0, 0.4],
        ]
    )


def check_confusion_matrix(a):
    """Validate a column-stochastic confusion matrix; returns it as float64."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"confusion matrix must be square, got {a.shape}")
    if a.min() < 0.0:
        raise DataError("confusion matrix entries must be nonnegative")
    if np.abs(a.sum(axis=0) - 1.0).max() > PROB_TOL:
        raise DataError("confusion matrix columns must sum to 1")
    return a


def sample_annotations(gt, m_pairs, b_true, seed):
    """Sample pairwise annotations from the Bernoulli pair model.

    Pairs (i, j) are drawn independently and uniformly over the seen columns
    (ordered, i = j allowed); each label is Bernoulli(m_i^T b_true m_j).
    b_true = I gives noise-free same-cluster probabilities; b_true = A^T A for
    a confusion matrix A gives the annotator-confusion model.
    """
    b_true = np.asarray(b_true, dtype=np.float64)
    k = gt.n_clusters
    if b_true.shape != (k, k):
        raise ShapeError(f"b_true must be {k}x{k}, got {b_true.shape}")
    rng = np.random.default_rng(seed)
    n_seen = gt.seen_count
    ii = rng.integers(0, n_seen, size=m_pairs)
    jj = rng.integers(0, n_seen, size=m_pairs)
    mi = gt.m_true[:, ii]
    mj = gt.m_true[:, jj]
    p = np.sum(mi * (b_true @ mj), axis=0)
    if len(p) and (p.min() < -PROB_TOL or p.max() > 1.0 + PROB_TOL):
        raise ModelError(
            f"pair probability outside [0,1] (min={p.min()}, max={p.max()}); "
            "b_true is not a valid pair-interaction matrix"
        )
    p = np.clip(p, 0.0, 1.0)
    y = (rng.random(m_pairs) < p).astype(np.int64)
    return AnnotationSet(i=ii, j=jj, y=y, n=n_seen)


def machine_annotate(labels_pred, m_pairs, seed):
    """Annotate uniform random pairs by agreement of predicted class labels.

    Simulates an imperfect classifier acting as annotator: y = 1 iff the two
    samples share the same predicted label.
    """
    labels = np.asarray(labels_pred, dtype=np.int64)
    if labels.ndim != 1 or len(labels) == 0:
        raise ConfigError("labels_pred must be a non-empty 1-D array")
    rng = np.random.default_rng(seed)
    n = len(labels)
    ii = rng.integers(0, n, size=m_pairs)
    jj = rng.integers(0, n, size=m_pairs)
    y = (labels[ii] == labels[jj]).astype(np.int64)
    return AnnotationSet(i=ii, j=jj, y=y, n=n)


def annotation_error_rate(ann, gt):
    """Fraction of annotations disagreeing with the true same-cluster relation.

    The true relation is computed from argmax memberships, so ground truth
    should be (near-)hard for this to be meaningful.
    """
    labels = gt.hard_labels()
    agree = labels[ann.i] == labels[ann.j]
    if len(ann) == 0:
        return 0.0
    return float(np.mean(ann.y != agree))


# ---------------------------------------------------------------------------
# CSV formats: memberships/features are one row per sample with component
# headers; annotations are "i,j,y" triplets; confusion matrices are bare
# K x K grids. Floats are written with repr so files round-trip bit-exactly.


def _fmt(v):
    return repr(float(v))


def save_matrix_csv(m, path, prefix):
    """Write a component x sample matrix as sample rows with a component header."""
    m = np.asarray(m, dtype=np.float64)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"{prefix}{r}" for r in range(m.shape[0])])
        for col in m.T:
            writer.writerow([_fmt(v) for v in col])


def load_matrix_csv(path, prefix):
    """Read a matrix written by :func:`save_matrix_csv`; returns component x sample."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not all(h.startswith(prefix) for h in header):
            raise DataError(f"unexpected header {header} in {path}")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise DataError(f"no data rows in {path}")
    return np.array(rows, dtype=np.float64).T


def save_membership_csv(m, path):
    save_matrix_csv(m, path, "k")


def load_membership_csv(path):
    return load_matrix_csv(path, "k")


def save_features_csv(x, path):
    save_matrix_csv(x, path, "d")


def load_features_csv(path):
    return load_matrix_csv(path, "d")


def save_annotations_csv(ann, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "j", "y"])
        for i, j, y in zip(ann.i, ann.j, ann.y):
            writer.writerow([int(i), int(j), int(y)])


def load_annotations_csv(path, n=None):
    """Load an annotation CSV; ``n`` defaults to max index + 1."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != ["i", "j", "y"]:
            raise DataError(f"unexpected header {header} in {path}")
        rows = [(int(r[0]), int(r[1]), int(r[2])) for r in reader if r]
    if not rows:
        raise DataError(f"no annotations in {path}")
    arr = np.array(rows, dtype=np.int64)
    if n is None:
        n = int(max(arr[:, 0].max(), arr[:, 1].max())) + 1
    return AnnotationSet(i=arr[:, 0], j=arr[:, 1], y=arr[:, 2], n=int(n))


def save_confusion_csv(a, path):
    a = check_confusion_matrix(a)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for row in a:
            writer.writerow([_fmt(v) for v in row])


def load_confusion_csv(path):
    with open(path, newline="") as f:
        rows = [[float(v) for v in row] for row in csv.reader(f) if row]
    return check_confusion_matrix(np.array(rows, dtype=np.float64))
