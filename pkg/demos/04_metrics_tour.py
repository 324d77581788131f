"""Tour of the evaluation toolbox: alignment, assignment, label metrics.

Cluster labels are only identifiable up to a permutation, so every metric
here first aligns its arguments: the membership MSE through an exact
assignment over row permutations, the accuracy through an assignment on the
label contingency table.
"""

import numpy as np

from pairclust import aligned_mse, clustering_metrics, hungarian

rng = np.random.default_rng(0)

# permutation-aligned membership MSE
m_true = rng.random((3, 8)) + 0.05
shuffled = m_true[[2, 0, 1]]  # same memberships, clusters renamed
mse, perm = aligned_mse(shuffled, m_true)
print(f"MSE of a row-shuffled copy: {mse:.2e} (aligning permutation {perm})")

noisy = m_true + 0.15 * rng.random((3, 8))
mse, _ = aligned_mse(noisy[[2, 0, 1]], m_true)
print(f"MSE of a perturbed shuffled copy: {mse:.4f}")

# the assignment solver underneath
cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
assignment, total = hungarian(cost)
print(f"\nassignment for\n{cost}\nrow->col {assignment}, total cost {total}")

# label metrics are relabeling-invariant
true = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
pred_renamed = np.array([1, 1, 1, 2, 2, 2, 0, 0, 0])
print(f"\nrenamed clusters:  acc/nmi/ari = {clustering_metrics(pred_renamed, true)}")

pred_mistakes = np.array([0, 0, 1, 1, 1, 2, 2, 2, 2])
acc, nmi, ari = clustering_metrics(pred_mistakes, true)
print(f"two mislabelings:  acc={acc:.3f} nmi={nmi:.3f} ari={ari:.3f}")

# maximally anti-correlated toy case: no pair co-clustered in both labelings
acc, nmi, ari = clustering_metrics(np.array([0, 1, 0, 1]), np.array([0, 0, 1, 1]))
print(f"crossed labeling:  acc={acc:.3f} nmi={nmi:.3f} ari={ari:.3f} (negative ARI)")
