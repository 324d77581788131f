"""Generate synthetic memberships/features and sample pairwise annotations.

Walks through the data model: column-stochastic membership vectors, the
invertible feature map that guarantees a true feature->membership function
exists, and the Bernoulli pair-annotation process with and without annotator
confusion.
"""

import numpy as np

from pairclust import (
    annotation_error_rate,
    default_confusion_k3,
    sample_annotations,
    synth_generate,
)

gt = synth_generate(n=2000, k=3, seed=1234, seen_count=1000)
print(f"memberships: {gt.m_true.shape}, features: {gt.x_features.shape}")
print(f"column sums (should all be 1): {gt.m_true.sum(axis=0)[:5]}")
print(f"first membership column: {gt.m_true[:, 0]}")
print(f"its feature vector:      {gt.x_features[:, 0]}")

# how mixed are the memberships? max entry of 1.0 would be a pure sample
max_entry = gt.m_true.max(axis=0)
print(f"\nmax membership entry: mean={max_entry.mean():.3f}, "
      f"share of near-pure samples (>0.99): {(max_entry > 0.99).mean():.1%}")

# clean annotations: y ~ Bernoulli(m_i . m_j) over seen samples only
clean = sample_annotations(gt, m_pairs=10_000, b_true=np.eye(3), seed=0)
print(f"\nclean annotations: {len(clean)} pairs, positive rate {clean.y.mean():.3f}")
print(f"disagreement with the argmax same-cluster relation: "
      f"{annotation_error_rate(clean, gt):.1%} (soft memberships make this nonzero)")

# annotator confusion: the perceived membership is A m, so the pair
# probability routes through the Gram matrix A^T A
a = default_confusion_k3()
print(f"\nconfusion matrix A (columns sum to 1):\n{a}")
noisy = sample_annotations(gt, m_pairs=10_000, b_true=a.T @ a, seed=0)
print(f"confused annotations: positive rate {noisy.y.mean():.3f}, "
      f"noise level {annotation_error_rate(noisy, gt):.1%}")
