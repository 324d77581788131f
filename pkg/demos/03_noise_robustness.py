"""Plain logistic training vs the confusion-aware volume-regularized model.

Annotations are corrupted by a known confusion matrix. The plain model has
no way to explain the systematic label noise and absorbs it into distorted
memberships; letting the interaction matrix be learned (with the volume
regularizer keeping the solution identifiable) recovers much better
memberships at the same annotation budget.
"""

from dataclasses import replace

import numpy as np

from pairclust import (
    TrainConfig,
    annotation_error_rate,
    b_matrix,
    default_confusion_k3,
    evaluate_model,
    sample_annotations,
    select_lambda,
    split_validation,
    synth_generate,
    train,
)

gt = synth_generate(n=600, k=3, seed=7, seen_count=300)
a = default_confusion_k3()
ann = sample_annotations(gt, m_pairs=6000, b_true=a.T @ a, seed=2)
print(f"annotation noise level: {annotation_error_rate(ann, gt):.1%}")

train_ann, val_ann = split_validation(ann, fraction=0.1, seed=2)
base = TrainConfig(epochs=120, batch_pairs=128, seed=0)

plain_params, _ = train(gt.x_seen, train_ann, base, validation=val_ann)
plain = evaluate_model(plain_params, gt, seed=0)
print(f"\nplain logistic:        mse seen={plain.mse_seen:.4f} unseen={plain.mse_unseen:.4f}")

cfg = replace(base, learn_b=True, lambda_grid=(0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1))
best_lam, results = select_lambda(gt.x_seen, train_ann, cfg, val_ann)
vol_params = next(r.params for r in results if r.lam == best_lam)
vol = evaluate_model(vol_params, gt, seed=0)
print(f"volume-regularized:    mse seen={vol.mse_seen:.4f} unseen={vol.mse_unseen:.4f} "
      f"(lambda={best_lam:g} picked on held-out pair loss)")

improvement = (plain.mse_seen - vol.mse_seen) / plain.mse_seen
print(f"seen-MSE improvement: {improvement:.0%}")

# the learned interaction matrix estimates the true Gram A^T A up to
# conjugation by the cluster permutation the model settled on
perm = np.asarray(vol.permutation)
pi = np.eye(3)[perm]
b_learned, _ = b_matrix(vol_params)
print(f"\ntrue pair-interaction Gram (A^T A):\n{np.round(a.T @ a, 3)}")
print(f"learned interaction, permutation-aligned:\n"
      f"{np.round(pi.T @ b_learned @ pi, 3)}")
