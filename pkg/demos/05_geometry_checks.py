"""Membership-geometry predicates: anchors, scattering, Gram volume.

Recovery from pairwise annotations is well posed when the membership columns
are geometrically diverse. Two testable conditions: the anchor check (every
cluster owns a near-pure sample) and the sampled scattering check (the conic
hull of the columns covers the central second-order cone). The log-det Gram
volume is the quantity the training regularizer pushes up.
"""

import numpy as np

from pairclust import check_asc, check_ssc_sampled, synth_generate
from pairclust.linalg import logdet_gram

# anchors present: one pure column per cluster
anchored = np.hstack([np.eye(3), np.full((3, 5), 1.0 / 3.0)])
flag, witnesses = check_asc(anchored, tol=0.05)
print(f"anchored matrix:  asc={flag}, witness columns={witnesses}")
print(f"  scattering verdict: {check_ssc_sampled(anchored, 200, seed=0)}")

# remove one anchor: the check names the uncovered cluster
missing = np.hstack([np.eye(3)[:, :2], np.full((3, 6), 1.0 / 3.0)])
flag, witnesses = check_asc(missing, tol=0.05)
print(f"\nmissing anchor:   asc={flag}, witnesses={witnesses} (None = no anchor)")

# no anchors, but columns scattered enough to cover the central cone:
# each simplex facet carries a segment through the cone's tangency point
hexagon = np.array(
    [
        [0.7, 0.3, 0.0], [0.3, 0.7, 0.0], [0.0, 0.7, 0.3],
        [0.0, 0.3, 0.7], [0.3, 0.0, 0.7], [0.7, 0.0, 0.3],
    ]
).T
print(f"\nscattered hexagon (no anchors): "
      f"{check_ssc_sampled(hexagon, 200, seed=0)}")

# collapsed memberships: a single ray cannot cover the cone
collapsed = np.full((3, 10), 1.0 / 3.0)
print(f"collapsed (rank 1):             {check_ssc_sampled(collapsed, 200, seed=0)}")

# Gram volume distinguishes the two regimes
val, _ = logdet_gram(hexagon, ridge=1e-12)
print(f"\nlog-det Gram volume, scattered: {val:.2f}")
val, _ = logdet_gram(collapsed + 1e-3 * np.random.default_rng(0).random((3, 10)),
                     ridge=1e-12)
print(f"log-det Gram volume, collapsed: {val:.2f} (far more negative)")

# generated synthetic data is scattered by construction
gt = synth_generate(400, 3, seed=0)
print(f"\nsynthetic memberships: {check_ssc_sampled(gt.m_seen, 200, seed=0)}")
