"""
Choosing k with the elbow, then looking at three granularities
==============================================================

Three well separated constant levels should give an elbow at k = 3.  The
selected k is then spread into a coarse, medium and fine level, each scored
with silhouette, Calinski-Harabasz and Davies-Bouldin.
"""

import sys
from pathlib import Path

from clusterlens.clustering import k_plan, kmeans_fit, pam_fit, suggest_k, validity
from clusterlens.distance import Metric, pairwise_matrix
from clusterlens.report import elbow_svg
from clusterlens.synthgen import SyntheticSpec, gen_blobs

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

blobs = gen_blobs(SyntheticSpec(n_classes=3, n_per_class=20, T=50, noise_sigma=0.5))

ks = [2, 3, 4, 5, 6]
inertia = [kmeans_fit(blobs, k, seed=0).inertia for k in ks]
k_M = suggest_k(ks, inertia)
for k, v in zip(ks, inertia):
    print(f"k={k}  inertia={v:10.1f}{'  <- elbow' if k == k_M else ''}")
elbow_svg(ks, inertia, k_M, out / "elbow.svg")

plan = k_plan(k_M)
print("levels:", plan.as_tuple())

# k-means on raw values, k-medoids on a DTW matrix
D = pairwise_matrix(blobs, Metric("dtw"))
for k in plan.as_tuple():
    v = validity(blobs, kmeans_fit(blobs, k, seed=0))
    w = validity(D, pam_fit(D, k))
    print(f"k={k}  kmeans sil {v.silhouette:.3f} CH {v.calinski_harabasz:9.1f} "
          f"DB {v.davies_bouldin:.3f} | kmedoids/dtw sil {w.silhouette:.3f}")

# the inertia column of a larger study: the elbow sits at 20
print("electricity curve:", suggest_k([10, 20, 30, 40], [1107, 854, 726, 646]))
print(f"elbow plot written to {out / 'elbow.svg'}")
