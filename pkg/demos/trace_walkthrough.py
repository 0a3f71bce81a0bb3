"""
Why does a boosted tree tell the Trace classes apart?
=====================================================

The Trace series come with labels, so the labels play the role of clusters.
We build the 20 summary features, fit boosted trees on a 70/30 split and ask
TreeSHAP which features carry the decision.
"""

import numpy as np

from clusterlens.classify import evaluate, stratified_split
from clusterlens.dataset import load_trace, minmax_scale
from clusterlens.explain import aggregate_cluster, aggregate_global, treeshap
from clusterlens.features import FEATURE_NAMES, feature_matrix
from clusterlens.trees import fit_gbt, gain_importance

trace = minmax_scale(load_trace())
print(f"{trace.n_series} series of length {trace.length}, classes {np.unique(trace.labels)}")

# one row of 20 features per series
F = feature_matrix(trace.values)
y = trace.labels.astype(int)

tr, te = stratified_split(y, 0.3, seed=0)
ens = fit_gbt(F[tr], y[tr], gamma=0.0, max_depth=6)
print("test metrics:", {k: round(v, 3) for k, v in evaluate(ens.predict(F[te]), y[te]).items()
                        if k != "per_class_f1"})

# SHAP values of each training row for its predicted class
pred = ens.predict(F[tr])
shap = [treeshap(ens, F[i], int(p)) for i, p in zip(tr, pred)]
glob = aggregate_global(shap)
gain = gain_importance(ens)

print("\nfeature           mean|SHAP|   gain")
for j in np.argsort(-glob)[:8]:
    print(f"{FEATURE_NAMES[j]:<16} {glob[j]:10.4f} {gain[j]:7.3f}")

# the two importance orders need not match
print("\ntop-5 by SHAP:", [FEATURE_NAMES[j] for j in np.argsort(-glob)[:5]])
print("top-5 by gain:", [FEATURE_NAMES[j] for j in np.argsort(-gain)[:5]])

# each class leans on its own features
for c in range(4):
    _, mean = aggregate_cluster(shap, y[tr], c)
    print(f"class {c}: {FEATURE_NAMES[int(np.argmax(mean))]}")
