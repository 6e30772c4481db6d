# %%
# Negative labels: candidates, samplers, and error perception
# ============================================================
#
# A submodel's argmax on a weak view is its pseudo label. Every *other*
# class is a candidate negative; m of them become the label set the other
# submodel trains against. Two samplers are available: equal probability
# (EP) and the error-perception mechanism (EPM), which prefers classes the
# receiving submodel tends to confuse.

import numpy as np

from dnll import (
    MisclassProfile,
    candidate_count,
    normalize_profile,
    pseudo_label,
    sample_negatives_ep,
    sample_negatives_epm,
    update_misclass_profile,
)

probs = np.array([0.05, 0.1, 0.6, 0.05, 0.2])
pred = pseudo_label(probs)
print(f"prediction distribution {probs} -> pseudo label {pred}")
print(f"candidate m-sets for K=5, m=2: {candidate_count(5, 2)}")

# %%
# EP sampling: every candidate equally likely. Ten draws:

rng = np.random.default_rng(0)
for _ in range(5):
    nls = sample_negatives_ep(pred, 5, 2, rng)
    print(f"  mask={nls.mask}  (pseudo label {nls.pseudo_label} always zero)")

# %%
# The error-perception profile accumulates, per true class, the confidence
# of wrong predictions: an EMA-smoothed K x K confusion-mass matrix with a
# structurally zero diagonal.

profile = MisclassProfile(n_classes=5, ema_decay=0.0)
update_misclass_profile(
    profile,
    true_labels=np.array([2, 2, 2, 0]),
    pred_indices=np.array([0, 0, 1, 0]),       # last sample is correct
    pred_confidences=np.array([0.7, 0.6, 0.9, 0.8]),
)
print("pr[2] =", profile.pr[2])

# %%
# Each row is turned into a selection distribution by a softmax over the
# off-diagonal entries only; index k itself is masked out entirely so the
# pseudo label can never be drawn as its own negative.

r2 = normalize_profile(profile.pr[2], k=2)
print("rates for class 2:", np.round(r2, 4), " sum:", r2.sum())

# %%
# EPM draws negatives in proportion to those rates, without replacement.
# With a concentrated row, the top confusion class dominates:

counts = np.zeros(5)
for _ in range(4000):
    counts += sample_negatives_epm(2, r2, 5, 1, rng).mask
print("empirical pick frequency:", np.round(counts / 4000, 3))
print("rates:                   ", np.round(r2, 3))

# %%
# With an all-zero profile the rates are uniform and EPM reduces to EP in
# distribution.

uniform = normalize_profile(np.zeros(5), k=2)
print("uniform rates:", uniform)
