# %%
# The negative-label loss and its gradients
# =========================================
#
# Cross-entropy pulls predicted probability *up* at the true class; the
# negative-label loss -sum_i c_i log(1 - p_i) pushes probability *down* at
# every marked class. Both return exact gradients with respect to logits,
# ready to feed straight into backprop.

import numpy as np

from dnll import (
    Architecture,
    backprop,
    cross_entropy,
    init_model,
    negative_loss,
    one_hot,
    predict_probs,
)

probs = np.array([[0.2, 0.5, 0.3]])
mask = np.array([[1.0, 0.0, 0.0]])
res = negative_loss(probs, mask)
print(f"-log(1 - 0.2) = {res.value:.5f}")
print("gradient wrt logits:", np.round(res.grad_logits, 4))

# %%
# The gradient at a marked class is positive whenever its probability is
# interior, so a descent step always lowers the marked probability:

for p0 in (0.1, 0.5, 0.9):
    row = np.array([[p0, (1 - p0) * 0.6, (1 - p0) * 0.4]])
    g = negative_loss(row, mask).grad_logits[0, 0]
    print(f"p(marked)={p0}: dL/dlogit = {g:+.4f}")

# %%
# With every class but one marked (m = K-1), minimising the negative loss
# is the same problem as minimising cross-entropy against the remaining
# class; both are zero exactly at that one-hot distribution:

k, target = 4, 2
full_mask = np.ones((1, k))
full_mask[0, target] = 0.0
onehot = one_hot(np.array([target]), k)
print("negative loss at one-hot:", negative_loss(onehot, full_mask).value)
print("cross-entropy at one-hot:", cross_entropy(onehot, onehot).value)

# %%
# Finite differences vs the analytic chain through a small network. The
# numeric side perturbs raw parameters and re-runs the forward pass only.

arch = Architecture(input_dim=6, hidden=(8,), n_classes=4)
model = init_model(arch, seed=3)
rng = np.random.default_rng(0)
batch = rng.normal(size=(5, 6))
mask = np.zeros((5, 4))
for i in range(5):
    mask[i, rng.choice(4, size=2, replace=False)] = 1.0

analytic = backprop(model, batch, negative_loss(predict_probs(model, batch), mask).grad_logits)

eps = 1e-5
w = model.weights[0]
numeric = np.zeros_like(w)
for i in range(w.shape[0]):
    for j in range(w.shape[1]):
        orig = w[i, j]
        w[i, j] = orig + eps
        hi = negative_loss(predict_probs(model, batch), mask).value
        w[i, j] = orig - eps
        lo = negative_loss(predict_probs(model, batch), mask).value
        w[i, j] = orig
        numeric[i, j] = (hi - lo) / (2 * eps)

rel = np.abs(analytic.dw[0] - numeric) / np.maximum(np.abs(numeric), 1e-5)
print(f"max relative error vs finite differences: {rel.max():.2e}")
