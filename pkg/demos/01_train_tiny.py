# %%
# A first training run
# ====================
#
# Everything here runs offline in under a minute: we synthesise a small
# digit dataset, carve out a class-balanced labeled/unlabeled/validation
# split, and train the dual model for a handful of epochs. Each submodel
# learns supervised cross-entropy on its own weak view of the labeled
# half, plus the negative-label loss on strong views of the unlabeled
# half, scored against label sets generated by the *other* submodel.

from dnll import (
    DualTrainer,
    OptimizerConfig,
    Seeds,
    TrainConfig,
    TrainData,
    split_dataset,
    synthetic_digits,
)

train = synthetic_digits(3000, seed=11)
test = synthetic_digits(600, seed=12, role="test")
labeled, unlabeled, validation = split_dataset(train, n_labeled=100, n_val_per_class=20, seed=1)
print(f"labeled={len(labeled)}  unlabeled={len(unlabeled)}  validation={len(validation)}")

# %%
# The unlabeled split hides its ground truth from the trainer: reading
# `.labels` raises. The true labels stay reachable for diagnostics only.

try:
    unlabeled.labels
except Exception as exc:
    print(f"unlabeled.labels -> {type(exc).__name__}: {exc}")

# %%
# Train. `learning_mode="mutual_plus_self"` is the full objective:
# cross-teaching plus self-teaching, m = 3 negative labels per item,
# error-perception (EPM) sampling.

cfg = TrainConfig(
    lam=1.0,
    m=3,
    selection_mode="EPM",
    learning_mode="mutual_plus_self",
    epochs=12,
    batch_size=50,
    hidden=(128, 64),
    optimizer=OptimizerConfig(base_lr=0.03),
    seeds=Seeds(model1=1, model2=2, data=3, sampler=4, augment=5),
)
data = TrainData(labeled, unlabeled, validation, test)
trainer = DualTrainer(data, cfg)

for metrics in trainer.run():
    print(
        f"epoch {metrics.epoch}: sup=({metrics.sup1:.3f},{metrics.sup2:.3f}) "
        f"cross=({metrics.cross1:.3f},{metrics.cross2:.3f}) "
        f"test=({metrics.test_acc1:.3f},{metrics.test_acc2:.3f},"
        f"ens {metrics.test_acc_ens:.3f})"
    )

# %%
# The headline number is the best-validation entity (submodel 1, submodel
# 2 or the averaged-softmax ensemble) and its test accuracy at that epoch.

print(f"best: {trainer.best}")

# %%
# The same run with lambda = 0 collapses to two independent supervised
# models; the whole unlabeled branch is skipped, bit for bit.

baseline = DualTrainer(data, TrainConfig(
    lam=0.0, m=3, epochs=12, batch_size=50, hidden=(128, 64),
    optimizer=OptimizerConfig(base_lr=0.03),
))
baseline.run()
print(f"supervised-only best: {baseline.best}")
gain = trainer.best["test_acc"] - baseline.best["test_acc"]
print(f"gain from unlabeled data: {100 * gain:+.1f} accuracy points")
