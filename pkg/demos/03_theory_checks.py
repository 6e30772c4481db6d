# %%
# Monte Carlo checks of the two combinatorial guarantees
# ======================================================
#
# Result 1: transferring m uniformly drawn negative labels from a generator
# with accuracy q contradicts the truth with probability (1-q) * m/(K-1),
# i.e. m/(K-1) of the pseudo-label error rate. Result 2: two submodels hand each
# other the identical negative set with probability
# q/C(K-1,m) + (1-q)/C(K-2,m), which vanishes quickly in K: the dual model
# stays decoupled.
#
# The simulators below draw these stories directly and never consult the
# closed forms, so agreement is evidence rather than tautology.

import math

from dnll import (
    TransferModel,
    coupling_probability,
    coupling_probability_stirling,
    simulate_coupling,
    simulate_transfer_error,
    transfer_error_rate,
)

model = TransferModel(q=0.9, n_classes=10, m=1, trials=500_000, seed=0)
res = simulate_transfer_error(model)
print(f"transfer error  closed={res.closed_form:.6f}  mc={res.estimate:.6f}  z={res.z_score:+.2f}")

model = TransferModel(q=0.5, n_classes=10, m=2, trials=500_000, seed=0)
res = simulate_coupling(model)
print(f"coupling        closed={res.closed_form:.6f}  mc={res.estimate:.6f}  z={res.z_score:+.2f}")

# %%
# Negative labels vs pseudo labels: the error-rate ratio is exactly
# m/(K-1), so one negative label among ten classes carries 1/9 of the
# pseudo-label transfer risk.

for m in (1, 3, 9):
    er = transfer_error_rate(0.7, 10, m)
    print(f"m={m}: transfer error {er:.4f}  (pseudo-label error is 0.3)")

# %%
# The coupling probability has an instructive edge case: with m = K-1 the
# negative set is forced, so coupling would be certain, which is why the
# closed form requires m <= K-2.
#
# Its large-K limit sqrt(2*pi*m) * (m/(e*K))**m converges from below; the
# relative error shrinks as K grows:

for k in (20, 50, 100, 500):
    exact = coupling_probability(0.5, k, 1)
    approx = coupling_probability_stirling(k, 1)
    print(f"K={k:4d}: exact={exact:.6f}  stirling={approx:.6f}  rel.err={abs(approx-exact)/exact:.4f}")

# %%
# The closed form's different-prediction case treats both submodels as
# drawing from the common pool of K-2 classes that excludes both pseudo
# labels. A stricter story (each keeps its own K-1 candidates) couples
# *less* often. The simulator exposes that reading too, and the z-score
# quantifies the gap instead of hiding it:

model = TransferModel(q=0.5, n_classes=10, m=1, trials=500_000, seed=0)
strict = simulate_coupling(model, shared_pool=False)
own = 0.5 / math.comb(9, 1) + 0.5 * math.comb(8, 1) / math.comb(9, 1) ** 2
print(f"strict story: mc={strict.estimate:.6f}  its own exact value={own:.6f}")
print(f"gap to the shared-pool closed form: z={strict.z_score:+.1f}")
