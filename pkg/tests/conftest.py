import numpy as np
import pytest

from dnll.nn import ModelState, predict_probs


def numeric_param_grads(model: ModelState, loss_of_model, eps: float = 1e-5):
    """Central finite differences of a scalar loss over every parameter.

    ``loss_of_model`` maps the (mutated-in-place) model to a float; the
    oracle never touches the analytic backward path.
    """
    grads_w, grads_b = [], []
    for arrays, grads in ((model.weights, grads_w), (model.biases, grads_b)):
        for arr in arrays:
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = loss_of_model(model)
                flat[i] = orig - eps
                lo = loss_of_model(model)
                flat[i] = orig
                gflat[i] = (hi - lo) / (2 * eps)
            grads.append(g)
    return grads_w, grads_b


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> float:
    """Largest |a - n| / max(|a|, |n|, floor) over all entries.

    The floor keeps finite-difference roundoff on near-zero entries from
    registering as disagreement.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(model, batch, loss_from_probs, analytic, eps=1e-5):
    """Compare analytic parameter gradients against the FD oracle."""

    def loss_of_model(m):
        return loss_from_probs(predict_probs(m, batch))

    num_w, num_b = numeric_param_grads(model, loss_of_model, eps=eps)
    worst = 0.0
    for a, n in zip(analytic.dw, num_w):
        worst = max(worst, max_rel_error(a, n))
    for a, n in zip(analytic.db, num_b):
        worst = max(worst, max_rel_error(a, n))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
