"""Volume-weighted cross-entropy between predicted and true occupancy."""

import numpy as np


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def kl_loss(scores, target, volumes):
    """Loss and gradient w.r.t. the (inside, outside) scores.

    loss = -sum_t V_t [y_t log p_t + (1 - y_t) log(1 - p_t)] / sum_t V_t with
    p_t = softmax(i_t, o_t)[0].  The entropy of the target, constant in the
    scores, is dropped.  Logarithms are taken as log-sigmoids of the score
    difference, so saturated predictions keep finite values and gradients.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    V = np.asarray(volumes, dtype=np.float64)
    total = V.sum()
    if total <= 0:
        raise ValueError("volume weights must have a positive sum")
    d = s[:, 0] - s[:, 1]
    ll = y * log_sigmoid(d) + (1.0 - y) * log_sigmoid(-d)
    loss = -(V * ll).sum() / total
    p = np.exp(log_sigmoid(d))
    gi = -V * (y - p) / total
    grad = np.stack([gi, -gi], axis=1)
    return float(loss), grad
