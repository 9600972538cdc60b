"""Central finite-difference check of the analytic gradients."""

import numpy as np

from .loss import kl_loss

# round-off of one loss evaluation, in units of eps * |loss|
NOISE_ULPS = 100


def _loss(model, plan, X, mode, target, volumes):
    scores = model.forward(plan, X, mode, update_running=False)
    return kl_loss(scores, target, volumes)[0]


def _activation_pattern(model, plan, X, mode):
    model.forward(plan, X, mode, update_running=False, keep=True)
    _, _, cache, head_cache = model._cache
    pats = [c[4] for c in cache] + [h[1] for h in head_cache if h[1] is not None]
    return np.concatenate([p.ravel() for p in pats])


def gradient_check(model, plan, X, target, volumes, mode="train", groups=None, per_group=12,
                   h=1e-5, seed=0):
    """Relative error per parameter group over randomly chosen entries.

    Entries whose perturbation flips a ReLU are skipped, since the loss is not
    differentiable across the kink.  The error of a group is
    max |analytic - numeric| / max(|analytic|, |numeric|) over its checked
    entries, so entries with near-zero gradients are judged on the scale of
    the group rather than on round-off of the difference quotient.  A group
    whose analytic and numeric gradients both stay below the round-off floor
    of the difference quotient (biases ahead of a train-mode batch norm have
    an identically zero gradient) is reported with error 0.
    """
    rng = np.random.default_rng(seed)
    scores = model.forward(plan, X, mode, update_running=False, keep=True)
    _, dscores = kl_loss(scores, target, volumes)
    grads = model.backward(dscores)
    base = _activation_pattern(model, plan, X, mode)
    loss0 = _loss(model, plan, X, mode, target, volumes)
    floor = NOISE_ULPS * np.finfo(np.float64).eps * max(1.0, abs(loss0)) / h
    out = {}
    for name in groups or sorted(model.params):
        p = model.params[name]
        flat = p.reshape(-1)
        idx = rng.permutation(flat.size)
        diffs = []
        scale = 0.0
        used = 0
        for i in idx:
            if used >= per_group:
                break
            old = flat[i]
            flat[i] = old + h
            up = _loss(model, plan, X, mode, target, volumes)
            pat_up = _activation_pattern(model, plan, X, mode)
            flat[i] = old - h
            down = _loss(model, plan, X, mode, target, volumes)
            pat_down = _activation_pattern(model, plan, X, mode)
            flat[i] = old
            if not (np.array_equal(pat_up, base) and np.array_equal(pat_down, base)):
                continue
            num = (up - down) / (2 * h)
            ana = grads[name].reshape(-1)[i]
            diffs.append(abs(ana - num))
            scale = max(scale, abs(ana), abs(num))
            used += 1
        worst = max(diffs) / scale if used and scale > floor else 0.0
        out[name] = (worst, used)
    return out, grads
