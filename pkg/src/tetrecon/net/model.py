"""GraphSAGE occupancy network with a hand-written backward pass (float64 numpy).

Layer k maps node features x to
    relu(bn(W_k [x_s ‖ mean_{u in N(s)} x_u] + b_k))
and a two-layer head turns the last embedding into (inside, outside) scores.
"""

import numpy as np

from ..features import FeatureNormalizer, N_FEATURES
from .graph import full_plan, nodewise_plan

SCHEMA_VERSION = 1
WIDTHS = (64, 128, 256, 256)
HEAD = (64, 2)
BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class ShapeMismatch(ValueError):
    pass


class OccupancyModel:
    def __init__(self, in_dim=N_FEATURES, widths=WIDTHS, head=HEAD, seed=0, normalizer=None):
        self.in_dim = int(in_dim)
        self.widths = tuple(int(w) for w in widths)
        self.head = tuple(int(h) for h in head)
        if self.head[-1] != 2:
            raise ValueError("the head must end in 2 outputs (inside, outside)")
        self.normalizer = normalizer
        self.params = {}
        self.buffers = {}
        rng = np.random.default_rng(seed)
        fan = self.in_dim
        for k, w in enumerate(self.widths):
            self.params[f"sage{k}.weight"] = _kaiming(rng, w, 2 * fan)
            self.params[f"sage{k}.bias"] = np.zeros(w)
            self.params[f"bn{k}.gamma"] = np.ones(w)
            self.params[f"bn{k}.beta"] = np.zeros(w)
            self.buffers[f"bn{k}.running_mean"] = np.zeros(w)
            self.buffers[f"bn{k}.running_var"] = np.ones(w)
            fan = w
        for j, w in enumerate(self.head):
            self.params[f"head{j}.weight"] = _kaiming(rng, w, fan)
            self.params[f"head{j}.bias"] = np.zeros(w)
            fan = w

    @property
    def n_layers(self):
        return len(self.widths)

    def copy(self):
        m = OccupancyModel.__new__(OccupancyModel)
        m.in_dim, m.widths, m.head = self.in_dim, self.widths, self.head
        m.normalizer = self.normalizer
        m.params = {k: v.copy() for k, v in self.params.items()}
        m.buffers = {k: v.copy() for k, v in self.buffers.items()}
        return m

    # ------------------------------------------------------------------
    def forward(self, plan, X, mode="eval", update_running=True, keep=False):
        """Scores (n_out, 2) on ``plan.outputs``; ``X`` holds features of all graph nodes.

        mode "train" normalizes with batch statistics (and updates running
        statistics unless ``update_running`` is False); "eval" uses the stored
        running statistics.  ``keep`` retains what backward needs.
        """
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ShapeMismatch(f"features must have shape (n, {self.in_dim})")
        if plan.n_layers != self.n_layers:
            raise ShapeMismatch("plan depth differs from the number of layers")
        train = mode == "train"
        if mode not in ("train", "eval"):
            raise ValueError("mode must be 'train' or 'eval'")
        cache = [] if keep else None
        x = X[plan.nodes[0]]
        for k in range(self.n_layers):
            W = self.params[f"sage{k}.weight"]
            b = self.params[f"sage{k}.bias"]
            g = self.params[f"bn{k}.gamma"]
            beta = self.params[f"bn{k}.beta"]
            xs = x[plan.select[k]]
            agg = plan.mean[k] @ x
            h = np.concatenate([xs, agg], axis=1)
            z = h @ W.T + b
            if train:
                n = z.shape[0]
                mu = z.mean(0)
                var = z.var(0)
                if update_running:
                    unbiased = var * n / (n - 1) if n > 1 else var
                    rm = self.buffers[f"bn{k}.running_mean"]
                    rv = self.buffers[f"bn{k}.running_var"]
                    rm *= 1.0 - BN_MOMENTUM
                    rm += BN_MOMENTUM * mu
                    rv *= 1.0 - BN_MOMENTUM
                    rv += BN_MOMENTUM * unbiased
            else:
                mu = self.buffers[f"bn{k}.running_mean"]
                var = self.buffers[f"bn{k}.running_var"]
            inv = 1.0 / np.sqrt(var + BN_EPS)
            zhat = (z - mu) * inv
            y = zhat * g + beta
            out = np.maximum(y, 0.0)
            if keep:
                cache.append((x.shape[0], h, zhat, inv, y > 0))
            x = out
        head_cache = []
        for j in range(len(self.head)):
            W = self.params[f"head{j}.weight"]
            b = self.params[f"head{j}.bias"]
            inp = x
            x = x @ W.T + b
            last = j == len(self.head) - 1
            mask = None
            if not last:
                mask = x > 0
                x = np.where(mask, x, 0.0)
            if keep:
                head_cache.append((inp, mask))
        if keep:
            self._cache = (plan, mode, cache, head_cache)
        return x

    def backward(self, dscores):
        """Parameter gradients for the last ``forward(..., keep=True)``."""
        plan, mode, cache, head_cache = self._cache
        grads = {}
        d = dscores
        for j in reversed(range(len(self.head))):
            inp, mask = head_cache[j]
            if mask is not None:
                d = np.where(mask, d, 0.0)
            grads[f"head{j}.weight"] = d.T @ inp
            grads[f"head{j}.bias"] = d.sum(0)
            d = d @ self.params[f"head{j}.weight"]
        train = mode == "train"
        for k in reversed(range(self.n_layers)):
            n_in, h, zhat, inv, pos = cache[k]
            g = self.params[f"bn{k}.gamma"]
            dy = np.where(pos, d, 0.0)
            grads[f"bn{k}.gamma"] = (dy * zhat).sum(0)
            grads[f"bn{k}.beta"] = dy.sum(0)
            dzhat = dy * g
            if train:
                n = dzhat.shape[0]
                dz = inv / n * (n * dzhat - dzhat.sum(0) - zhat * (dzhat * zhat).sum(0))
            else:
                dz = dzhat * inv
            W = self.params[f"sage{k}.weight"]
            grads[f"sage{k}.weight"] = dz.T @ h
            grads[f"sage{k}.bias"] = dz.sum(0)
            if k == 0:
                break
            dh = dz @ W
            w_in = W.shape[1] // 2
            dx = plan.mean[k].T @ dh[:, w_in:]
            np.add.at(dx, plan.select[k], dh[:, :w_in])
            d = dx
        return grads

    # ------------------------------------------------------------------
    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "in_dim": self.in_dim,
            "widths": list(self.widths),
            "head": list(self.head),
            "params": {k: _encode(v) for k, v in self.params.items()},
            "buffers": {k: _encode(v) for k, v in self.buffers.items()},
            "normalizer": None if self.normalizer is None else self.normalizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema version {d.get('schema_version')!r}")
        m = cls(d["in_dim"], d["widths"], d["head"])
        for store, key in ((m.params, "params"), (m.buffers, "buffers")):
            if set(d[key]) != set(store):
                raise ValueError(f"model {key} do not match the architecture")
            for k, v in d[key].items():
                arr = _decode(v)
                if arr.shape != store[k].shape:
                    raise ShapeMismatch(f"{k}: expected {store[k].shape}, got {arr.shape}")
                store[k] = arr
        if d.get("normalizer") is not None:
            m.normalizer = FeatureNormalizer.from_dict(d["normalizer"])
        return m


def _kaiming(rng, out, fan_in):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, (out, fan_in))


def _encode(a):
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode(d):
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


# ----------------------------------------------------------------------
# convenience entry points

def forward_full(model, graph, X, mode="eval", update_running=True):
    return model.forward(full_plan(graph, model.n_layers), X, mode, update_running)


def forward_nodewise(model, graph, X, t):
    """Eval-mode scores of cell ``t`` computed from its K-hop neighborhood only."""
    return model.forward(nodewise_plan(graph, [t], model.n_layers), X, "eval")[0]


def predict_scores(model, graph, X, max_cells_in_flight=20000):
    """Eval-mode scores for every node, computed in chunks of output cells."""
    n = graph.n_nodes
    out = np.empty((n, 2))
    step = max(1, int(max_cells_in_flight))
    for lo in range(0, n, step):
        centers = np.arange(lo, min(n, lo + step))
        plan = nodewise_plan(graph, centers, model.n_layers)
        out[plan.outputs] = model.forward(plan, X, "eval")
    return out


def occupancy(scores):
    """Softmax probability of 'inside': exp(i) / (exp(i) + exp(o)), computed stably."""
    s = np.asarray(scores, dtype=np.float64)
    m = np.maximum(s[..., 0], s[..., 1])
    ei = np.exp(s[..., 0] - m)
    eo = np.exp(s[..., 1] - m)
    return ei / (ei + eo)
