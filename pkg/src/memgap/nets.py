"""Actor-critic networks as flat float64 parameter vectors with manual backprop.

Two torsos produce the feature vector the heads consume:
  mlp: four dense layers with ReLU between them (none after the last)
  gru: dense + ReLU into a GRU cell; the hidden state is the feature

Heads are two-layer MLPs: actor -> action logits, each critic -> one scalar.
A single flat vector holds every parameter so optimizers, checkpoints, and
finite-difference checks all work on one array; views() exposes named
reshaped slices of it without copying.

GRU cell (block order z, r, c in the fused matrices):
  z = sigmoid(e Wx_z + h Wh_z + b_z)        update gate; z=1 keeps old h
  r = sigmoid(e Wx_r + h Wh_r + b_r)        reset gate
  c = tanh   (e Wx_c + r * (h Wh_c) + b_c)  candidate
  h' = z * h + (1 - z) * c

Sequence passes take a `starts` mask: where starts[t, b] is 1 the carried
hidden state is zeroed before step t, and backpropagation stops there too, so
episodes never leak gradient or state into each other.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from .core import ConfigError, ContractError, RngStream


@dataclass(frozen=True)
class NetConfig:
    torso: str  # "mlp" or "gru"
    input_dim: int
    action_dim: int
    hidden_size: int
    n_critics: int = 1

    def __post_init__(self) -> None:
        if self.torso not in ("mlp", "gru"):
            raise ConfigError(f"torso must be 'mlp' or 'gru', got {self.torso!r}")
        if min(self.input_dim, self.action_dim, self.hidden_size) < 1:
            raise ConfigError("input_dim, action_dim, hidden_size must be positive")
        if self.n_critics not in (1, 2):
            raise ConfigError(f"n_critics must be 1 or 2, got {self.n_critics}")


def orthogonal(rng: RngStream, rows: int, cols: int, gain: float) -> np.ndarray:
    """Orthogonal matrix via QR of a normal draw, sign-fixed for determinism."""
    flat = rng.normal(rows * cols)
    a = flat.reshape(rows, cols)
    transpose = rows < cols
    if transpose:
        a = a.T
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))[None, :]
    if transpose:
        q = q.T
    return gain * q


class ActorCritic:
    def __init__(self, cfg: NetConfig):
        self.cfg = cfg
        h = cfg.hidden_size
        spec: list[tuple[str, tuple[int, ...]]] = []
        if cfg.torso == "mlp":
            spec += [("torso.W0", (cfg.input_dim, h)), ("torso.b0", (h,))]
            for i in (1, 2, 3):
                spec += [(f"torso.W{i}", (h, h)), (f"torso.b{i}", (h,))]
        else:
            spec += [("torso.Win", (cfg.input_dim, h)), ("torso.bin", (h,))]
            spec += [("torso.Wx", (h, 3 * h)), ("torso.Wh", (h, 3 * h)), ("torso.b", (3 * h,))]
        spec += [
            ("actor.W0", (h, h)),
            ("actor.b0", (h,)),
            ("actor.W1", (h, cfg.action_dim)),
            ("actor.b1", (cfg.action_dim,)),
        ]
        for j in range(cfg.n_critics):
            spec += [
                (f"critic{j}.W0", (h, h)),
                (f"critic{j}.b0", (h,)),
                (f"critic{j}.W1", (h, 1)),
                (f"critic{j}.b1", (1,)),
            ]
        self.spec = tuple(spec)
        self._slices: dict[str, tuple[slice, tuple[int, ...]]] = {}
        offset = 0
        for name, shape in spec:
            size = int(np.prod(shape))
            self._slices[name] = (slice(offset, offset + size), shape)
            offset += size
        self.n_params = offset

    def views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        """Named reshaped views sharing memory with the flat vector."""
        if flat.shape != (self.n_params,):
            raise ContractError(f"expected {self.n_params} parameters, got shape {flat.shape}")
        return {name: flat[sl].reshape(shape) for name, (sl, shape) in self._slices.items()}

    def init_params(self, rng: RngStream) -> np.ndarray:
        """Orthogonal weights (gain sqrt(2) for dense hidden layers, 1.0 for GRU
        blocks and critic output, 0.01 for actor output), zero biases."""
        flat = np.zeros(self.n_params, dtype=np.float64)
        p = self.views(flat)
        h = self.cfg.hidden_size
        for name, shape in self.spec:
            if len(shape) == 1:
                continue  # biases stay zero
            if name in ("torso.Wx", "torso.Wh"):
                for block in range(3):
                    p[name][:, block * h : (block + 1) * h] = orthogonal(rng, h, h, 1.0)
            elif name == "actor.W1":
                p[name][:] = orthogonal(rng, *shape, gain=0.01)
            elif name.startswith("critic") and name.endswith("W1"):
                p[name][:] = orthogonal(rng, *shape, gain=1.0)
            else:
                p[name][:] = orthogonal(rng, *shape, gain=np.sqrt(2.0))
        return flat

    # --- heads (time-independent, applied to flattened features) ------------

    def _heads_forward(self, p, feat: np.ndarray):
        a_pre = feat @ p["actor.W0"] + p["actor.b0"]
        a = np.maximum(a_pre, 0.0)
        logits = a @ p["actor.W1"] + p["actor.b1"]
        values = np.empty((feat.shape[0], self.cfg.n_critics), dtype=np.float64)
        us = []
        for j in range(self.cfg.n_critics):
            u = np.maximum(feat @ p[f"critic{j}.W0"] + p[f"critic{j}.b0"], 0.0)
            values[:, j] = (u @ p[f"critic{j}.W1"] + p[f"critic{j}.b1"])[:, 0]
            us.append(u)
        return logits, values, (feat, a, us)

    def _heads_backward(self, p, g, cache, dlogits, dvalues):
        feat, a, us = cache
        g["actor.W1"] += a.T @ dlogits
        g["actor.b1"] += dlogits.sum(axis=0)
        da = (dlogits @ p["actor.W1"].T) * (a > 0.0)
        g["actor.W0"] += feat.T @ da
        g["actor.b0"] += da.sum(axis=0)
        dfeat = da @ p["actor.W0"].T
        for j in range(self.cfg.n_critics):
            dv = dvalues[:, j : j + 1]
            u = us[j]
            g[f"critic{j}.W1"] += u.T @ dv
            g[f"critic{j}.b1"] += dv.sum(axis=0)
            du = (dv @ p[f"critic{j}.W1"].T) * (u > 0.0)
            g[f"critic{j}.W0"] += feat.T @ du
            g[f"critic{j}.b0"] += du.sum(axis=0)
            dfeat += du @ p[f"critic{j}.W0"].T
        return dfeat

    # --- memoryless torso ----------------------------------------------------

    def mlp_forward(self, p, X: np.ndarray):
        """X: (B, input_dim) -> logits (B, A), values (B, n_critics), cache."""
        acts = [X]
        out = X
        for i in range(4):
            out = out @ p[f"torso.W{i}"] + p[f"torso.b{i}"]
            if i < 3:
                out = np.maximum(out, 0.0)
            acts.append(out)
        logits, values, head_cache = self._heads_forward(p, out)
        return logits, values, (acts, head_cache)

    def mlp_backward(self, p, cache, dlogits, dvalues) -> np.ndarray:
        acts, head_cache = cache
        gflat = np.zeros(self.n_params, dtype=np.float64)
        g = self.views(gflat)
        dout = self._heads_backward(p, g, head_cache, dlogits, dvalues)
        for i in range(3, -1, -1):
            if i < 3:
                dout = dout * (acts[i + 1] > 0.0)
            g[f"torso.W{i}"] += acts[i].T @ dout
            g[f"torso.b{i}"] += dout.sum(axis=0)
            dout = dout @ p[f"torso.W{i}"].T
        return gflat

    # --- recurrent torso -------------------------------------------------------

    def _gru_cell(self, p, e: np.ndarray, h: np.ndarray):
        hsz = self.cfg.hidden_size
        gates_x = e @ p["torso.Wx"] + p["torso.b"]
        gates_h = h @ p["torso.Wh"]
        z = sigmoid(gates_x[:, :hsz] + gates_h[:, :hsz])
        r = sigmoid(gates_x[:, hsz : 2 * hsz] + gates_h[:, hsz : 2 * hsz])
        hWc = gates_h[:, 2 * hsz :]
        c = np.tanh(gates_x[:, 2 * hsz :] + r * hWc)
        h_new = z * h + (1.0 - z) * c
        return h_new, (z, r, c, hWc)

    def gru_step(self, p, x: np.ndarray, h: np.ndarray):
        """Single rollout step. x: (B, input_dim), h: (B, hidden)."""
        e = np.maximum(x @ p["torso.Win"] + p["torso.bin"], 0.0)
        h_new, _ = self._gru_cell(p, e, h)
        logits, values, _ = self._heads_forward(p, h_new)
        return logits, values, h_new

    def gru_forward(self, p, X: np.ndarray, h0: np.ndarray, starts: np.ndarray):
        """Sequence pass. X: (T, B, input_dim), h0: (B, hidden), starts: (T, B).

        starts[t, b] = 1 zeroes the hidden state carried into step t.
        Returns logits (T, B, A), values (T, B, n_critics), h_T, cache.
        """
        T, B, _ = X.shape
        hsz = self.cfg.hidden_size
        keep = 1.0 - starts.astype(np.float64)
        h = h0
        es, h_ins, cells, hs = [], [], [], []
        for t in range(T):
            h_in = h * keep[t][:, None]
            e = np.maximum(X[t] @ p["torso.Win"] + p["torso.bin"], 0.0)
            h, cell = self._gru_cell(p, e, h_in)
            es.append(e)
            h_ins.append(h_in)
            cells.append(cell)
            hs.append(h)
        feat = np.stack(hs).reshape(T * B, hsz)
        logits, values, head_cache = self._heads_forward(p, feat)
        A = self.cfg.action_dim
        cache = (X, keep, es, h_ins, cells, head_cache)
        return (
            logits.reshape(T, B, A),
            values.reshape(T, B, self.cfg.n_critics),
            h,
            cache,
        )

    def gru_backward(self, p, cache, dlogits, dvalues) -> np.ndarray:
        X, keep, es, h_ins, cells, head_cache = cache
        T, B, _ = X.shape
        hsz = self.cfg.hidden_size
        gflat = np.zeros(self.n_params, dtype=np.float64)
        g = self.views(gflat)
        dfeat = self._heads_backward(
            p,
            g,
            head_cache,
            dlogits.reshape(T * B, -1),
            dvalues.reshape(T * B, -1),
        ).reshape(T, B, hsz)
        dcarry = np.zeros((B, hsz), dtype=np.float64)
        for t in range(T - 1, -1, -1):
            z, r, c, hWc = cells[t]
            h_in = h_ins[t]
            dh = dfeat[t] + dcarry
            dz = dh * (h_in - c)
            dc = dh * (1.0 - z)
            dc_pre = dc * (1.0 - c * c)
            dr = dc_pre * hWc
            dhWc = dc_pre * r
            dz_pre = dz * z * (1.0 - z)
            dr_pre = dr * r * (1.0 - r)
            dgates_x = np.concatenate([dz_pre, dr_pre, dc_pre], axis=1)
            dgates_h = np.concatenate([dz_pre, dr_pre, dhWc], axis=1)
            e = es[t]
            g["torso.Wx"] += e.T @ dgates_x
            g["torso.Wh"] += h_in.T @ dgates_h
            g["torso.b"] += dgates_x.sum(axis=0)
            de = (dgates_x @ p["torso.Wx"].T) * (e > 0.0)
            g["torso.Win"] += X[t].T @ de
            g["torso.bin"] += de.sum(axis=0)
            dh_in = dgates_h @ p["torso.Wh"].T + dh * z
            dcarry = dh_in * keep[t][:, None]
        return gflat
