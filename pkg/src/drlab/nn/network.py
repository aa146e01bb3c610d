"""Small dense networks with exact reverse-mode gradients.

A network is a trunk of ``Dense`` / ``NoisyDense`` / ``ReLU`` layers followed
by exactly one :class:`Head`.  Weights are stored as ``[in, out]`` so a layer
computes ``y = x @ W + b``.

Head outputs, for a batch of ``B`` inputs and ``A`` actions:

=============== ==========================================================
``q``           Q-values ``[B, A]`` (optionally dueling, ``max``/``mean``)
``categorical`` log-probabilities ``[B, A, N]`` over ``N`` support atoms;
                dueling aggregates per atom before the softmax
``quantile``    atom locations ``[B, A, N]``, unconstrained
``policy``      log-probabilities ``[B, A]``
``value``       state values ``[B]``
``actor_critic`` tuple ``(log-probabilities [B, A], values [B])`` from a
                shared trunk
=============== ==========================================================
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .params import ParamStore


@dataclass(frozen=True)
class Dense:
    units: int
    bias: bool = True


@dataclass(frozen=True)
class NoisyDense:
    units: int
    sigma_init: float = 0.5


@dataclass(frozen=True)
class ReLU:
    pass


HEAD_KINDS = ("q", "categorical", "quantile", "policy", "value", "actor_critic")


@dataclass(frozen=True)
class Head:
    kind: str
    num_actions: int = 1
    num_atoms: int = 1
    dueling: Optional[str] = None  # None | "max" | "mean"
    noisy: bool = False
    sigma_init: float = 0.5

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {self.kind!r}")
        if self.dueling not in (None, "max", "mean"):
            raise ValueError(f"unknown dueling mode {self.dueling!r}")
        if self.dueling and self.kind not in ("q", "categorical", "quantile"):
            raise ValueError("dueling aggregation needs a q/categorical/quantile head")
        if self.kind in ("categorical", "quantile") and self.num_atoms < 1:
            raise ValueError("distributional heads need num_atoms >= 1")


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    layers: tuple
    head: Head

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for layer in self.layers:
            if not isinstance(layer, (Dense, NoisyDense, ReLU)):
                raise TypeError(f"unsupported layer {layer!r}")


def mlp_spec(input_dim: int, hidden=(128, 128), head: Head = Head("q", 2), noisy=False,
             sigma_init=0.5) -> NetworkSpec:
    """Fully connected ReLU trunk; ``noisy`` swaps every hidden dense for a noisy one."""
    layers = []
    for h in hidden:
        layers.append(NoisyDense(h, sigma_init) if noisy else Dense(h))
        layers.append(ReLU())
    return NetworkSpec(input_dim, tuple(layers), head)


def f_scale(x):
    return np.sign(x) * np.sqrt(np.abs(x))


@dataclass
class NoiseDraw:
    """Raw standard-normal factors per noisy layer: ``eps[name] = (eps_in [m], eps_out [n])``.

    The weight noise is ``outer(f(eps_in), f(eps_out))`` and the bias noise is
    ``f(eps_out)``.  One draw is shared by every row of a batch.
    """

    eps: dict = field(default_factory=dict)
    zeroed: bool = False

    def factors(self, name):
        if self.zeroed or name not in self.eps:
            return None
        e_in, e_out = self.eps[name]
        fo = f_scale(e_out)
        return np.outer(f_scale(e_in), fo), fo


class _Linear:
    def __init__(self, name, m, n, noisy=False, bias=True, sigma_init=0.5):
        self.name, self.m, self.n = name, m, n
        self.noisy, self.bias, self.sigma_init = noisy, bias, sigma_init

    def param_names(self):
        p = self.name
        if self.noisy:
            return [f"{p}.w_mu", f"{p}.w_sigma", f"{p}.b_mu", f"{p}.b_sigma"]
        return [f"{p}.w", f"{p}.b"] if self.bias else [f"{p}.w"]

    def init(self, rng, out):
        bound = 1.0 / np.sqrt(self.m)
        p = self.name
        if self.noisy:
            out[f"{p}.w_mu"] = rng.uniform(-bound, bound, size=(self.m, self.n))
            out[f"{p}.w_sigma"] = np.full((self.m, self.n), self.sigma_init / self.m)
            out[f"{p}.b_mu"] = np.zeros(self.n)
            out[f"{p}.b_sigma"] = np.full(self.n, self.sigma_init / self.m)
        else:
            out[f"{p}.w"] = rng.uniform(-bound, bound, size=(self.m, self.n))
            if self.bias:
                out[f"{p}.b"] = np.zeros(self.n)

    def zero_grads(self, grads):
        p = self.name
        shape_w, shape_b = (self.m, self.n), (self.n,)
        for name in self.param_names():
            grads[name] = np.zeros(shape_w if ".w" in name[len(p):] else shape_b)

    def effective(self, params, noise):
        """Weight and bias actually used for this pass, plus the noise factors."""
        p = self.name
        if not self.noisy:
            b = params[f"{p}.b"] if self.bias else None
            return params[f"{p}.w"], b, None
        fac = noise.factors(p) if noise is not None else None
        W, b = params[f"{p}.w_mu"], params[f"{p}.b_mu"]
        if fac is not None:
            W = W + params[f"{p}.w_sigma"] * fac[0]
            b = b + params[f"{p}.b_sigma"] * fac[1]
        return W, b, fac

    def forward(self, params, x, noise):
        W, b, fac = self.effective(params, noise)
        y = x @ W
        if b is not None:
            y = y + b
        return y, (x, W, fac)

    def backward(self, cache, dy, grads):
        x, W, fac = cache
        dW = x.T @ dy
        db = dy.sum(axis=0)
        p = self.name
        if self.noisy:
            grads[f"{p}.w_mu"] += dW
            grads[f"{p}.b_mu"] += db
            if fac is not None:
                grads[f"{p}.w_sigma"] += dW * fac[0]
                grads[f"{p}.b_sigma"] += db * fac[1]
        else:
            grads[f"{p}.w"] += dW
            if self.bias:
                grads[f"{p}.b"] += db
        return dy @ W.T

    def tangent(self, tan, fac):
        p = self.name
        if not self.noisy:
            return tan[f"{p}.w"], (tan[f"{p}.b"] if self.bias else None)
        dW, db = tan[f"{p}.w_mu"], tan[f"{p}.b_mu"]
        if fac is not None:
            dW = dW + tan[f"{p}.w_sigma"] * fac[0]
            db = db + tan[f"{p}.b_sigma"] * fac[1]
        return dW, db


def log_softmax(z, axis=-1):
    z = z - z.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def _aggregate(adv, mode, idx=None):
    """``mean_a`` or ``max_a`` of ``adv [B, A, N]``; returns ``[B, 1, N]`` and argmax indices."""
    if mode == "mean":
        return adv.mean(axis=1, keepdims=True), None
    if idx is None:
        idx = np.argmax(adv, axis=1)[:, None, :]
    return np.take_along_axis(adv, idx, axis=1), idx


def dueling_aggregate(value, advantage, mode="mean"):
    """Combine value and advantage streams.

    ``value`` is ``[B]``/``[B, 1]`` (scalar mode) or ``[B, N]`` (per atom);
    ``advantage`` is ``[B, A]`` or ``[B, A, N]``.  Modes ``max`` and ``mean``
    return ``V + A - agg_a A``; ``softmax-atoms`` applies the mean form per
    atom and then a softmax over atoms.
    """
    adv = np.asarray(advantage, dtype=np.float64)
    scalar = adv.ndim == 2
    if scalar:
        adv = adv[:, :, None]
    v = np.asarray(value, dtype=np.float64).reshape(adv.shape[0], 1, -1)
    agg_mode = "mean" if mode == "softmax-atoms" else mode
    if agg_mode not in ("max", "mean"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    agg, _ = _aggregate(adv, agg_mode)
    z = v + adv - agg
    if mode == "softmax-atoms":
        return np.exp(log_softmax(z, axis=-1))
    return z[:, :, 0] if scalar else z


class Network:
    """Executable form of a :class:`NetworkSpec`."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.trunk = []
        dim = spec.input_dim
        for i, layer in enumerate(spec.layers):
            if isinstance(layer, ReLU):
                self.trunk.append(("relu", None))
            else:
                noisy = isinstance(layer, NoisyDense)
                lin = _Linear(f"l{i}", dim, layer.units, noisy=noisy,
                              bias=True if noisy else layer.bias,
                              sigma_init=layer.sigma_init if noisy else 0.0)
                self.trunk.append(("linear", lin))
                dim = layer.units
        self.feature_dim = dim
        h = spec.head
        A, N = h.num_actions, h.num_atoms if h.kind in ("categorical", "quantile") else 1
        self.A, self.N = A, N
        if h.kind == "value":
            sizes = {"out": 1}
        elif h.kind == "actor_critic":
            sizes = {"pi": A, "v": 1}
        elif h.dueling:
            sizes = {"value": N, "adv": A * N}
        else:
            sizes = {"out": A * N}
        self.streams = {k: _Linear(f"head.{k}", dim, n, noisy=h.noisy, sigma_init=h.sigma_init)
                        for k, n in sizes.items()}
        self.linears = [lin for kind, lin in self.trunk if kind == "linear"] + list(self.streams.values())

    @property
    def noisy_layers(self):
        return [lin for lin in self.linears if lin.noisy]

    def init_params(self, rng) -> ParamStore:
        out = {}
        for lin in self.linears:
            lin.init(rng, out)
        return ParamStore(out)

    def sample_noise(self, rng) -> NoiseDraw:
        return NoiseDraw({lin.name: (rng.standard_normal(lin.m), rng.standard_normal(lin.n))
                          for lin in self.noisy_layers})

    # ------------------------------------------------------------------ forward
    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None]
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ValueError(f"input shape {x.shape} does not match input_dim {self.spec.input_dim}")
        return x

    def forward(self, params: ParamStore, x, noise: Optional[NoiseDraw] = None):
        h = self._check_input(x)
        caches = []
        for kind, lin in self.trunk:
            if kind == "relu":
                mask = h > 0
                caches.append(mask)
                h = h * mask
            else:
                h, c = lin.forward(params, h, noise)
                caches.append(c)
        outs, scache = {}, {}
        for k, lin in self.streams.items():
            outs[k], scache[k] = lin.forward(params, h, noise)
        out, hcache = self._head_forward(outs)
        return out, {"trunk": caches, "streams": scache, "head": hcache, "batch": h.shape[0]}

    def __call__(self, params, x, noise=None):
        return self.forward(params, x, noise)[0]

    def _head_forward(self, outs, idx=None):
        h = self.spec.head
        B = next(iter(outs.values())).shape[0]
        if h.kind == "value":
            return outs["out"][:, 0], None
        if h.kind == "actor_critic":
            logp = log_softmax(outs["pi"])
            return (logp, outs["v"][:, 0]), {"p": np.exp(logp)}
        if h.dueling:
            adv = outs["adv"].reshape(B, self.A, self.N)
            agg, idx = _aggregate(adv, h.dueling, idx)
            z = outs["value"].reshape(B, 1, self.N) + adv - agg
        else:
            z = outs["out"].reshape(B, self.A, self.N)
        cache = {"idx": idx}
        if h.kind == "q":
            return z[:, :, 0], cache
        if h.kind == "quantile":
            return z, cache
        if h.kind == "categorical":
            logp = log_softmax(z, axis=-1)
            cache["p"] = np.exp(logp)
            return logp, cache
        logp = log_softmax(z[:, :, 0], axis=-1)
        cache["p"] = np.exp(logp)
        return logp, cache

    def _head_backward(self, cache, g, B):
        """Gradient w.r.t. the raw stream outputs."""
        h = self.spec.head
        if h.kind == "value":
            return {"out": np.asarray(g, dtype=np.float64).reshape(B, 1)}
        if h.kind == "actor_critic":
            g_logp, g_v = g
            g_logp = np.zeros((B, self.A)) if g_logp is None else g_logp
            g_v = np.zeros(B) if g_v is None else np.asarray(g_v)
            p = cache["p"]
            return {"pi": g_logp - p * g_logp.sum(axis=1, keepdims=True), "v": g_v.reshape(B, 1)}
        if h.kind == "q":
            gz = g[:, :, None]
        elif h.kind == "quantile":
            gz = g
        elif h.kind == "categorical":
            gz = g - cache["p"] * g.sum(axis=-1, keepdims=True)
        else:
            p = cache["p"]
            gz = (g - p * g.sum(axis=-1, keepdims=True))[:, :, None]
        if not h.dueling:
            return {"out": gz.reshape(B, -1)}
        g_value = gz.sum(axis=1)
        if h.dueling == "mean":
            g_adv = gz - gz.mean(axis=1, keepdims=True)
        else:
            g_adv = gz.copy()
            np.put_along_axis(g_adv, cache["idx"],
                              np.take_along_axis(g_adv, cache["idx"], axis=1)
                              - gz.sum(axis=1, keepdims=True), axis=1)
        return {"value": g_value, "adv": g_adv.reshape(B, -1)}

    # ----------------------------------------------------------------- backward
    def backward(self, tape, grad_out) -> ParamStore:
        """Exact parameter gradients of ``sum(grad_out * output)``."""
        grads = {}
        for lin in self.linears:
            lin.zero_grads(grads)
        g_streams = self._head_backward(tape["head"], grad_out, tape["batch"])
        dh = None
        for k, lin in self.streams.items():
            d = lin.backward(tape["streams"][k], g_streams[k], grads)
            dh = d if dh is None else dh + d
        for (kind, lin), cache in zip(reversed(self.trunk), reversed(tape["trunk"])):
            if kind == "relu":
                dh = dh * cache
            else:
                dh = lin.backward(cache, dh, grads)
        return ParamStore(grads)

    # ------------------------------------------------------------- forward mode
    def jvp(self, params: ParamStore, x, tangent: ParamStore, noise: Optional[NoiseDraw] = None):
        """Directional derivative of the head output along ``tangent``.

        Returns ``(output, d_output)``; for tuple-valued heads both are tuples.
        """
        h = self._check_input(x)
        dh = np.zeros_like(h)
        for kind, lin in self.trunk:
            if kind == "relu":
                mask = h > 0
                h, dh = h * mask, dh * mask
            else:
                W, b, fac = lin.effective(params, noise)
                dW, db = lin.tangent(tangent, fac)
                y = h @ W + (b if b is not None else 0.0)
                dy = dh @ W + h @ dW + (db if db is not None else 0.0)
                h, dh = y, dy
        outs, douts = {}, {}
        for k, lin in self.streams.items():
            W, b, fac = lin.effective(params, noise)
            dW, db = lin.tangent(tangent, fac)
            outs[k] = h @ W + b
            douts[k] = dh @ W + h @ dW + db
        out, cache = self._head_forward(outs)
        idx = cache.get("idx") if isinstance(cache, dict) else None
        dout = self._head_tangent(douts, out, idx)
        return out, dout

    def _head_tangent(self, douts, out, idx):
        h = self.spec.head
        B = next(iter(douts.values())).shape[0]
        if h.kind == "value":
            return douts["out"][:, 0]
        if h.kind == "actor_critic":
            p = np.exp(out[0])
            dz = douts["pi"]
            return dz - (p * dz).sum(axis=1, keepdims=True), douts["v"][:, 0]
        if h.dueling:
            dadv = douts["adv"].reshape(B, self.A, self.N)
            dagg, _ = _aggregate(dadv, h.dueling, idx)
            dz = douts["value"].reshape(B, 1, self.N) + dadv - dagg
        else:
            dz = douts["out"].reshape(B, self.A, self.N)
        if h.kind == "q":
            return dz[:, :, 0]
        if h.kind == "quantile":
            return dz
        if h.kind == "categorical":
            p = np.exp(out)
            return dz - (p * dz).sum(axis=-1, keepdims=True)
        p = np.exp(out)
        dz = dz[:, :, 0]
        return dz - (p * dz).sum(axis=-1, keepdims=True)

