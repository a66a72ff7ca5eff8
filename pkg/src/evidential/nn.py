"""Small multilayer perceptron on top of the autodiff tape, plus Adam."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

__all__ = [
    "MLPConfig",
    "ParamSet",
    "AdamState",
    "init_params",
    "forward",
    "adam_step",
    "OUTPUT_MAPS",
    "CONCENTRATION_FLOOR",
]

CONCENTRATION_FLOOR = 1e-12
_LOG_FLOOR = math.log(CONCENTRATION_FLOOR)
_EXP_CAP = 700.0


def _gauss(z):
    return ad.exp(-(z * z))


# "gauss" decays to zero away from the data, so far-off inputs see only the
# output bias; the piecewise-linear relu keeps growing instead.
HIDDEN = {"relu": ad.relu, "tanh": ad.tanh, "gauss": _gauss}


def _exp_out(f):
    return ad.exp(ad.clip(f, _LOG_FLOOR, _EXP_CAP))


OUTPUT_MAPS = {
    "exp": _exp_out,
    "softplus_plus_one": lambda f: ad.softplus(f) + (1.0 + CONCENTRATION_FLOOR),
    "relu_plus_one": lambda f: ad.relu(f) + 1.0,
    "identity": lambda f: f,
}


@dataclass(frozen=True)
class MLPConfig:
    """``widths`` lists every layer from input to output, so (4, 100, 100, 100, 3)
    is a three-hidden-layer net on 4 features with 3 outputs."""

    widths: tuple[int, ...]
    hidden: str = "relu"
    output: str = "exp"
    seed: int = 0

    def __post_init__(self):
        w = tuple(int(x) for x in self.widths)
        object.__setattr__(self, "widths", w)
        if len(w) < 3:
            raise ValueError("an MLP needs at least one hidden layer")
        if any(x < 1 for x in w):
            raise ValueError("layer widths must be >= 1")
        if self.hidden not in HIDDEN:
            raise ValueError(f"unknown hidden activation {self.hidden!r}")
        if self.output not in OUTPUT_MAPS:
            raise ValueError(f"unknown output map {self.output!r}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def to_dict(self) -> dict:
        return {"widths": list(self.widths), "hidden": self.hidden, "output": self.output, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> MLPConfig:
        return cls(tuple(d["widths"]), d.get("hidden", "relu"), d.get("output", "exp"), int(d.get("seed", 0)))


@dataclass
class ParamSet:
    """Named weight and bias arrays, W0, b0, W1, b1, ..."""

    tensors: dict[str, np.ndarray]
    seed: int = 0

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> ParamSet:
        return ParamSet({k: v.copy() for k, v in self.tensors.items()}, self.seed)

    def __getitem__(self, k):
        return self.tensors[k]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "params": [
                    {"name": k, "shape": list(v.shape), "values": v.reshape(-1).tolist()}
                    for k, v in self.tensors.items()
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> ParamSet:
        obj = json.loads(text)
        tensors = {
            p["name"]: np.asarray(p["values"], dtype=float).reshape(p["shape"]) for p in obj["params"]
        }
        return cls(tensors, int(obj.get("seed", 0)))

    def equal(self, other: ParamSet) -> bool:
        return self.names() == other.names() and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors
        )


def init_params(config: MLPConfig, seed: int | None = None) -> ParamSet:
    """Glorot-uniform weights, zero biases."""
    s = config.seed if seed is None else seed
    rng = np.random.default_rng(s)
    tensors = {}
    for i, (fan_in, fan_out) in enumerate(zip(config.widths[:-1], config.widths[1:])):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        tensors[f"W{i}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        tensors[f"b{i}"] = np.zeros(fan_out)
    return ParamSet(tensors, s)


def forward(params, config: MLPConfig, batch, return_hidden: bool = False):
    """Apply the network to a (B, D) batch.

    ``params`` is a ParamSet or a mapping of names to arrays / Tensors.  With
    ``return_hidden`` the last hidden activation is returned alongside the output.
    """
    p = params.tensors if isinstance(params, ParamSet) else params
    x = batch
    if ad.value(x).ndim != 2 or ad.value(x).shape[1] != config.widths[0]:
        raise ValueError(
            f"batch has shape {ad.value(x).shape}, expected (B, {config.widths[0]})"
        )
    act = HIDDEN[config.hidden]
    h = x
    for i in range(config.n_layers):
        z = ad.matmul(h, p[f"W{i}"]) + p[f"b{i}"]
        if i < config.n_layers - 1:
            h = act(z)
        else:
            out = OUTPUT_MAPS[config.output](z)
    return (out, h) if return_hidden else out


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: ParamSet,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    b1, b2 = betas
    t = state.t + 1
    new_p, new_m, new_v = {}, {}, {}
    for k, w in params.tensors.items():
        g = np.asarray(grads.get(k, np.zeros_like(w)), dtype=float)
        if g.shape != w.shape:
            raise ValueError(f"gradient for {k} has shape {g.shape}, parameter has {w.shape}")
        m = b1 * state.m.get(k, np.zeros_like(w)) + (1 - b1) * g
        v = b2 * state.v.get(k, np.zeros_like(w)) + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p[k] = w - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[k], new_v[k] = m, v
    return ParamSet(new_p, params.seed), AdamState(new_m, new_v, t)
