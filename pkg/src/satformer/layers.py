"""Parameter initialisers and the multi-layer perceptron used by every head."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor


def normal_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    return rng.standard_normal(shape) / np.sqrt(fan_in)


def init_mlp(store: ParamStore, prefix: str, sizes: Sequence[int], rng: np.random.Generator) -> None:
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        store.add(f"{prefix}.{i}.W", normal_init(rng, a, (a, b)))
        store.add(f"{prefix}.{i}.b", np.zeros(b))


def mlp(store: ParamStore, prefix: str, x: Tensor, layers: int = 3) -> Tensor:
    """ReLU between layers, none after the last."""
    for i in range(layers):
        x = ad.linear(x, store[f"{prefix}.{i}.W"], store[f"{prefix}.{i}.b"])
        if i < layers - 1:
            x = ad.relu(x)
    return x
