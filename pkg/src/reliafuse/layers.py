"""Differentiable layers: fully connected maps and a GRU cell.

The GRU follows the standard update/reset/candidate formulation with
sigmoid gates and a tanh candidate. Gate weights map the concatenated
``[input, hidden]`` vector to the hidden size, and the new state is
``(1 - z) * h + z * candidate`` so a closed update gate (z == 0) freezes
the state.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .autodiff import Parameter, ShapeError, Tensor, concat


class EmptySequenceError(ValueError):
    """A recurrent layer was fed a zero-length sequence."""


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def fc_forward(x: Tensor, weights: Parameter, bias: Parameter) -> Tensor:
    """Affine map ``x @ W + b`` for a [batch, in_dim] input."""
    x = Tensor._lift(x)
    if x.data.ndim != 2 or x.data.shape[1] != weights.data.shape[0]:
        raise ShapeError(
            f"fc_forward: input {x.data.shape} incompatible with weights "
            f"{weights.data.shape} ({weights.name or 'unnamed'})"
        )
    if bias.data.shape != (weights.data.shape[1],):
        raise ShapeError(
            f"fc_forward: bias {bias.data.shape} incompatible with weights "
            f"{weights.data.shape} ({bias.name or 'unnamed'})"
        )
    return x @ weights + bias


class Linear:
    """Fully connected layer holding its weight and bias parameters."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        self.weights = Parameter(glorot(rng, in_dim, out_dim), name=f"{name}.w")
        self.bias = Parameter(np.zeros(out_dim), name=f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return fc_forward(x, self.weights, self.bias)

    def parameters(self) -> Iterator[Parameter]:
        yield self.weights
        yield self.bias


class GruCell:
    """Single-layer GRU cell over [batch, in_dim] step inputs."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator, name: str):
        if input_dim < 1 or hidden_dim < 1:
            raise ShapeError("GruCell dimensions must be positive")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        cat = input_dim + hidden_dim
        self.w_update = Parameter(glorot(rng, cat, hidden_dim), name=f"{name}.w_update")
        self.b_update = Parameter(np.zeros(hidden_dim), name=f"{name}.b_update")
        self.w_reset = Parameter(glorot(rng, cat, hidden_dim), name=f"{name}.w_reset")
        self.b_reset = Parameter(np.zeros(hidden_dim), name=f"{name}.b_reset")
        self.w_cand = Parameter(glorot(rng, cat, hidden_dim), name=f"{name}.w_cand")
        self.b_cand = Parameter(np.zeros(hidden_dim), name=f"{name}.b_cand")

    def parameters(self) -> Iterator[Parameter]:
        yield from (
            self.w_update,
            self.b_update,
            self.w_reset,
            self.b_reset,
            self.w_cand,
            self.b_cand,
        )

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        """One recurrence step; x is [batch, in_dim], h is [batch, hidden_dim]."""
        if x.data.shape[1] != self.input_dim:
            raise ShapeError(
                f"GRU step input has dim {x.data.shape[1]}, cell expects {self.input_dim}"
            )
        gates_in = concat([x, h], axis=1)
        z = fc_forward(gates_in, self.w_update, self.b_update).sigmoid()
        r = fc_forward(gates_in, self.w_reset, self.b_reset).sigmoid()
        cand_in = concat([x, r * h], axis=1)
        cand = fc_forward(cand_in, self.w_cand, self.b_cand).tanh()
        return (1.0 - z) * h + z * cand

    def forward(self, sequence, h0: Tensor | None = None) -> Tensor:
        """Run the recurrence over a [T, in_dim] sequence, returning the final state.

        Accepts a raw array or a Tensor; a batch dimension of 1 is used
        internally, so the result is [1, hidden_dim].
        """
        seq = sequence if isinstance(sequence, Tensor) else Tensor(np.atleast_2d(sequence))
        if seq.data.ndim != 2:
            raise ShapeError(f"expected a [T, in_dim] sequence, got shape {seq.data.shape}")
        steps = seq.data.shape[0]
        if steps == 0:
            raise EmptySequenceError("GRU forward requires at least one time step")
        if h0 is None:
            h = Tensor(np.zeros((1, self.hidden_dim)))
        elif isinstance(h0, Tensor):
            h = h0
        else:
            h = Tensor(np.atleast_2d(h0))
        for t in range(steps):
            h = self.step(seq[t : t + 1], h)
        return h

    def forward_batch(self, sequences: np.ndarray, h0: Tensor | None = None) -> Tensor:
        """Run the recurrence over a [batch, T, in_dim] stack of equal-length sequences."""
        if sequences.ndim != 3:
            raise ShapeError(
                f"expected a [batch, T, in_dim] array, got shape {sequences.shape}"
            )
        batch, steps, _ = sequences.shape
        if steps == 0:
            raise EmptySequenceError("GRU forward requires at least one time step")
        h = h0 if h0 is not None else Tensor(np.zeros((batch, self.hidden_dim)))
        for t in range(steps):
            h = self.step(Tensor(sequences[:, t, :]), h)
        return h


def gru_forward(cell: GruCell, sequence, h0: Tensor | None = None) -> Tensor:
    """Functional wrapper over :meth:`GruCell.forward`."""
    return cell.forward(sequence, h0=h0)
