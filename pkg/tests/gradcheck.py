"""Finite-difference gradient oracle shared by the numeric test modules."""

from __future__ import annotations

import numpy as np

from reliafuse.autodiff import Parameter

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_TOL = 1e-7


def finite_difference_grads(loss_fn, params: list[Parameter]) -> list[np.ndarray]:
    """Central finite differences of loss_fn() w.r.t. every entry of every parameter."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + FD_STEP
            up = float(loss_fn())
            flat[i] = orig - FD_STEP
            down = float(loss_fn())
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * FD_STEP)
        grads.append(g)
    return grads


def assert_grads_match(loss_fn, params: list[Parameter], context: str = "") -> None:
    """Compare analytic parameter gradients (already populated) against the oracle."""
    fd = finite_difference_grads(loss_fn, params)
    for p, g_fd in zip(params, fd):
        g_an = p.grad
        diff = np.abs(g_an - g_fd)
        scale = np.maximum(np.abs(g_an), np.abs(g_fd))
        ok = (diff < ABS_TOL) | (diff / np.maximum(scale, 1e-300) < REL_TOL)
        assert ok.all(), (
            f"gradient mismatch for {p.name} {context}: "
            f"worst abs {diff.max():.3e}, analytic {g_an.ravel()[diff.argmax()]:.6e} "
            f"vs fd {g_fd.ravel()[diff.argmax()]:.6e}"
        )
