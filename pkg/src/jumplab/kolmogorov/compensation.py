"""Drift compensation ``a -> a - sum_j rate_j g(t, x, gamma_j)``."""

from __future__ import annotations

import numpy as np


def compensate_drift(model):
    """Model with drift ``a - sum_j rate_j g_j``; everything else unchanged.

    A jump-free model is returned as is.
    """
    if not model.has_jumps:
        return model
    rates = model.marks.rates
    marks = model.marks.marks

    def drift(t, x):
        out = np.array(model.a(t, x), dtype=float)
        for rate, mark in zip(rates, marks):
            out = out - rate * model.g(t, x, mark)
        return out

    def drift_jac(t, x):
        out = np.array(model.grad_a(t, x), dtype=float)
        for rate, mark in zip(rates, marks):
            out = out - rate * model.grad_g(t, x, mark)
        return out

    return model.with_drift(drift, drift_jac, name=f"compensated[{model.name}]")
