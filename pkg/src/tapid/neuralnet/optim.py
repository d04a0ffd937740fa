from __future__ import annotations

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def init_adam_state(weights):
    return {
        "m": {k: np.zeros_like(v) for k, v in weights.items()},
        "v": {k: np.zeros_like(v) for k, v in weights.items()},
    }


def adam_step(weights, gradients, state, lr=1e-3, t=1):
    """One bias-corrected Adam update. Returns ``(new_weights, new_state)``.

    ``t`` is the 1-based step count used for the bias correction.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    c1 = 1.0 - BETA1**t
    c2 = 1.0 - BETA2**t
    new_w, new_m, new_v = {}, {}, {}
    for name, w in weights.items():
        g = gradients[name]
        m = BETA1 * state["m"][name] + (1.0 - BETA1) * g
        v = BETA2 * state["v"][name] + (1.0 - BETA2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        new_w[name] = (w - lr * m_hat / (np.sqrt(v_hat) + EPSILON)).astype(w.dtype, copy=False)
        new_m[name] = m.astype(w.dtype, copy=False)
        new_v[name] = v.astype(w.dtype, copy=False)
    return new_w, {"m": new_m, "v": new_v}
