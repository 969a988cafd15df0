"""Pure NumPy batched forward/backward, the fallback training backend."""
from __future__ import annotations

import numpy as np

NAME = "python"


def batch_forward(X, tau0, rule_ws, rule_bs, head_w, head_b, k, surrogate, masks):
    """Forward a batch; returns (logits, cache) with cache feeding batch_backward.

    masks is None for evaluation mode, else one (B, (j+1)*n) array per
    consumer: index j < depth feeds rule layer j+1, index depth feeds the head.
    """
    B, n = X.shape
    d = len(rule_ws)
    e_cat = np.zeros((B, (d + 1) * n))
    S, TZ, TT = [], [], []
    tau = None
    for j in range(d + 1):
        if j == 0:
            tz = np.tanh(X + tau0[None, :])
            tt = np.broadcast_to(np.tanh(tau0), (B, n))
        else:
            src = e_cat[:, : j * n]
            if masks is not None:
                src = src * masks[j - 1]
            tau = src @ rule_ws[j - 1] + rule_bs[j - 1][None, :]
            tz = np.tanh(X + tau)
            tt = np.tanh(tau)
        if surrogate:
            s = tz
        else:
            bins = np.clip(np.floor((tz + 1.0) * (k / 2.0)), 0, k - 1)
            s = -1.0 + (2.0 * bins + 1.0) / k
        e_cat[:, j * n: (j + 1) * n] = s * tt
        S.append(s)
        TZ.append(tz)
        TT.append(tt)
    head_in = e_cat if masks is None else e_cat * masks[d]
    logits = head_in @ head_w + head_b[None, :]
    cache = (e_cat, S, TZ, TT, masks, rule_ws, head_w, n, d)
    return logits, cache


def batch_backward(cache, dlogits):
    """Parameter gradients for a batch given d(loss)/d(logits)."""
    e_cat, S, TZ, TT, masks, rule_ws, head_w, n, d = cache
    head_in = e_cat if masks is None else e_cat * masks[d]
    d_head_w = head_in.T @ dlogits
    d_head_b = dlogits.sum(axis=0)
    g = dlogits @ head_w.T
    if masks is not None:
        g = g * masks[d]
    d_ws = [None] * d
    d_bs = [None] * d
    for j in range(d, 0, -1):
        de = g[:, j * n: (j + 1) * n]
        ste = 1.0 - TZ[j] * TZ[j]
        dtau = de * (ste * TT[j] + S[j] * (1.0 - TT[j] * TT[j]))
        src = e_cat[:, : j * n]
        if masks is not None:
            src = src * masks[j - 1]
        d_ws[j - 1] = src.T @ dtau
        d_bs[j - 1] = dtau.sum(axis=0)
        back = dtau @ rule_ws[j - 1].T
        if masks is not None:
            back = back * masks[j - 1]
        g[:, : j * n] += back
    ste0 = 1.0 - TZ[0] * TZ[0]
    d_tau0 = (g[:, :n] * (ste0 * TT[0] + S[0] * (1.0 - TT[0] * TT[0]))).sum(axis=0)
    return d_tau0, d_ws, d_bs, d_head_w, d_head_b
