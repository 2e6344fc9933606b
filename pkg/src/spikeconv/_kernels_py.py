"""Pure numpy implementations of the per-timestep neuron kernels.

These are the import-time fallback for the compiled ``spikeconv._core``
extension. Both backends perform the same IEEE operations in the same order,
so results are bit-identical; the parity tests pin that.

All arrays are 1-D over the neurons of one layer and are updated in place.
"""

import numpy as np

BACKEND = "python"


def if_step(v, current, theta, gamma, spikes_out):
    """Soft-reset burst IF update: v += I; n = clip(floor(v/theta), 0, gamma)."""
    np.add(v, current, out=v)
    n = np.floor(v / theta)
    np.clip(n, 0.0, float(gamma), out=n)
    n_int = n.astype(np.int64)
    v -= n * theta
    spikes_out[:] = n_int
    return spikes_out


def constant_if_step(current, t, v0, theta, gamma, s_cum, spikes_out, v_out):
    """Encoding-layer IF update under a constant current.

    Cumulative input is tracked as t*I in a single rounding (not repeated
    accumulation), which keeps the constant-current spike count exactly
    floor(t*I/theta) for theta=1.
    """
    v_pre = v0 + t * current - theta * s_cum
    n = np.floor(v_pre / theta)
    np.clip(n, 0.0, float(gamma), out=n)
    n_int = n.astype(np.int64)
    s_cum += n_int
    v_out[:] = v_pre - n * theta
    spikes_out[:] = n_int
    return spikes_out


def spicalib_step(spikes, t, beta, gamma, phi, isi_n, t_last, flagged, cancelled, neg_out, enabled):
    """Fused ISI-mean update, SIN detection, and twin-synapse drain for one step.

    Firing neurons (spikes > 0): the burst contributes one interval t-t_last
    and n-1 zero intervals to the running mean; the flag clears. Silent,
    previously firing neurons are flagged once their silence exceeds
    phi + beta, then emit up to gamma negative spikes per step until the
    outstanding count is cancelled.
    """
    flag = flagged.view(bool)  # flagged is uint8 0/1 state shared with the C kernel
    fired = spikes > 0
    neg_out[:] = 0
    if fired.any():
        idx = np.nonzero(fired)[0]
        gap = t - t_last[idx]
        n_new = isi_n[idx] + spikes[idx]
        phi[idx] = (phi[idx] * isi_n[idx] + gap) / n_new
        isi_n[idx] = n_new
        t_last[idx] = t
        flag[idx] = False
    if enabled:
        silent = ~fired & (isi_n > 0)
        newly = silent & ~flag & ((t - t_last) > phi + beta)
        flag |= newly
        drain = flag & silent
        if drain.any():
            d = np.minimum(np.int64(gamma), isi_n[drain] - cancelled[drain])
            np.maximum(d, 0, out=d)
            neg_out[drain] = d
            cancelled[drain] += d
    return neg_out
