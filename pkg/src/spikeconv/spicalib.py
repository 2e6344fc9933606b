"""Online ISI monitoring and twin-synapse spike correction.

A neuron whose ANN counterpart is inactive can still fire early in the
simulation when its cumulative input current transiently exceeds the
threshold, then fall silent. The monitor tracks each neuron's running mean
interspike interval phi; once a neuron has been silent longer than
phi + beta it is flagged and a twin synapse (same fan-out, negated weight)
delivers negative spikes until every previously emitted spike is cancelled.

The simulation engine runs a fused kernel (`backend.spicalib_step`) for
speed; the three operations here are the reference semantics, and the test
suite pins the kernel to their composition:

    per step: isi_update on firing neurons; on silent neurons detect_sin
    (if not yet flagged) then emit_negative while flagged.

State is vectorized over the neurons of one layer.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["ISIMonitor", "isi_update", "detect_sin", "emit_negative"]


@dataclass(eq=False)
class ISIMonitor:
    """Per-neuron ISI statistics and cancellation accounting for one layer."""

    phi: np.ndarray        # running mean interspike interval, init 0
    n_spikes: np.ndarray   # spikes folded into the mean (int64)
    t_last: np.ndarray     # time of last spike, init 0 (int64)
    flagged: np.ndarray    # uint8 0/1
    cancelled: np.ndarray  # negative spikes already issued (int64)
    gamma: int             # burst ceiling, bounds negative spikes per step

    @classmethod
    def zeros(cls, n_neurons: int, gamma: int) -> "ISIMonitor":
        return cls(
            phi=np.zeros(n_neurons),
            n_spikes=np.zeros(n_neurons, dtype=np.int64),
            t_last=np.zeros(n_neurons, dtype=np.int64),
            flagged=np.zeros(n_neurons, dtype=np.uint8),
            cancelled=np.zeros(n_neurons, dtype=np.int64),
            gamma=int(gamma),
        )

    def snapshot(self) -> dict:
        return {
            "phi": self.phi.copy(),
            "n_spikes": self.n_spikes.copy(),
            "t_last": self.t_last.copy(),
            "flagged": self.flagged.astype(bool),
            "cancelled": self.cancelled.copy(),
        }


def isi_update(mon: ISIMonitor, t: int, spikes) -> ISIMonitor:
    """Fold this step's spikes into the running ISI means.

    A burst of n spikes at time t contributes one interval t - t_last and
    n - 1 zero intervals, keeping the mean near 1/rate. Firing clears the SIN
    flag. Silent neurons are untouched.
    """
    spikes = np.asarray(spikes, dtype=np.int64)
    fired = spikes > 0
    if fired.any():
        idx = np.nonzero(fired)[0]
        gap = t - mon.t_last[idx]
        total = mon.n_spikes[idx] + spikes[idx]
        mon.phi[idx] = (mon.phi[idx] * mon.n_spikes[idx] + gap) / total
        mon.n_spikes[idx] = total
        mon.t_last[idx] = t
        mon.flagged[idx] = 0
    return mon


def detect_sin(mon: ISIMonitor, t: int, beta: float) -> np.ndarray:
    """True where a neuron has fired before but has now been silent > phi + beta."""
    return (mon.n_spikes > 0) & ((t - mon.t_last) > mon.phi + beta)


def emit_negative(mon: ISIMonitor, t: int) -> np.ndarray:
    """Negative spikes for flagged neurons this step: min(gamma, outstanding).

    Increments the cancelled count; a fully drained neuron keeps its flag but
    emits zero until it fires again (which clears the flag via isi_update).
    """
    flag = mon.flagged.view(bool)
    neg = np.zeros(mon.phi.shape[0], dtype=np.int64)
    if flag.any():
        d = np.minimum(np.int64(mon.gamma), mon.n_spikes[flag] - mon.cancelled[flag])
        np.maximum(d, 0, out=d)
        neg[flag] = d
        mon.cancelled[flag] += d
    return neg
