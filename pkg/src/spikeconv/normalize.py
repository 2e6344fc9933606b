"""Activation statistics and percentile weight/bias normalization.

``collect_stats`` pools post-ReLU activations over a calibration set (with a
uniform reservoir once a per-layer cap is exceeded); ``apply_norm`` rescales
weights by consecutive percentile ratios so firing rates stay representable:

    w_hat[l] = w[l] * maxp[l-1] / maxp[l],   b_hat[l] = b[l] / maxp[l]

with maxp[0] = 1. Weighted layers with no trailing ReLU (the readout) get
maxp = 1, so network outputs stay in original units.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import Conv2d, Dense, NetworkGraph, forward

__all__ = [
    "ActivationStats",
    "NormalizedGraph",
    "collect_stats",
    "percentile",
    "apply_norm",
    "DEFAULT_RESERVOIR_CAP",
]

DEFAULT_RESERVOIR_CAP = 1 << 20


@dataclass
class ActivationStats:
    """Per-ReLU-layer sorted float32 activation samples.

    Keys are layer positions of the ReLU layers in the graph. Zeros are kept:
    inactive outputs count toward the percentile. float32 is used both in
    memory and on disk so reloading stats cannot shift a percentile.
    """

    samples: dict[int, np.ndarray] = field(default_factory=dict)
    sample_counts: dict[int, int] = field(default_factory=dict)

    def finalize(self):
        for k, v in self.samples.items():
            arr = np.sort(np.asarray(v, dtype=np.float32).ravel())
            if arr.size and arr[0] < 0:
                raise ValueError(f"layer {k}: negative post-ReLU activation sample")
            self.samples[k] = arr
        return self


class _Reservoir:
    """Algorithm R uniform reservoir over a stream of float values."""

    def __init__(self, cap: int, rng: np.random.Generator):
        self.cap = cap
        self.rng = rng
        self.buf = []
        self.seen = 0

    def extend(self, values: np.ndarray):
        values = values.ravel()
        free = self.cap - len(self.buf)
        if free > 0:
            head = values[:free]
            self.buf.extend(head.tolist())
            self.seen += head.size
            values = values[free:]
        if values.size == 0:
            return
        # replacement indices drawn per element against the running count
        for v in values:
            self.seen += 1
            j = int(self.rng.integers(0, self.seen))
            if j < self.cap:
                self.buf[j] = v

    def array(self) -> np.ndarray:
        return np.asarray(self.buf, dtype=np.float32)


def collect_stats(
    net: NetworkGraph,
    dataset,
    cap: int = DEFAULT_RESERVOIR_CAP,
    seed: int = 0,
) -> ActivationStats:
    """Pool post-ReLU activations of every ReLU layer over the dataset."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("calibration dataset is empty")
    rng = np.random.default_rng(seed)
    relu_positions = [i for i, spec in enumerate(net.layers) if spec.kind == "relu"]
    pools = {i: _Reservoir(cap, rng) for i in relu_positions}
    for x in dataset:
        outs = forward(net, x)
        for i in relu_positions:
            pools[i].extend(np.asarray(outs[i], dtype=np.float32))
    stats = ActivationStats(
        samples={i: pools[i].array() for i in relu_positions},
        sample_counts={i: pools[i].seen for i in relu_positions},
    )
    return stats.finalize()


def percentile(values: np.ndarray, p: float) -> float:
    """sorted values -> values[min(floor(len*p), len-1)], p in (0, 1]."""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("percentile of empty sample")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"percentile parameter p={p} outside (0, 1]")
    idx = min(int(np.floor(values.size * p)), values.size - 1)
    return float(values[idx])


@dataclass(eq=False)
class NormalizedGraph:
    """A rescaled graph plus the per-position scale factors.

    ``layer_scales[i]`` divides the original ANN output at position i to give
    the normalized one; ``block_scales`` maps each weighted layer position to
    its maxp.
    """

    graph: NetworkGraph
    layer_scales: np.ndarray  # (n_layers,) float64
    block_scales: dict[int, float]

    @classmethod
    def identity(cls, net: NetworkGraph) -> "NormalizedGraph":
        """Unit scales: simulate a graph as-is (useful for hand-built nets)."""
        weighted = [i for i, s in enumerate(net.layers) if s.kind in ("dense", "conv2d")]
        return cls(
            graph=net,
            layer_scales=np.ones(len(net.layers)),
            block_scales={i: 1.0 for i in weighted},
        )

    def scale_out(self, layer_index: int | None = None) -> float:
        """Multiplier restoring original units at a position (default: output)."""
        if layer_index is None:
            layer_index = len(self.graph.layers) - 1
        return float(self.layer_scales[layer_index])


def _block_relu(net: NetworkGraph, start: int) -> int | None:
    """Position of the ReLU trailing the weighted layer at ``start``."""
    for j in range(start + 1, len(net.layers)):
        kind = net.layers[j].kind
        if kind in ("dense", "conv2d"):
            return None
        if kind == "relu":
            return j
    return None


def apply_norm(net: NetworkGraph, stats: ActivationStats, p: float) -> NormalizedGraph:
    """Rescale weights/biases by consecutive activation percentiles."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"normalization percentile p={p} outside (0, 1]")
    new_layers = []
    layer_scales = np.ones(len(net.layers))
    block_scales = {}
    prev = 1.0
    current_scale = 1.0
    for i, spec in enumerate(net.layers):
        if spec.kind in ("dense", "conv2d"):
            relu_pos = _block_relu(net, i)
            if relu_pos is None:
                maxp = 1.0  # readout block: leave output units untouched
            else:
                if relu_pos not in stats.samples:
                    raise ValueError(
                        f"stats missing layer {relu_pos} needed by weighted layer {i}"
                    )
                sample = stats.samples[relu_pos]
                if sample.size == 0 or sample[-1] <= 0:
                    warnings.warn(
                        f"layer {relu_pos}: all activations zero; using scale 1",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                    maxp = 1.0
                else:
                    maxp = percentile(sample, p)
                    if maxp <= 0:
                        raise ValueError(
                            f"layer {relu_pos}: percentile p={p} is {maxp}; "
                            "raise p above the layer's zero fraction"
                        )
            w = spec.weight * (prev / maxp)
            b = None if spec.bias is None else spec.bias / maxp
            if spec.kind == "dense":
                new_layers.append(Dense(weight=w, bias=b))
            else:
                new_layers.append(
                    Conv2d(weight=w, bias=b, stride=spec.stride, padding=spec.padding)
                )
            block_scales[i] = maxp
            prev = maxp
            current_scale = maxp
        else:
            new_layers.append(spec)
        layer_scales[i] = current_scale
    return NormalizedGraph(
        graph=NetworkGraph(layers=new_layers, input_shape=net.input_shape),
        layer_scales=layer_scales,
        block_scales=block_scales,
    )
