"""Network representation and the ANN forward pass.

Layers are plain dataclasses holding their parameters as read-only numpy
arrays; a :class:`NetworkGraph` is a strictly sequential list of layers whose
shapes are validated at construction. ``forward`` evaluates the ReLU network
exactly and is the ground-truth oracle every conversion check compares
against. The same compiled layer ops are reused by the spiking engine so ANN
and SNN see bit-identical arithmetic for the linear parts.

Tensors are numpy ``float64`` arrays in C (row-major) order. Conv inputs are
channels-first ``(C, H, W)``.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphError",
    "Dense",
    "Conv2d",
    "Relu",
    "MaxPool2d",
    "AvgPool2d",
    "Flatten",
    "NetworkGraph",
    "forward",
    "pool_output_extent",
    "pool_window_starts",
    "check_tensor",
]


class GraphError(ValueError):
    """Structural problem in a network graph, naming the offending layer."""

    def __init__(self, layer_index: int, message: str):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: {message}")


def check_tensor(x, shape=None, name: str = "tensor") -> np.ndarray:
    """Validate a module-boundary tensor: finite float64, C-order, optional shape."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf")
    if shape is not None and tuple(x.shape) != tuple(shape):
        raise ValueError(f"{name} has shape {tuple(x.shape)}, expected {tuple(shape)}")
    return x


def _freeze(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _pair(v) -> tuple[int, int]:
    if np.isscalar(v):
        return (int(v), int(v))
    a, b = v
    return (int(a), int(b))


def pool_output_extent(size: int, k: int, s: int, ceil_mode: bool) -> int:
    """Output extent along one spatial axis: ceil((size-k)/s)+1 or floor(...)+1."""
    if ceil_mode:
        return (size - k + s - 1) // s + 1
    return (size - k) // s + 1


def pool_window_starts(size: int, k: int, s: int, ceil_mode: bool) -> list[int]:
    n = pool_output_extent(size, k, s, ceil_mode)
    return [i * s for i in range(n)]


@dataclass(frozen=True, eq=False)
class Dense:
    weight: np.ndarray  # (out_features, in_features)
    bias: np.ndarray | None = None

    kind = "dense"

    def __post_init__(self):
        object.__setattr__(self, "weight", _freeze(self.weight))
        if self.weight.ndim != 2:
            raise ValueError("dense weight must be 2-D (out, in)")
        if self.bias is not None:
            object.__setattr__(self, "bias", _freeze(self.bias))
            if self.bias.shape != (self.weight.shape[0],):
                raise ValueError("dense bias length must equal out_features")
        if not np.all(np.isfinite(self.weight)) or (
            self.bias is not None and not np.all(np.isfinite(self.bias))
        ):
            raise ValueError("dense parameters contain NaN or Inf")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def out_shape(self, in_shape):
        if in_shape != (self.in_features,):
            raise ValueError(
                f"dense expects input shape ({self.in_features},), got {in_shape}"
            )
        return (self.out_features,)


@dataclass(frozen=True, eq=False)
class Conv2d:
    weight: np.ndarray  # (out_c, in_c, kh, kw)
    bias: np.ndarray | None = None
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)

    kind = "conv2d"

    def __post_init__(self):
        object.__setattr__(self, "weight", _freeze(self.weight))
        object.__setattr__(self, "stride", _pair(self.stride))
        object.__setattr__(self, "padding", _pair(self.padding))
        if self.weight.ndim != 4:
            raise ValueError("conv2d weight must be 4-D (out_c, in_c, kh, kw)")
        if min(self.stride) < 1 or min(self.padding) < 0:
            raise ValueError("conv2d stride must be >=1 and padding >=0")
        if self.bias is not None:
            object.__setattr__(self, "bias", _freeze(self.bias))
            if self.bias.shape != (self.weight.shape[0],):
                raise ValueError("conv2d bias length must equal out_channels")
        if not np.all(np.isfinite(self.weight)) or (
            self.bias is not None and not np.all(np.isfinite(self.bias))
        ):
            raise ValueError("conv2d parameters contain NaN or Inf")

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> tuple[int, int]:
        return self.weight.shape[2], self.weight.shape[3]

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ValueError(
                f"conv2d expects input shape ({self.in_channels}, H, W), got {in_shape}"
            )
        _, h, w = in_shape
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self.padding
        oh = (h + 2 * ph - kh) // sh + 1
        ow = (w + 2 * pw - kw) // sw + 1
        if oh < 1 or ow < 1:
            raise ValueError(f"conv2d kernel {self.kernel} too large for input {in_shape}")
        return (self.out_channels, oh, ow)


@dataclass(frozen=True)
class Relu:
    kind = "relu"

    def out_shape(self, in_shape):
        return in_shape


@dataclass(frozen=True, eq=False)
class _Pool2d:
    kernel: tuple[int, int]
    stride: tuple[int, int] | None = None
    ceil_mode: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kernel", _pair(self.kernel))
        stride = self.kernel if self.stride is None else _pair(self.stride)
        object.__setattr__(self, "stride", stride)
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ValueError("pool kernel and stride extents must be >= 1")

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ValueError(f"{self.kind} expects input shape (C, H, W), got {in_shape}")
        c, h, w = in_shape
        kh, kw = self.kernel
        sh, sw = self.stride
        if kh > h or kw > w:
            raise ValueError(f"{self.kind} kernel {self.kernel} exceeds input {in_shape}")
        oh = pool_output_extent(h, kh, sh, self.ceil_mode)
        ow = pool_output_extent(w, kw, sw, self.ceil_mode)
        # ceil mode may produce a window with no in-bounds element only when
        # stride > kernel; reject instead of silently dropping the position
        if (oh - 1) * sh >= h or (ow - 1) * sw >= w:
            raise ValueError(f"{self.kind} window fully outside input {in_shape}")
        return (c, oh, ow)


@dataclass(frozen=True, eq=False)
class MaxPool2d(_Pool2d):
    kind = "maxpool2d"


@dataclass(frozen=True, eq=False)
class AvgPool2d(_Pool2d):
    kind = "avgpool2d"


@dataclass(frozen=True)
class Flatten:
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


LAYER_KINDS = ("dense", "conv2d", "relu", "maxpool2d", "avgpool2d", "flatten")


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Strictly sequential layer list; shapes validated at construction.

    The topology is a plain list, so branching/shortcut architectures are
    unrepresentable by design; the loader rejects any manifest that is not a
    flat sequence.
    """

    layers: tuple
    input_shape: tuple[int, ...]
    _shapes: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        if any(d < 1 for d in self.input_shape):
            raise ValueError("input_shape extents must be positive")
        shapes = [self.input_shape]
        for i, spec in enumerate(self.layers):
            if spec.kind not in LAYER_KINDS:
                raise GraphError(i, f"unknown layer kind {spec.kind!r}")
            try:
                shapes.append(tuple(spec.out_shape(shapes[-1])))
            except ValueError as exc:
                raise GraphError(i, str(exc)) from exc
        object.__setattr__(self, "_shapes", tuple(shapes))

    @property
    def layer_shapes(self) -> tuple:
        """Output shape of every layer position; entry 0 is the input shape."""
        return self._shapes

    def shape_in(self, i: int) -> tuple:
        return self._shapes[i]

    def shape_out(self, i: int) -> tuple:
        return self._shapes[i + 1]

    def __len__(self) -> int:
        return len(self.layers)

    def ops(self) -> list:
        """Compiled per-layer appliers (cached; the graph is immutable)."""
        cache = getattr(self, "_ops_cache", None)
        if cache is None:
            cache = [
                build_op(spec, self.shape_in(i)) for i, spec in enumerate(self.layers)
            ]
            object.__setattr__(self, "_ops_cache", cache)
        return cache


# --- compiled layer ops -----------------------------------------------------
#
# Each op is a callable (C,H,W)- or (n,)-array -> array. Gather indices are
# precomputed once so the spiking engine can apply the same op every time step
# without per-call setup, and so ANN and SNN share identical float arithmetic.


class DenseOp:
    def __init__(self, spec: Dense):
        self.weight = spec.weight
        self.bias = spec.bias

    def __call__(self, x):
        y = self.weight @ x
        if self.bias is not None:
            y = y + self.bias
        return y


class Conv2dOp:
    def __init__(self, spec: Conv2d, in_shape):
        c, h, w = in_shape
        kh, kw = spec.kernel
        sh, sw = spec.stride
        ph, pw = spec.padding
        self.in_shape = in_shape
        self.out_shape = spec.out_shape(in_shape)
        self.pad = (ph, pw)
        hp, wp = h + 2 * ph, w + 2 * pw
        oc, oh, ow = self.out_shape
        # flat gather indices into the padded (C, hp, wp) volume:
        # rows = C*kh*kw taps, cols = oh*ow output positions
        ci, ki, kj = np.meshgrid(np.arange(c), np.arange(kh), np.arange(kw), indexing="ij")
        oi, oj = np.meshgrid(np.arange(oh), np.arange(ow), indexing="ij")
        rows = (ci * hp * wp)[..., None] + (ki * wp)[..., None] + kj[..., None]
        cols = (oi * sh * wp + oj * sw).ravel()
        self.col_index = (rows.reshape(c * kh * kw, 1) + cols[None, :]).ravel()
        self.w_mat = spec.weight.reshape(oc, c * kh * kw)
        self.bias = spec.bias

    def __call__(self, x):
        ph, pw = self.pad
        if ph or pw:
            x = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
        cols = np.take(x.ravel(), self.col_index).reshape(self.w_mat.shape[1], -1)
        y = self.w_mat @ cols
        if self.bias is not None:
            y = y + self.bias[:, None]
        return y.reshape(self.out_shape)


class ReluOp:
    def __init__(self):
        pass

    def __call__(self, x):
        return np.maximum(x, 0.0)


class PoolOp:
    """Shared max/avg pooling over (possibly partial) windows.

    ``block_index`` maps each output position to its member indices in the
    flat (H*W) channel plane, -1 marking out-of-bounds (ceil-mode pad) slots.
    Partial windows pool over the in-bounds subset only.
    """

    def __init__(self, spec: _Pool2d, in_shape):
        c, h, w = in_shape
        self.in_shape = in_shape
        self.out_shape = spec.out_shape(in_shape)
        self.mode = "max" if spec.kind == "maxpool2d" else "avg"
        self.block_index = build_block_index((h, w), spec.kernel, spec.stride, spec.ceil_mode)
        self.n_blocks, self.block_size = self.block_index.shape
        self.safe_index = np.where(self.block_index < 0, h * w, self.block_index)
        self.in_bounds = self.block_index >= 0
        self.member_count = self.in_bounds.sum(axis=1)

    def gather(self, planes, fill: float):
        """(C, H*W) planes -> (C, n_blocks, block_size) with pads = fill."""
        ext = np.concatenate([planes, np.full((planes.shape[0], 1), fill)], axis=1)
        return ext[:, self.safe_index]

    def __call__(self, x):
        c = self.in_shape[0]
        planes = x.reshape(c, -1)
        if self.mode == "max":
            vals = self.gather(planes, -np.inf)
            out = vals.max(axis=2)
        else:
            vals = self.gather(planes, 0.0)
            out = vals.sum(axis=2) / self.member_count
        return out.reshape(self.out_shape)


class FlattenOp:
    def __call__(self, x):
        return x.reshape(-1)


def build_block_index(
    shape: tuple[int, int], kernel, stride, ceil_mode: bool
) -> np.ndarray:
    """Pooling geometry: (n_blocks, kh*kw) indices into the flat H*W plane.

    Out-of-bounds (ceil-mode padded) slots are -1: permanently silent members.
    Raises if any window has no in-bounds element.
    """
    h, w = int(shape[0]), int(shape[1])
    kh, kw = _pair(kernel)
    sh, sw = _pair(stride)
    if kh > h or kw > w:
        raise ValueError(f"pool kernel ({kh},{kw}) exceeds input ({h},{w})")
    rows = pool_window_starts(h, kh, sh, ceil_mode)
    cols = pool_window_starts(w, kw, sw, ceil_mode)
    blocks = np.empty((len(rows) * len(cols), kh * kw), dtype=np.int64)
    b = 0
    for r0 in rows:
        for c0 in cols:
            members = []
            for dr in range(kh):
                for dc in range(kw):
                    r, c = r0 + dr, c0 + dc
                    members.append(r * w + c if (r < h and c < w) else -1)
            if all(m < 0 for m in members):
                raise ValueError(f"pool window at ({r0},{c0}) fully outside input")
            blocks[b] = members
            b += 1
    return blocks


def build_op(spec, in_shape):
    if spec.kind == "dense":
        spec.out_shape(in_shape)  # shape check
        return DenseOp(spec)
    if spec.kind == "conv2d":
        return Conv2dOp(spec, in_shape)
    if spec.kind == "relu":
        return ReluOp()
    if spec.kind in ("maxpool2d", "avgpool2d"):
        return PoolOp(spec, in_shape)
    if spec.kind == "flatten":
        return FlattenOp()
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def forward(net: NetworkGraph, x) -> list[np.ndarray]:
    """Evaluate the network, returning every layer position's output.

    The returned list is parallel to ``net.layers``; for a relu position the
    entry is the post-activation output, and the preceding entry is that
    activation's pre-ReLU input.
    """
    x = check_tensor(x, net.input_shape, "input")
    outputs = []
    for i, op in enumerate(net.ops()):
        try:
            x = op(x)
        except ValueError as exc:
            raise GraphError(i, str(exc)) from exc
        outputs.append(x)
    return outputs
