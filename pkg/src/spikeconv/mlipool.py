"""Spiking max pooling via lateral inhibition over private block copies.

Each output position owns a private copy of its members' spike streams, so a
neuron shared between overlapping windows (stride != kernel) competes
independently in every block. Ceil-mode geometry pads the right/bottom edge
with permanently silent members (index -1 sentinels). Per step, the block
elects the member with the largest cumulative (net) spike count — ties to the
lowest index — and emits the increment of that running maximum; while the
leader is unchanged this is exactly the winner's spikes passing through with
all other members suppressed, and the block's cumulative output equals the
elected maximum's cumulative count at every step, which makes the conversion
of the pooling layer lossless up to floor slack.

``NaiveMaxPool`` is the uncorrected baseline (per-step elementwise max),
which overshoots the true maximum rate.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import build_block_index

__all__ = ["build_blocks", "LateralInhibitionPool", "NaiveMaxPool"]


def build_blocks(shape, k, s, ceil_mode: bool = False) -> np.ndarray:
    """(n_blocks, k*k) member indices into the flat H*W plane; -1 marks padding."""
    return build_block_index(shape, k, s, ceil_mode)


@dataclass(eq=False)
class LateralInhibitionPool:
    """Per-block competition state for one (C, H, W) layer.

    ``member_cum`` is each block's private copy of member cumulative net
    counts (channels x blocks x members); ``wins``/``suppressed`` account for
    the inhibition outcome per member slot.
    """

    in_shape: tuple
    out_shape: tuple
    block_index: np.ndarray          # (B, K) int64, -1 = silent pad
    member_cum: np.ndarray           # (C, B, K) float64
    run_max: np.ndarray              # (C, B) float64
    wins: np.ndarray                 # (C, B, K) int64
    suppressed: np.ndarray           # (C, B, K) float64
    safe_index: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, in_shape, kernel, stride, ceil_mode: bool = False):
        from .model import _pair, pool_output_extent

        c, h, w = in_shape
        block_index = build_blocks((h, w), kernel, stride, ceil_mode)
        b, k = block_index.shape
        kh, kw = _pair(kernel)
        sh, sw = _pair(stride)
        oh = pool_output_extent(h, kh, sh, ceil_mode)
        ow = pool_output_extent(w, kw, sw, ceil_mode)
        return cls(
            in_shape=tuple(in_shape),
            out_shape=(c, oh, ow),
            block_index=block_index,
            member_cum=np.zeros((c, b, k)),
            run_max=np.zeros((c, b)),
            wins=np.zeros((c, b, k), dtype=np.int64),
            suppressed=np.zeros((c, b, k)),
            safe_index=np.where(block_index < 0, h * w, block_index),
        )

    def gather(self, x) -> np.ndarray:
        """(C, H, W) -> private per-block member values (C, B, K); pads read 0."""
        planes = np.asarray(x).reshape(self.in_shape[0], -1)
        ext = np.concatenate([planes, np.zeros((planes.shape[0], 1))], axis=1)
        return ext[:, self.safe_index]

    def step(self, spikes_in, t: int | None = None) -> np.ndarray:
        """Advance one step; returns the blocks' emitted net counts (C, OH, OW)."""
        g = self.gather(spikes_in)
        self.member_cum += g
        winner = np.argmax(self.member_cum, axis=2)  # first max = lowest index
        widx = winner[..., None]
        np.put_along_axis(
            self.wins, widx, np.take_along_axis(self.wins, widx, 2) + 1, 2
        )
        sup = g.copy()
        np.put_along_axis(sup, widx, 0.0, 2)
        self.suppressed += sup
        m = np.take_along_axis(self.member_cum, widx, 2)[..., 0]
        out = m - self.run_max
        self.run_max = m
        return out.reshape(self.out_shape)

    def snapshot(self) -> dict:
        return {
            "wins": self.wins.copy(),
            "suppressed": self.suppressed.copy(),
            "member_cum": self.member_cum.copy(),
            "run_max": self.run_max.copy(),
        }


@dataclass(eq=False)
class NaiveMaxPool:
    """Uncorrected spiking max pooling: per-step max over block members."""

    in_shape: tuple
    out_shape: tuple
    safe_index: np.ndarray

    @classmethod
    def build(cls, in_shape, kernel, stride, ceil_mode: bool = False):
        from .model import pool_output_extent, _pair

        c, h, w = in_shape
        block_index = build_blocks((h, w), kernel, stride, ceil_mode)
        kh, kw = _pair(kernel)
        sh, sw = _pair(stride)
        oh = pool_output_extent(h, kh, sh, ceil_mode)
        ow = pool_output_extent(w, kw, sw, ceil_mode)
        return cls(
            in_shape=tuple(in_shape),
            out_shape=(c, oh, ow),
            safe_index=np.where(block_index < 0, h * w, block_index),
        )

    def step(self, spikes_in, t: int | None = None) -> np.ndarray:
        planes = np.asarray(spikes_in).reshape(self.in_shape[0], -1)
        ext = np.concatenate([planes, np.zeros((planes.shape[0], 1))], axis=1)
        return ext[:, self.safe_index].max(axis=2).reshape(self.out_shape)
