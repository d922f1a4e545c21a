"""Synapse enumeration between consecutive layers.

Taps are first enumerated over the zero-padded input grid, where padded
positions get placeholder (virtual) source addresses, and then pruned so
that padding never occupies a physical axon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from .ir import LayerSpec, NetworkSpec, NeuronId, TensorShape, WeightStore, neuron_id


@dataclass(frozen=True)
class Synapse:
    src: NeuronId
    dst: NeuronId
    weight: float
    tap: Tuple[int, int, int]  # (kernel_row, kernel_col, in_channel), 0-based


@dataclass(frozen=True, eq=False)
class RawTaps:
    """Every (destination, kernel tap) pair over the padded input grid.

    ``src_row`` and ``src_col`` are in unpadded 0-based coordinates, so a
    virtual source has a row or column outside ``[0, H)`` / ``[0, W)``.
    """

    layer: int
    src_shape: TensorShape
    dst_shape: TensorShape
    dst: np.ndarray
    src_row: np.ndarray
    src_col: np.ndarray
    src_ch: np.ndarray
    krow: np.ndarray
    kcol: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.dst)

    @property
    def virtual(self) -> np.ndarray:
        h, w = self.src_shape.height, self.src_shape.width
        return (self.src_row < 0) | (self.src_row >= h) | (self.src_col < 0) | (self.src_col >= w)

    def source_id(self, i: int) -> NeuronId:
        """Source address of tap ``i``; may be a flagged virtual-padding id."""
        is_virtual = bool(self.virtual[i])
        return NeuronId(
            self.layer - 1,
            int(self.src_ch[i]) + 1,
            int(self.src_row[i]) + 1,
            int(self.src_col[i]) + 1,
            virtual=is_virtual,
        )


@dataclass(frozen=True, eq=False)
class ConnectivityList:
    """All synapses feeding one layer, as parallel arrays.

    ``src`` and ``dst`` are flat neuron indices in the source and destination
    layers.  Ordering is destination (row, col, feature) then kernel row,
    kernel column, input channel.
    """

    layer: int
    src_shape: TensorShape
    dst_shape: TensorShape
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    krow: np.ndarray
    kcol: np.ndarray
    inch: np.ndarray

    def __len__(self):
        return len(self.src)

    def __iter__(self) -> Iterator[Synapse]:
        for i in range(len(self)):
            yield self.synapse(i)

    def synapse(self, i: int) -> Synapse:
        return Synapse(
            neuron_id(self.layer - 1, self.src_shape, self.src[i]),
            neuron_id(self.layer, self.dst_shape, self.dst[i]),
            float(self.weight[i]),
            (int(self.krow[i]), int(self.kcol[i]), int(self.inch[i])),
        )

    @property
    def fan_in(self) -> np.ndarray:
        """Synapse count per destination neuron, indexed by flat id."""
        return np.bincount(self.dst, minlength=self.dst_shape.size)

    def fan_in_of(self, nid: NeuronId) -> int:
        return int(self.fan_in[nid.flat(self.dst_shape)])


def _conv_taps(layer: LayerSpec, src: TensorShape, dst: TensorShape, w: np.ndarray, index: int) -> RawTaps:
    kh, kw = layer.kernel
    sh, sw = layer.stride
    top, _, left, _ = layer.padding
    cin = src.channels
    # axes: out_row, out_col, feature, krow, kcol, inch  (C order gives the required ordering)
    orow = np.arange(dst.height).reshape(-1, 1, 1, 1, 1, 1)
    ocol = np.arange(dst.width).reshape(1, -1, 1, 1, 1, 1)
    feat = np.arange(dst.channels).reshape(1, 1, -1, 1, 1, 1)
    krow = np.arange(kh).reshape(1, 1, 1, -1, 1, 1)
    kcol = np.arange(kw).reshape(1, 1, 1, 1, -1, 1)
    inch = np.arange(cin).reshape(1, 1, 1, 1, 1, -1)
    full = (dst.height, dst.width, dst.channels, kh, kw, cin)

    def spread(a):
        return np.broadcast_to(a, full).ravel()

    dst_flat = (orow * dst.width + ocol) * dst.channels + feat
    return RawTaps(
        layer=index,
        src_shape=src,
        dst_shape=dst,
        dst=spread(dst_flat),
        src_row=spread(orow * sh + krow - top),
        src_col=spread(ocol * sw + kcol - left),
        src_ch=spread(inch),
        krow=spread(krow),
        kcol=spread(kcol),
        weight=spread(w[feat, inch, krow, kcol]),
    )


def _fc_taps(src: TensorShape, dst: TensorShape, w: np.ndarray, index: int) -> RawTaps:
    n_out, n_in = w.shape
    dst_flat = np.repeat(np.arange(n_out), n_in)
    flat_in = np.tile(np.arange(n_in), n_out)
    pixel, ch = np.divmod(flat_in, src.channels)
    row, col = np.divmod(pixel, src.width)
    zeros = np.zeros_like(flat_in)
    return RawTaps(index, src, dst, dst_flat, row, col, ch, zeros, zeros, w.ravel())


def enumerate_taps(spec: NetworkSpec, weights: WeightStore, layer: int) -> RawTaps:
    """Enumerate taps for ``layer`` over the padded grid, virtual sources included."""
    lspec = spec.layer(layer)
    src, dst = spec.input_of(layer), spec.output_of(layer)
    if lspec.is_conv:
        return _conv_taps(lspec, src, dst, weights[layer], layer)
    return _fc_taps(src, dst, weights[layer], layer)


def virtual_pad_then_prune(dst_layer: LayerSpec, raw_taps: RawTaps) -> ConnectivityList:
    """Drop every tap whose source lies on a padded coordinate."""
    keep = ~raw_taps.virtual
    src = raw_taps.src_shape
    row, col, ch = raw_taps.src_row[keep], raw_taps.src_col[keep], raw_taps.src_ch[keep]
    src_flat = (row * src.width + col) * src.channels + ch
    # fully-connected taps carry the flat input index as their channel
    inch = src_flat if not dst_layer.is_conv else ch
    arrays = [src_flat, raw_taps.dst[keep], raw_taps.weight[keep], raw_taps.krow[keep], raw_taps.kcol[keep], inch]
    for a in arrays:
        a.setflags(write=False)
    return ConnectivityList(raw_taps.layer, src, raw_taps.dst_shape, *arrays)


def build_connectivity(spec: NetworkSpec, weights: WeightStore, layer: int) -> ConnectivityList:
    if layer < 1:
        raise ValueError("layer must be >= 1")
    return virtual_pad_then_prune(spec.layer(layer), enumerate_taps(spec, weights, layer))
