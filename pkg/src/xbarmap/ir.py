"""Network description, neuron naming, shape algebra and weight ingestion.

Neurons of a layer with shape ``(H, W, C)`` are addressed internally by a
flat index ``(row * W + col) * C + feature`` (all 0-based), i.e. row-major
with the channel varying fastest.  The same order is used for input tensor
files, fully-connected weight columns and axon/neuron slot ordering, so a
sort on flat indices is a sort on ``(row, col, feature)``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple, Union

import numpy as np

from .errors import ManifestError, ShapeError, WeightFileError

CONV = "conv"
FC = "fc"

_FLOAT = np.dtype("<f4")


@dataclass(frozen=True)
class TensorShape:
    height: int
    width: int
    channels: int

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ShapeError(f"{name} must be a positive integer, got {value!r}")

    @property
    def size(self) -> int:
        return self.height * self.width * self.channels

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    def __str__(self):
        return f"{self.height}x{self.width}x{self.channels}"


@dataclass(frozen=True)
class LayerSpec:
    """One feed-forward layer.

    For ``kind == "fc"`` the geometric fields are ``None``; the layer reads
    the whole flattened input and produces a ``1 x 1 x out_channels`` map.
    """

    index: int
    kind: str
    out_channels: int
    kernel: Optional[Tuple[int, int]] = None
    stride: Optional[Tuple[int, int]] = None
    padding: Optional[Tuple[int, int, int, int]] = None  # top, bottom, left, right

    def __post_init__(self):
        where = f"layer {self.index}"
        if self.kind not in (CONV, FC):
            raise ManifestError(f"{where}: kind must be 'conv' or 'fc', got {self.kind!r}")
        if self.out_channels < 1:
            raise ManifestError(f"{where}: out_channels must be ≥ 1")
        if self.kind == FC:
            if self.kernel is not None or self.stride is not None or self.padding is not None:
                raise ManifestError(f"{where}: fully-connected layer takes no kernel/stride/pad")
            return
        if self.kernel is None or len(self.kernel) != 2 or min(self.kernel) < 1:
            raise ManifestError(f"{where}: kernel must be ≥ 1")
        if self.stride is None or len(self.stride) != 2 or min(self.stride) < 1:
            raise ManifestError(f"{where}: stride must be ≥ 1")
        if self.padding is None or len(self.padding) != 4 or min(self.padding) < 0:
            raise ManifestError(f"{where}: pad must be ≥ 0")

    @property
    def is_conv(self) -> bool:
        return self.kind == CONV

    @classmethod
    def conv(cls, index, out_channels, k=3, stride=1, pad=0):
        """Shorthand for a square-kernel convolution with symmetric padding."""
        kernel = (k, k) if isinstance(k, int) else tuple(k)
        strides = (stride, stride) if isinstance(stride, int) else tuple(stride)
        pads = (pad,) * 4 if isinstance(pad, int) else tuple(pad)
        return cls(index, CONV, out_channels, kernel, strides, pads)

    @classmethod
    def fc(cls, index, out):
        return cls(index, FC, out)


def conv_output_shape(input: TensorShape, layer: LayerSpec) -> TensorShape:
    """Output shape of a convolution, using floor division for ragged strides."""
    if not layer.is_conv:
        raise ShapeError(f"layer {layer.index}: conv_output_shape needs a convolution")
    kh, kw = layer.kernel
    sh, sw = layer.stride
    top, bottom, left, right = layer.padding
    padded_h = input.height + top + bottom
    padded_w = input.width + left + right
    if padded_h < kh or padded_w < kw:
        raise ShapeError(
            f"layer {layer.index}: filter {kh}x{kw} larger than padded input "
            f"{padded_h}x{padded_w}"
        )
    return TensorShape((padded_h - kh) // sh + 1, (padded_w - kw) // sw + 1, layer.out_channels)


def layer_output_shape(input: TensorShape, layer: LayerSpec) -> TensorShape:
    if layer.is_conv:
        return conv_output_shape(input, layer)
    return TensorShape(1, 1, layer.out_channels)


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: TensorShape
    layers: Tuple[LayerSpec, ...] = ()
    shapes: Tuple[TensorShape, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        shapes = [self.input_shape]
        for position, layer in enumerate(self.layers, start=1):
            if layer.index != position:
                raise ManifestError(f"layer {position}: index {layer.index} out of order")
            shapes.append(layer_output_shape(shapes[-1], layer))
        object.__setattr__(self, "shapes", tuple(shapes))

    def __len__(self):
        return len(self.layers)

    def layer(self, index: int) -> LayerSpec:
        if not 1 <= index <= len(self.layers):
            raise IndexError(f"no layer {index}")
        return self.layers[index - 1]

    def input_of(self, index: int) -> TensorShape:
        return self.shapes[index - 1]

    def output_of(self, index: int) -> TensorShape:
        return self.shapes[index]

    def weight_shape(self, index: int) -> Tuple[int, ...]:
        """Expected weight tensor dimensions for layer ``index``."""
        layer = self.layer(index)
        src = self.input_of(index)
        if layer.is_conv:
            return (layer.out_channels, src.channels) + tuple(layer.kernel)
        return (layer.out_channels, src.size)


# --- neuron naming ---------------------------------------------------------

_ID_RE = re.compile(r"^L(\d+)-F(-?\d+)-N\[(-?\d+),(-?\d+)\]$")


@dataclass(frozen=True, order=True)
class NeuronId:
    """1-based neuron address; layer 0 is the network input."""

    layer: int
    feature: int
    row: int
    col: int
    virtual: bool = field(default=False, compare=False)

    def __str__(self):
        return f"L{self.layer}-F{self.feature}-N[{self.row},{self.col}]"

    @classmethod
    def parse(cls, text: str) -> "NeuronId":
        match = _ID_RE.match(text.strip())
        if match is None:
            raise ValueError(f"not a neuron id: {text!r}")
        return cls(*(int(g) for g in match.groups()))

    def flat(self, shape: TensorShape) -> int:
        """Flat index of this neuron inside a layer of ``shape``."""
        if not (
            1 <= self.row <= shape.height
            and 1 <= self.col <= shape.width
            and 1 <= self.feature <= shape.channels
        ):
            raise ValueError(f"{self} lies outside {shape}")
        return ((self.row - 1) * shape.width + self.col - 1) * shape.channels + self.feature - 1


def neuron_id(layer: int, shape: TensorShape, flat: int) -> NeuronId:
    pixel, feature = divmod(int(flat), shape.channels)
    row, col = divmod(pixel, shape.width)
    return NeuronId(layer, feature + 1, row + 1, col + 1)


def neuron_ids(layer: int, shape: TensorShape, flats) -> Tuple[NeuronId, ...]:
    return tuple(neuron_id(layer, shape, f) for f in flats)


# --- manifests --------------------------------------------------------------


def _pair(value, name, where):
    if isinstance(value, int) and not isinstance(value, bool):
        return (value, value)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        return tuple(value)
    raise ManifestError(f"{where}: field '{name}' must be an int or a pair of ints")


def _positive(value, name, where):
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ManifestError(f"{where}: field '{name}' must be ≥ 1")
    return value


def _layer_from_json(index: int, entry) -> LayerSpec:
    where = f"layer {index}"
    if not isinstance(entry, dict):
        raise ManifestError(f"{where}: expected an object")
    kind = entry.get("kind")
    if kind == FC:
        unknown = set(entry) - {"kind", "out"}
        if unknown:
            raise ManifestError(f"{where}: unknown field '{sorted(unknown)[0]}'")
        return LayerSpec.fc(index, _positive(entry.get("out"), "out", where))
    if kind != CONV:
        raise ManifestError(f"{where}: field 'kind' must be 'conv' or 'fc'")
    unknown = set(entry) - {"kind", "k", "stride", "pad", "out_channels"}
    if unknown:
        raise ManifestError(f"{where}: unknown field '{sorted(unknown)[0]}'")
    kernel = _pair(entry.get("k"), "k", where)
    stride = _pair(entry.get("stride", 1), "stride", where)
    pad = entry.get("pad", 0)
    if isinstance(pad, int) and not isinstance(pad, bool):
        pad = [pad] * 4
    if not (isinstance(pad, (list, tuple)) and len(pad) == 4 and all(isinstance(p, int) for p in pad)):
        raise ManifestError(f"{where}: field 'pad' must be [top, bottom, left, right]")
    if min(kernel) < 1:
        raise ManifestError(f"{where}: field 'k': kernel must be ≥ 1")
    if min(stride) < 1:
        raise ManifestError(f"{where}: field 'stride': stride must be ≥ 1")
    if min(pad) < 0:
        raise ManifestError(f"{where}: field 'pad': padding must be ≥ 0")
    out_channels = _positive(entry.get("out_channels"), "out_channels", where)
    return LayerSpec(index, CONV, out_channels, kernel, stride, tuple(pad))


def parse_network(manifest_text: Union[bytes, str]) -> NetworkSpec:
    """Build a validated :class:`NetworkSpec` from the JSON network manifest."""
    try:
        doc = json.loads(manifest_text)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ManifestError(f"network manifest is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "input" not in doc:
        raise ManifestError("network manifest needs an 'input' object")
    inp = doc["input"]
    if not isinstance(inp, dict):
        raise ManifestError("input: expected an object")
    dims = [_positive(inp.get(k), k, "input") for k in ("h", "w", "c")]
    layers_doc = doc.get("layers", [])
    if not isinstance(layers_doc, list):
        raise ManifestError("'layers' must be a list")
    layers = [_layer_from_json(i, entry) for i, entry in enumerate(layers_doc, start=1)]
    try:
        return NetworkSpec(TensorShape(*dims), tuple(layers))
    except ShapeError as exc:
        raise ManifestError(f"inconsistent shape chain: {exc}") from None


def network_to_dict(spec: NetworkSpec) -> dict:
    layers = []
    for layer in spec.layers:
        if layer.is_conv:
            layers.append(
                {
                    "kind": CONV,
                    "k": list(layer.kernel),
                    "stride": list(layer.stride),
                    "pad": list(layer.padding),
                    "out_channels": layer.out_channels,
                }
            )
        else:
            layers.append({"kind": FC, "out": layer.out_channels})
    shape = spec.input_shape
    return {"input": {"h": shape.height, "w": shape.width, "c": shape.channels}, "layers": layers}


def serialize_network(spec: NetworkSpec) -> bytes:
    return (json.dumps(network_to_dict(spec), indent=2) + "\n").encode()


# --- weights ----------------------------------------------------------------


class WeightStore(Mapping):
    """Per-layer weight tensors, checked against the owning network.

    Convolution tensors are ``[out][in][krow][kcol]``, fully-connected ones
    ``[out][in]`` with ``in`` the flat input index.
    """

    def __init__(self, spec: NetworkSpec, tensors: Mapping[int, np.ndarray]):
        self._tensors = {}
        for index in range(1, len(spec) + 1):
            if index not in tensors:
                raise WeightFileError(f"layer {index}: no weights")
            array = np.asarray(tensors[index], dtype=np.float64)
            expected = spec.weight_shape(index)
            if array.shape != expected:
                raise WeightFileError(f"layer {index}: weight shape {array.shape} != {expected}")
            array.setflags(write=False)
            self._tensors[index] = array
        extra = set(tensors) - set(self._tensors)
        if extra:
            raise WeightFileError(f"weights given for unknown layer {min(extra)}")

    def __getitem__(self, index):
        return self._tensors[index]

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    @classmethod
    def zeros(cls, spec):
        return cls(spec, {i: np.zeros(spec.weight_shape(i)) for i in range(1, len(spec) + 1)})

    @classmethod
    def random(cls, spec, seed=None, scale=1.0):
        """Gaussian weights rounded through float32 so they survive the blob format."""
        rng = np.random.default_rng(seed)
        tensors = {}
        for i in range(1, len(spec) + 1):
            w = rng.normal(0.0, scale, size=spec.weight_shape(i))
            tensors[i] = w.astype(np.float32).astype(np.float64)
        return cls(spec, tensors)


def load_weights(spec: NetworkSpec, blob: bytes, manifest: Union[bytes, str]) -> WeightStore:
    """Read the float32 little-endian weight blob described by ``manifest``."""
    try:
        entries = json.loads(manifest)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ManifestError(f"weight manifest is not valid JSON: {exc}") from None
    if not isinstance(entries, list):
        raise ManifestError("weight manifest must be a list")

    expected_total = sum(int(np.prod(spec.weight_shape(i))) for i in range(1, len(spec) + 1)) * 4
    if len(blob) != expected_total:
        raise WeightFileError(
            f"weight blob is {len(blob)} bytes, expected {expected_total} bytes"
        )

    tensors = {}
    for entry in entries:
        if not isinstance(entry, dict):
            raise ManifestError("weight manifest entries must be objects")
        try:
            index = int(entry["layer"])
            shape = tuple(int(d) for d in entry["shape"])
            offset = int(entry["offset_bytes"])
            length = int(entry["length_bytes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"weight manifest entry missing or bad field: {exc}") from None
        if not 1 <= index <= len(spec):
            raise WeightFileError(f"weight manifest names unknown layer {index}")
        if index in tensors:
            raise WeightFileError(f"layer {index}: listed twice in weight manifest")
        expected_shape = spec.weight_shape(index)
        if shape != expected_shape:
            raise WeightFileError(f"layer {index}: manifest shape {list(shape)} != {list(expected_shape)}")
        want = int(np.prod(shape)) * 4
        if length != want:
            raise WeightFileError(f"layer {index}: length_bytes {length}, expected {want} bytes")
        if offset < 0 or offset + length > len(blob):
            raise WeightFileError(
                f"layer {index}: bytes {offset}..{offset + length} outside blob of {len(blob)} bytes"
            )
        data = np.frombuffer(blob, dtype=_FLOAT, count=want // 4, offset=offset)
        tensors[index] = data.reshape(shape)
    return WeightStore(spec, tensors)


def dump_weights(spec: NetworkSpec, weights: WeightStore) -> Tuple[bytes, bytes]:
    """Inverse of :func:`load_weights`: returns ``(blob, manifest_json)``."""
    chunks, entries, offset = [], [], 0
    for index in range(1, len(spec) + 1):
        raw = np.ascontiguousarray(weights[index], dtype=_FLOAT).tobytes()
        entries.append(
            {
                "layer": index,
                "shape": list(spec.weight_shape(index)),
                "offset_bytes": offset,
                "length_bytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    return b"".join(chunks), (json.dumps(entries, indent=2) + "\n").encode()


def read_tensor_csv(text: str, shape: TensorShape) -> np.ndarray:
    """Parse a float CSV in flat (row, col, channel) order into an ``(H, W, C)`` array."""
    values = [float(cell) for line in text.splitlines() for cell in line.split(",") if cell.strip()]
    if len(values) != shape.size:
        raise ShapeError(f"tensor file has {len(values)} values, expected {shape.size} for {shape}")
    return np.asarray(values, dtype=np.float64).reshape(shape.as_tuple())


def write_tensor_csv(tensor: np.ndarray) -> str:
    """One line per pixel, channels across the line."""
    h, w, c = tensor.shape
    rows = tensor.reshape(h * w, c)
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in rows)


def check_tensor(x, shape: TensorShape, name="input") -> np.ndarray:
    """Coerce ``x`` to an ``(H, W, C)`` float array, accepting the flat form too."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape == shape.as_tuple():
        return arr
    if arr.ndim == 1 and arr.size == shape.size:
        return arr.reshape(shape.as_tuple())
    if arr.ndim == 2 and shape.channels == 1 and arr.shape == (shape.height, shape.width):
        return arr[:, :, None]
    raise ShapeError(f"{name} has shape {arr.shape}, expected {shape.as_tuple()}")


__all__ = [
    "TensorShape",
    "LayerSpec",
    "NetworkSpec",
    "NeuronId",
    "WeightStore",
    "conv_output_shape",
    "layer_output_shape",
    "parse_network",
    "serialize_network",
    "network_to_dict",
    "load_weights",
    "dump_weights",
    "neuron_id",
    "neuron_ids",
    "read_tensor_csv",
    "write_tensor_csv",
    "check_tensor",
]

