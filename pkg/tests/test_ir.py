import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xbarmap import zoo
from xbarmap.errors import ManifestError, ShapeError, WeightFileError
from xbarmap.ir import (
    LayerSpec,
    NetworkSpec,
    NeuronId,
    TensorShape,
    WeightStore,
    conv_output_shape,
    dump_weights,
    load_weights,
    neuron_id,
    parse_network,
    read_tensor_csv,
    serialize_network,
    write_tensor_csv,
)


@pytest.mark.parametrize(
    "shape, k, s, pad, out, expected",
    [
        ((28, 28, 1), 3, 1, 1, 8, (28, 28, 8)),
        ((32, 32, 3), 3, 1, 0, 8, (30, 30, 8)),
        ((30, 30, 8), 3, 2, 0, 16, (14, 14, 16)),
        ((17, 9, 4), 1, 1, 0, 5, (17, 9, 5)),
        ((28, 28, 8), 3, 2, 1, 16, (14, 14, 16)),
        ((14, 14, 16), 3, 2, 0, 64, (6, 6, 64)),
    ],
)
def test_conv_output_shape(shape, k, s, pad, out, expected):
    layer = LayerSpec.conv(1, out, k=k, stride=s, pad=pad)
    assert conv_output_shape(TensorShape(*shape), layer).as_tuple() == expected


def test_filter_larger_than_padded_input_names_layer():
    with pytest.raises(ShapeError, match="layer 4"):
        conv_output_shape(TensorShape(2, 2, 1), LayerSpec.conv(4, 1, k=5, pad=1))


def test_tensor_shape_rejects_zero():
    with pytest.raises(ShapeError):
        TensorShape(0, 3, 1)


MNIST_MANIFEST = {
    "input": {"h": 28, "w": 28, "c": 1},
    "layers": [
        {"kind": "conv", "k": [3, 3], "stride": [1, 1], "pad": [1, 1, 1, 1], "out_channels": 8},
        {"kind": "conv", "k": [3, 3], "stride": [2, 2], "pad": [1, 1, 1, 1], "out_channels": 16},
        {"kind": "conv", "k": [3, 3], "stride": [2, 2], "pad": [0, 0, 0, 0], "out_channels": 64},
    ],
}


def test_parse_mnist_manifest():
    spec = parse_network(json.dumps(MNIST_MANIFEST).encode())
    assert [s.as_tuple() for s in spec.shapes[1:]] == [(28, 28, 8), (14, 14, 16), (6, 6, 64)]
    assert spec == zoo.mnist()


def test_parse_empty_layer_list():
    spec = parse_network(b'{"input": {"h": 4, "w": 5, "c": 2}, "layers": []}')
    assert len(spec) == 0
    assert spec.shapes == (TensorShape(4, 5, 2),)


def test_stride_zero_rejected():
    doc = json.loads(json.dumps(MNIST_MANIFEST))
    doc["layers"][1]["stride"] = [0, 2]
    with pytest.raises(ManifestError, match="stride must be ≥ 1") as info:
        parse_network(json.dumps(doc))
    assert "layer 2" in str(info.value)


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda d: d["layers"][0].pop("out_channels"), "out_channels"),
        (lambda d: d["layers"][0].update(kind="pool"), "kind"),
        (lambda d: d["layers"][2].update(pad=[-1, 0, 0, 0]), "pad"),
        (lambda d: d["layers"][0].update(bogus=1), "bogus"),
        (lambda d: d.pop("input"), "input"),
        (lambda d: d["layers"][2].update(k=[15, 15]), "layer 3"),
    ],
)
def test_schema_violations(mutate, needle):
    doc = json.loads(json.dumps(MNIST_MANIFEST))
    mutate(doc)
    with pytest.raises(ManifestError, match=needle):
        parse_network(json.dumps(doc))


def test_not_json():
    with pytest.raises(ManifestError):
        parse_network(b"{nope")


@pytest.mark.parametrize("spec", [zoo.mnist(), zoo.cifar10(2), NetworkSpec(TensorShape(5, 4, 3), (
    LayerSpec(1, "conv", 2, (3, 1), (2, 1), (1, 0, 0, 2)), LayerSpec.fc(2, 7)))])
def test_manifest_round_trip(spec):
    assert parse_network(serialize_network(spec)) == spec
    assert serialize_network(parse_network(serialize_network(spec))) == serialize_network(spec)


# --- neuron ids -------------------------------------------------------------


def test_neuron_id_canonical_form():
    nid = NeuronId(1, 1, 1, 1)
    assert str(nid) == "L1-F1-N[1,1]"
    assert NeuronId.parse("L12-F3-N[7,28]") == NeuronId(12, 3, 7, 28)


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4), st.integers(0, 3))
def test_neuron_ids_unique_and_round_trip(h, w, c, layer):
    shape = TensorShape(h, w, c)
    ids = [neuron_id(layer, shape, f) for f in range(shape.size)]
    strings = [str(i) for i in ids]
    assert len(set(strings)) == shape.size
    for flat, (nid, text) in enumerate(zip(ids, strings)):
        assert NeuronId.parse(text) == nid
        assert nid.flat(shape) == flat


def test_neuron_ids_unique_across_network():
    spec = zoo.mnist()
    names = [str(neuron_id(i, s, f)) for i, s in enumerate(spec.shapes) for f in range(s.size)]
    assert len(names) == len(set(names))


def test_flat_index_is_row_col_feature_order():
    shape = TensorShape(2, 3, 4)
    assert neuron_id(1, shape, 0) == NeuronId(1, 1, 1, 1)
    assert neuron_id(1, shape, 1) == NeuronId(1, 2, 1, 1)
    assert neuron_id(1, shape, 4) == NeuronId(1, 1, 1, 2)
    assert neuron_id(1, shape, 12) == NeuronId(1, 1, 2, 1)


# --- weights ----------------------------------------------------------------


def _conv_only_spec():
    return NetworkSpec(TensorShape(5, 5, 1), (LayerSpec.conv(1, 8, k=3),))


def test_weight_slice_for_3x3x1x8_is_288_bytes():
    spec = _conv_only_spec()
    blob, manifest = dump_weights(spec, WeightStore.random(spec, 0))
    assert len(blob) == 288
    assert json.loads(manifest)[0]["length_bytes"] == 288


def test_weight_round_trip_and_layout():
    spec = NetworkSpec(TensorShape(4, 4, 2), (LayerSpec.conv(1, 3, k=3, pad=1), LayerSpec.fc(2, 5)))
    store = WeightStore.random(spec, 7)
    blob, manifest = dump_weights(spec, store)
    back = load_weights(spec, blob, manifest)
    for i in (1, 2):
        np.testing.assert_array_equal(back[i], store[i])
    # raw layout is [out][in][krow][kcol], little-endian float32
    first = np.frombuffer(blob[:4 * 3 * 2 * 9], dtype="<f4").reshape(3, 2, 3, 3)
    np.testing.assert_array_equal(first, store[1])


def test_all_zero_blob():
    spec = zoo.mnist()
    _, manifest = dump_weights(spec, WeightStore.zeros(spec))
    total = sum(int(np.prod(spec.weight_shape(i))) for i in (1, 2, 3)) * 4
    store = load_weights(spec, bytes(total), manifest)
    assert all(not store[i].any() for i in (1, 2, 3))


def test_truncated_blob_reports_byte_counts():
    spec = _conv_only_spec()
    blob, manifest = dump_weights(spec, WeightStore.random(spec, 0))
    with pytest.raises(WeightFileError, match="284 bytes, expected 288"):
        load_weights(spec, blob[:-4], manifest)


def test_manifest_shape_mismatch():
    spec = _conv_only_spec()
    blob, manifest = dump_weights(spec, WeightStore.random(spec, 0))
    entries = json.loads(manifest)
    entries[0]["shape"] = [8, 1, 9, 1]
    with pytest.raises(WeightFileError, match="shape"):
        load_weights(spec, blob, json.dumps(entries))


def test_weight_store_checks_dimensions():
    spec = _conv_only_spec()
    with pytest.raises(WeightFileError):
        WeightStore(spec, {1: np.zeros((8, 1, 3, 2))})
    with pytest.raises(WeightFileError):
        WeightStore(spec, {})


def test_tensor_csv_round_trip():
    x = np.arange(24, dtype=float).reshape(2, 3, 4) / 7
    text = write_tensor_csv(x)
    np.testing.assert_array_equal(read_tensor_csv(text, TensorShape(2, 3, 4)), x)
    # flat order is row-major with the channel fastest
    assert text.splitlines()[1].split(",")[0] == repr(float(x[0, 1, 0]))
    with pytest.raises(ShapeError):
        read_tensor_csv(text, TensorShape(2, 3, 3))
