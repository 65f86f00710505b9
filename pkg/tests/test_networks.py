import math

import numpy as np
import pytest

from sigdistill.autodiff import Tensor
from sigdistill.errors import ValidationError
from sigdistill.networks import (
    ARCH_PRESETS,
    ArchSpec,
    ConvBlock,
    ResidualBlock,
    build_classifier,
    resolve_arch,
    sample_network,
)

PRESET_NAMES = sorted(ARCH_PRESETS)


def test_same_seed_bit_identical():
    a = sample_network("cnn2", seed=7)
    b = sample_network("cnn2", seed=7)
    for pa, pb in zip(a.params, b.params):
        assert pa.data.tobytes() == pb.data.tobytes()


def test_different_seeds_differ():
    a = sample_network("cnn2", seed=1)
    b = sample_network("cnn2", seed=2)
    assert any(pa.data.tobytes() != pb.data.tobytes() for pa, pb in zip(a.params, b.params))


def test_kaiming_bounds_and_mean():
    # one conv layer with >= 10^4 weights: fan_in = 32*5
    spec = ArchSpec("wide", (ConvBlock(out_channels=64, kernel=5, pool=0),))
    net = sample_network(ArchSpec("stem", (ConvBlock(32, 5, pool=0),) + spec.blocks), seed=3)
    weight = net.params[2].data  # second conv: [64, 32, 5] -> 10240 draws
    assert weight.size >= 10_000
    bound = math.sqrt(6.0 / (32 * 5))
    assert np.abs(weight).max() <= bound
    assert abs(weight.mean()) < 0.02


def test_biases_start_at_zero():
    net = sample_network("alexnet1d", seed=0)
    for layer in net.layers:
        for p in layer.params:
            if p.data.ndim == 1:
                assert np.array_equal(p.data, np.zeros_like(p.data))


@pytest.mark.parametrize("name", PRESET_NAMES)
@pytest.mark.parametrize("n_samples", [16, 128])
def test_preset_forward_shapes(name, n_samples):
    net = sample_network(name, seed=0)
    x = Tensor(np.random.default_rng(0).normal(size=(3, 2, n_samples)).astype(np.float32))
    out = net.forward(x)
    assert out.shape == (3, net.embedding_len(n_samples))


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_preset_float64_mode(name):
    net = sample_network(name, seed=0, dtype=np.float64)
    x = Tensor(np.random.default_rng(0).normal(size=(2, 2, 16)), dtype=np.float64)
    out = net.forward(x)
    assert out.data.dtype == np.float64


def test_embedding_is_flattened_feature_map():
    net = sample_network("cnn2", seed=0)
    # cnn2 on N=128: two stride-2 convs leave 32 channels x 32 positions
    assert net.embedding_len(128) == 32 * 32


def test_classifier_head_shape_and_flags():
    clf = build_classifier("cnn2", n_samples=32, num_classes=5, seed=0)
    x = Tensor(np.random.default_rng(1).normal(size=(4, 2, 32)).astype(np.float32))
    logits = clf.forward(x)
    assert logits.shape == (4, 5)
    assert all(p.requires_grad for p in clf.params)


def test_distillation_net_params_not_trainable_by_default():
    net = sample_network("cnn2", seed=0)
    assert all(not p.requires_grad for p in net.params)


def test_unknown_arch_lists_presets():
    with pytest.raises(ValidationError, match="available"):
        resolve_arch("lenet")


def test_residual_channel_mismatch():
    spec = ArchSpec("bad", (ConvBlock(16, 3, pool=0), ResidualBlock(32)))
    with pytest.raises(ValidationError, match="channels"):
        sample_network(spec, seed=0)


def test_input_too_short_for_pooling_stack():
    net = sample_network("vgg-lite", seed=0)
    with pytest.raises(ValidationError, match="too short"):
        net.embedding_len(8)
