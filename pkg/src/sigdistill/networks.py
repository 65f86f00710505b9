"""Embedding-network presets and parameter sampling.

Networks operate on [B, 2, N] inputs (I/Q as two channels). During
distillation the embedding is the flattened final feature map; the
classifier used for evaluation adds a linear head on top.

Parameters are drawn Kaiming-uniform with fan-in scaling (bounds
+-sqrt(6/fan_in)) and zero biases. There is intentionally no batch
normalization: the embedding nets are resampled untrained every
iteration, and batch statistics would couple the loss to batch
composition. Blocks use per-sample instance normalization instead
(no batch statistics, no learned parameters), which also keeps
time-domain and DFT-magnitude inputs on comparable footing despite
their very different scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ValidationError


@dataclass(frozen=True)
class ConvBlock:
    """conv(k, pad=k//2, stride) -> instance norm -> relu -> optional maxpool."""

    out_channels: int
    kernel: int = 5
    pool: int = 2
    stride: int = 1
    norm: bool = True


@dataclass(frozen=True)
class ResidualBlock:
    """(conv-norm-relu-conv-norm) + identity skip -> relu -> optional maxpool."""

    channels: int
    kernel: int = 3
    pool: int = 2
    norm: bool = True


@dataclass(frozen=True)
class ArchSpec:
    name: str
    blocks: tuple


ARCH_PRESETS: dict[str, ArchSpec] = {
    # 2 strided conv blocks; small and memory-lean, the distillation workhorse
    "cnn2": ArchSpec(
        "cnn2",
        (ConvBlock(16, 5, pool=0, stride=2), ConvBlock(32, 5, pool=0, stride=2)),
    ),
    # 5 conv blocks, pooling after blocks 1, 2 and 5
    "alexnet1d": ArchSpec(
        "alexnet1d",
        (
            ConvBlock(32, 7, pool=2),
            ConvBlock(64, 5, pool=2),
            ConvBlock(96, 3, pool=0),
            ConvBlock(96, 3, pool=0),
            ConvBlock(64, 3, pool=2),
        ),
    ),
    # 8 thin conv layers, pooling after every pair
    "vgg-lite": ArchSpec(
        "vgg-lite",
        (
            ConvBlock(16, 3, pool=0),
            ConvBlock(16, 3, pool=2),
            ConvBlock(32, 3, pool=0),
            ConvBlock(32, 3, pool=2),
            ConvBlock(48, 3, pool=0),
            ConvBlock(48, 3, pool=2),
            ConvBlock(64, 3, pool=0),
            ConvBlock(64, 3, pool=2),
        ),
    ),
    # conv stem then 4 residual blocks at constant width
    "resnet1d-lite": ArchSpec(
        "resnet1d-lite",
        (
            ConvBlock(32, 5, pool=0),
            ResidualBlock(32),
            ResidualBlock(32),
            ResidualBlock(32),
            ResidualBlock(32),
        ),
    ),
}


def resolve_arch(arch: str | ArchSpec) -> ArchSpec:
    if isinstance(arch, ArchSpec):
        return arch
    try:
        return ARCH_PRESETS[arch]
    except KeyError:
        raise ValidationError(
            f"unknown architecture {arch!r}; available: {sorted(ARCH_PRESETS)}"
        ) from None


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> Tensor:
    bound = math.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, shape).astype(dtype))


class _ConvLayer:
    def __init__(self, rng, in_ch, spec: ConvBlock, dtype):
        self.weight = _kaiming_uniform(rng, (spec.out_channels, in_ch, spec.kernel), in_ch * spec.kernel, dtype)
        self.bias = Tensor(np.zeros(spec.out_channels, dtype=dtype))
        self.padding = spec.kernel // 2
        self.stride = spec.stride
        self.kernel = spec.kernel
        self.pool = spec.pool
        self.norm = spec.norm
        self.out_channels = spec.out_channels

    @property
    def params(self):
        return [self.weight, self.bias]

    def forward(self, x: Tensor) -> Tensor:
        out = ad.conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)
        if self.norm:
            out = ad.instance_norm(out)
        out = ad.relu(out)
        if self.pool > 1:
            out = ad.max_pool1d(out, self.pool, self.pool)
        return out

    def out_len(self, length: int) -> int:
        length = (length + 2 * self.padding - self.kernel) // self.stride + 1
        return length // self.pool if self.pool > 1 else length


class _ResLayer:
    def __init__(self, rng, in_ch, spec: ResidualBlock, dtype):
        if in_ch != spec.channels:
            raise ValidationError(
                f"residual block needs matching channels, got {in_ch} -> {spec.channels}"
            )
        fan_in = spec.channels * spec.kernel
        self.w1 = _kaiming_uniform(rng, (spec.channels, spec.channels, spec.kernel), fan_in, dtype)
        self.b1 = Tensor(np.zeros(spec.channels, dtype=dtype))
        self.w2 = _kaiming_uniform(rng, (spec.channels, spec.channels, spec.kernel), fan_in, dtype)
        self.b2 = Tensor(np.zeros(spec.channels, dtype=dtype))
        self.padding = spec.kernel // 2
        self.pool = spec.pool
        self.norm = spec.norm
        self.out_channels = spec.channels

    @property
    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, x: Tensor) -> Tensor:
        h = ad.conv1d(x, self.w1, self.b1, padding=self.padding)
        if self.norm:
            h = ad.instance_norm(h)
        h = ad.conv1d(ad.relu(h), self.w2, self.b2, padding=self.padding)
        if self.norm:
            h = ad.instance_norm(h)
        out = ad.relu(ad.add(h, x))
        if self.pool > 1:
            out = ad.max_pool1d(out, self.pool, self.pool)
        return out

    def out_len(self, length: int) -> int:
        return length // self.pool if self.pool > 1 else length


class EmbeddingNet:
    """A randomly parameterized feature extractor: blocks then flatten."""

    def __init__(self, arch: ArchSpec, seed: int, dtype=np.float32, in_channels: int = 2):
        self.arch = arch
        rng = np.random.default_rng(seed)
        self.layers = []
        ch = in_channels
        for spec in arch.blocks:
            if isinstance(spec, ConvBlock):
                layer = _ConvLayer(rng, ch, spec, dtype)
            elif isinstance(spec, ResidualBlock):
                layer = _ResLayer(rng, ch, spec, dtype)
            else:
                raise ValidationError(f"unknown block spec {spec!r}")
            self.layers.append(layer)
            ch = layer.out_channels
        self.out_channels = ch
        self.dtype = np.dtype(dtype)

    @property
    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params]

    def set_trainable(self, trainable: bool) -> None:
        for p in self.params:
            p.requires_grad = trainable

    def embedding_len(self, n_samples: int) -> int:
        length = n_samples
        for layer in self.layers:
            length = layer.out_len(length)
            if length < 1:
                raise ValidationError(
                    f"{self.arch.name}: input length {n_samples} too short for the pooling stack"
                )
        return length * self.out_channels

    def forward(self, x: Tensor) -> Tensor:
        out = x
        for layer in self.layers:
            out = layer.forward(out)
        return ad.flatten(out)


def sample_network(arch: str | ArchSpec, seed: int, dtype=np.float32) -> EmbeddingNet:
    """Draw a fresh, untrained embedding network; bit-identical per seed."""
    return EmbeddingNet(resolve_arch(arch), seed, dtype=dtype)


class Classifier:
    """Embedding net plus a linear classification head."""

    def __init__(self, net: EmbeddingNet, n_samples: int, num_classes: int, head_rng, dtype):
        self.net = net
        dim = net.embedding_len(n_samples)
        self.head_w = _kaiming_uniform(head_rng, (dim, num_classes), dim, dtype)
        self.head_b = Tensor(np.zeros(num_classes, dtype=dtype))
        self.num_classes = num_classes

    @property
    def params(self) -> list[Tensor]:
        return self.net.params + [self.head_w, self.head_b]

    def set_trainable(self, trainable: bool) -> None:
        for p in self.params:
            p.requires_grad = trainable

    def forward(self, x: Tensor) -> Tensor:
        return ad.linear(self.net.forward(x), self.head_w, self.head_b)


def build_classifier(
    arch: str | ArchSpec,
    n_samples: int,
    num_classes: int,
    seed: int,
    dtype=np.float32,
    trainable: bool = True,
) -> Classifier:
    """Embedding preset + linear head, all parameters from one seeded stream."""
    spec = resolve_arch(arch)
    net = EmbeddingNet(spec, seed, dtype=dtype)
    head_rng = np.random.default_rng([seed, 1])
    clf = Classifier(net, n_samples, num_classes, head_rng, np.dtype(dtype))
    clf.set_trainable(trainable)
    return clf
