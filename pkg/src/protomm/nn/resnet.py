"""1D residual encoder: 26 weighted layers, global max pooling, unit-norm output.

Layer accounting: one stem convolution, three convolutions per bottleneck
block, and the final embedding projection.  With the default block layout
[2, 2, 2, 2] this gives 1 + 3*8 + 1 = 26 weighted layers.  Shortcuts are
parameter-free (strided subsampling plus channel zero-padding), so the
audit below counts every weighted layer in the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import BatchNorm1d, Conv1d, GlobalMaxPool, L2Normalize, Layer, Linear, ReLU


@dataclass
class EncoderConfig:
    in_channels: int
    kernel_size: int = 11
    stride: int = 2
    embed_dim: int = 512
    block_layout: tuple = (2, 2, 2, 2)
    base_width: int = 32
    dtype: str = "float32"

    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_dict(self):
        d = self.__dict__.copy()
        d["block_layout"] = list(self.block_layout)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["block_layout"] = tuple(d["block_layout"])
        return cls(**d)


class Bottleneck(Layer):
    """1x1 -> KxK (optionally strided) -> 1x1 with a parameter-free shortcut."""

    expansion = 4

    def __init__(self, in_ch, planes, kernel_size, stride, rng, dtype):
        self.in_ch = in_ch
        self.out_ch = planes * self.expansion
        self.stride = stride
        self.conv1 = Conv1d(in_ch, planes, 1, 1, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm1d(planes, dtype=dtype)
        self.conv2 = Conv1d(planes, planes, kernel_size, stride, rng=rng, dtype=dtype)
        self.bn2 = BatchNorm1d(planes, dtype=dtype)
        self.conv3 = Conv1d(planes, self.out_ch, 1, 1, rng=rng, dtype=dtype)
        self.bn3 = BatchNorm1d(self.out_ch, dtype=dtype)
        self.relu = ReLU()
        self._chain = [self.conv1, self.bn1, self.relu, self.conv2, self.bn2, self.relu, self.conv3, self.bn3]

    def params(self):
        for i, sub in enumerate([self.conv1, self.bn1, self.conv2, self.bn2, self.conv3, self.bn3]):
            for name, p in sub.params():
                yield f"{type(sub).__name__.lower()}{i}.{name}", p

    def named_children(self):
        return [
            ("conv1", self.conv1), ("bn1", self.bn1),
            ("conv2", self.conv2), ("bn2", self.bn2),
            ("conv3", self.conv3), ("bn3", self.bn3),
        ]

    def forward(self, x, train):
        caches = []
        h = x
        for sub in self._chain:
            h, c = sub.forward(h, train)
            caches.append(c)
        sc = x[:, :, :: self.stride] if self.stride > 1 else x
        if self.out_ch != self.in_ch:
            padded = np.zeros((sc.shape[0], self.out_ch, sc.shape[2]), dtype=sc.dtype)
            padded[:, : self.in_ch] = sc
            sc = padded
        y = h + sc
        out, relu_cache = self.relu.forward(y, train)
        return out, (caches, relu_cache, x.shape)

    def backward(self, cache, gy):
        caches, relu_cache, x_shape = cache
        g = self.relu.backward(relu_cache, gy)
        gh = g
        for sub, c in zip(reversed(self._chain), reversed(caches)):
            gh = sub.backward(c, gh)
        gsc = g[:, : self.in_ch, :]
        gx = np.zeros(x_shape, dtype=gy.dtype)
        if self.stride > 1:
            gx[:, :, :: self.stride] = gsc
        else:
            gx += gsc
        return gx + gh


class ResNet1d:
    """Modality encoder mapping (B, C, T) windows to unit-norm (B, E) embeddings."""

    def __init__(self, config: EncoderConfig, seed: int):
        n = 2 + 3 * sum(config.block_layout)
        if n != 26:
            raise ValueError(f"block layout {config.block_layout} gives {n} weighted layers, expected 26")
        self.config = config
        dtype = config.np_dtype()
        rng = np.random.default_rng(seed)
        k = config.kernel_size

        self.stem = Conv1d(config.in_channels, config.base_width, k, config.stride, rng=rng, dtype=dtype)
        self.stem_bn = BatchNorm1d(config.base_width, dtype=dtype)
        self.relu = ReLU()

        self.blocks = []
        in_ch = config.base_width
        for stage, n_blocks in enumerate(config.block_layout):
            planes = config.base_width * (2 ** stage)
            for b in range(n_blocks):
                stride = 2 if (b == 0 and stage > 0) else 1
                blk = Bottleneck(in_ch, planes, k, stride, rng=rng, dtype=dtype)
                blk.path = f"stage{stage}.block{b}"
                self.blocks.append(blk)
                in_ch = blk.out_ch

        self.pool = GlobalMaxPool()
        self.fc = Linear(in_ch, config.embed_dim, rng=rng, dtype=dtype)
        self.norm = L2Normalize()

    # -- parameter access ---------------------------------------------------

    def named_params(self):
        out = []
        for name, p in self.stem.params():
            out.append((f"stem.{name}", p))
        for name, p in self.stem_bn.params():
            out.append((f"stem_bn.{name}", p))
        for blk in self.blocks:
            for cname, child in blk.named_children():
                for name, p in child.params():
                    out.append((f"{blk.path}.{cname}.{name}", p))
        for name, p in self.fc.params():
            out.append((f"fc.{name}", p))
        return out

    def bn_layers(self):
        layers = [("stem_bn", self.stem_bn)]
        for blk in self.blocks:
            for cname, child in blk.named_children():
                if isinstance(child, BatchNorm1d):
                    layers.append((f"{blk.path}.{cname}", child))
        return layers

    def weighted_layer_count(self) -> int:
        n = 1  # stem
        for blk in self.blocks:
            n += sum(1 for _, c in blk.named_children() if isinstance(c, Conv1d))
        return n + 1  # embedding projection

    def param_count(self) -> int:
        return sum(p.data.size for _, p in self.named_params())

    # -- forward / backward -------------------------------------------------

    def forward(self, x: np.ndarray, train: bool = False):
        """x: (B, C, T).  Returns (embeddings (B, E), cache)."""
        if x.shape[1] != self.config.in_channels:
            raise ValueError(
                f"expected {self.config.in_channels} input channels, got {x.shape[1]}"
            )
        if x.shape[2] < 1:
            raise ValueError("input too short: need at least 1 timestep")
        x = np.ascontiguousarray(x, dtype=self.config.np_dtype())
        caches = []
        h, c = self.stem.forward(x, train)
        caches.append(c)
        h, c = self.stem_bn.forward(h, train)
        caches.append(c)
        h, c = self.relu.forward(h, train)
        caches.append(c)
        for blk in self.blocks:
            h, c = blk.forward(h, train)
            caches.append(c)
        h, c = self.pool.forward(h, train)
        caches.append(c)
        h, c = self.fc.forward(h, train)
        caches.append(c)
        emb, c = self.norm.forward(h, train)
        caches.append(c)
        return emb, caches

    def encode(self, x: np.ndarray) -> np.ndarray:
        """Inference-mode embedding (running BN statistics, no caches kept)."""
        emb, _ = self.forward(x, train=False)
        return emb

    def backward(self, caches, gemb):
        g = self.norm.backward(caches[-1], gemb)
        g = self.fc.backward(caches[-2], g)
        g = self.pool.backward(caches[-3], g)
        body = caches[3:-3]
        for blk, c in zip(reversed(self.blocks), reversed(body)):
            g = blk.backward(c, g)
        g = self.relu.backward(caches[2], g)
        g = self.stem_bn.backward(caches[1], g)
        g = self.stem.backward(caches[0], g)
        return g

    def zero_grad(self):
        for _, p in self.named_params():
            p.grad[...] = 0
