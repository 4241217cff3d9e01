"""Time-axis length arithmetic for a VGG + pyramid BLSTM encoder.

Only the temporal dimension is tracked. Convolutions always use floor
rounding; pooling rounding is configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class Layer:
    kind: str  # "conv" or "pool"
    kernel: int = 3
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kind not in ("conv", "pool"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError(f"invalid layer geometry {self}")


CONV3 = Layer("conv", kernel=3, stride=1, padding=1)
POOL3_S2 = Layer("pool", kernel=3, stride=2, padding=0)


@dataclass(frozen=True)
class EncoderSpec:
    layers: Tuple[Layer, ...] = (CONV3, CONV3, POOL3_S2, CONV3, CONV3, POOL3_S2)
    pool_rounding: str = "ceil"
    pblstm_subsample: Tuple[int, ...] = (1, 2, 2, 1)

    def __post_init__(self):
        if self.pool_rounding not in ("floor", "ceil"):
            raise ValueError("pool_rounding must be 'floor' or 'ceil'")
        if any(f < 1 for f in self.pblstm_subsample):
            raise ValueError("pBLSTM subsampling factors must be >= 1")


def vgg_pblstm(pool_rounding: str = "ceil") -> EncoderSpec:
    return EncoderSpec(pool_rounding=pool_rounding)


def pblstm_only() -> EncoderSpec:
    return EncoderSpec(layers=())


ENCODERS = {"vgg-pblstm": vgg_pblstm, "pblstm": pblstm_only}


def layer_out_len(length: int, kernel: int, stride: int, padding: int = 0, rounding: str = "floor") -> int:
    """Output length of a 1-D sliding-window layer, clamped at 0."""
    if length < 0:
        raise ValueError("length must be >= 0")
    span = length + 2 * padding - kernel
    if rounding == "floor":
        if span < 0:
            return 0
        return span // stride + 1
    if rounding == "ceil":
        return max(0, -(-span // stride) + 1)
    raise ValueError(f"unknown rounding {rounding!r}")


def encoder_output_length(length: int, spec: EncoderSpec = EncoderSpec()) -> int:
    for layer in spec.layers:
        rounding = spec.pool_rounding if layer.kind == "pool" else "floor"
        length = layer_out_len(length, layer.kernel, layer.stride, layer.padding, rounding)
    for factor in spec.pblstm_subsample:
        length = -(-length // factor)
    return length


def total_subsample_factor(spec: EncoderSpec = EncoderSpec()) -> int:
    return math.prod(layer.stride for layer in spec.layers) * math.prod(spec.pblstm_subsample)
