"""Fixed-point primitives shared by the quantized network.

All tensors are symmetric signed 8-bit with zero point 0. Layer accumulation
happens in 32 bits; results return to 8 bits through a rounding right shift
(add half, shift, saturate), optionally after an integer scale multiplier.
Negative values shift arithmetically, so rounding is half toward +inf
everywhere, matching what a hardware barrel shifter with an added offset
produces.

Sigmoid and tanh for the recurrent head come from 256-entry tables indexed by
an int8 whose value q represents q/16, covering [-8, 8). Sigmoid entries are
round(256 * sigmoid(x)) in [0, 256]; tanh entries are round(127 * tanh(x)) in
[-127, 127]. Multiplying by a sigmoid entry therefore scales by 256, undone
with a rounding shift by 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

I8_MIN = -128
I8_MAX = 127

# Age offsets enter the network scaled by 1/64 so the default 5000 us window
# maps inside int8 range.
DT_SHIFT = 6

LUT_SIZE = 256
LUT_INPUT_STEP = 16  # table index q encodes q / 16


def _build_luts() -> tuple[np.ndarray, np.ndarray]:
    xs = (np.arange(LUT_SIZE) - 128) / LUT_INPUT_STEP
    sig = np.floor(256.0 / (1.0 + np.exp(-xs)) + 0.5).astype(np.int32)
    tanh = np.floor(127.0 * np.tanh(xs) + 0.5).astype(np.int32)
    return sig, tanh


SIGMOID_LUT, TANH_LUT = _build_luts()


def rounding_rshift(value, shift: int):
    """Shift right with rounding half toward +inf. Works on ints and arrays."""
    if shift < 0:
        raise ValidationError("shift must be non-negative")
    if shift == 0:
        return value
    half = 1 << (shift - 1)
    if isinstance(value, np.ndarray):
        return (value.astype(np.int64) + half) >> shift
    return (int(value) + half) >> shift


def saturate_i8(value):
    """Clamp to [-128, 127]; returns int8 arrays for array input."""
    if isinstance(value, np.ndarray):
        return np.clip(value, I8_MIN, I8_MAX).astype(np.int8)
    return max(I8_MIN, min(I8_MAX, int(value)))


def requantize(acc, scale_num: int, scale_shift: int):
    """32-bit accumulator back to int8: scale, rounding shift, saturate."""
    if isinstance(acc, np.ndarray):
        scaled = acc.astype(np.int64) * scale_num
    else:
        scaled = int(acc) * scale_num
    out = saturate_i8(rounding_rshift(scaled, scale_shift))
    # Saturation guarantees the 8-bit envelope; keep the check explicit.
    if isinstance(out, np.ndarray):
        assert out.dtype == np.int8
    else:
        assert I8_MIN <= out <= I8_MAX
    return out


def quantize_dt(dt_us) -> np.ndarray | int:
    """Microsecond age to the int8 feature scale (1/64 us, saturated)."""
    return saturate_i8(rounding_rshift(dt_us, DT_SHIFT))


def lut_sigmoid(index):
    """Table lookup on a saturated int8 index; returns values in [0, 256]."""
    idx = saturate_i8(index)
    if isinstance(idx, np.ndarray):
        return SIGMOID_LUT[idx.astype(np.int32) + 128]
    return int(SIGMOID_LUT[idx + 128])


def lut_tanh(index):
    idx = saturate_i8(index)
    if isinstance(idx, np.ndarray):
        return TANH_LUT[idx.astype(np.int32) + 128]
    return int(TANH_LUT[idx + 128])


def div_round_half_away(total: int, count: int) -> int:
    """Integer mean with ties away from zero; used for signed channel offsets."""
    if count <= 0:
        raise ValidationError("count must be positive")
    if total >= 0:
        return (total + count // 2) // count
    return -((-total + count // 2) // count)


def div_round_half_up_nonneg(total: int, count: int) -> int:
    """Integer mean rounding half up; operands must be non-negative."""
    if count <= 0:
        raise ValidationError("count must be positive")
    if total < 0:
        raise ValidationError("total must be non-negative")
    return (total + count // 2) // count


@dataclass(eq=False)
class QuantTensor:
    """Int8 data plus the scale metadata that maps it back to real values.

    ``dequantize`` returns ``scale * (q - zero_point)``; the inference path
    itself never leaves integer arithmetic.
    """

    data: np.ndarray
    scale: float = 1.0
    zero_point: int = 0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != np.int8:
            if (data < I8_MIN).any() or (data > I8_MAX).any():
                raise ValidationError("values exceed int8 range")
            data = data.astype(np.int8)
        if self.scale <= 0 or not math.isfinite(self.scale):
            raise ValidationError("scale must be a positive finite number")
        if self.zero_point != 0:
            raise ValidationError("symmetric quantization requires zero_point 0")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def dequantize(self) -> np.ndarray:
        return self.scale * (self.data.astype(np.float64) - self.zero_point)

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantTensor):
            return NotImplemented
        return (self.scale == other.scale
                and self.zero_point == other.zero_point
                and np.array_equal(self.data, other.data))
