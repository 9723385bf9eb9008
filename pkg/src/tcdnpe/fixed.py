"""Fixed-point word helpers shared by the MAC models, the golden model and the engine.

Operands are signed 16-bit two's complement words. Accumulators are
``ACC_WIDTH`` bits wide; every accumulated value handed across a module
boundary is the signed interpretation of those bits.
"""

WORD_BITS = 16
WORD_MIN = -(1 << (WORD_BITS - 1))
WORD_MAX = (1 << (WORD_BITS - 1)) - 1

# 32-bit full product plus 16 guard bits: 2**16 terms accumulate without wrap.
ACC_WIDTH = 48

# Q8.8 x Q8.8 products carry 16 fraction bits; shifting by 8 returns to Q8.8.
DEFAULT_FRAC_BITS = 8


def check_word(value, bits=WORD_BITS):
    """Raise ``ValueError`` unless ``value`` fits a signed ``bits``-bit word."""
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if not lo <= value <= hi:
        raise ValueError(f"{value} does not fit a signed {bits}-bit word")
    return value


def wrap_signed(value, bits=ACC_WIDTH):
    """Reduce ``value`` modulo ``2**bits`` and return its signed reading."""
    value &= (1 << bits) - 1
    if value >> (bits - 1):
        value -= 1 << bits
    return value


def quantize_relu(acc, shift=DEFAULT_FRAC_BITS):
    """ReLU, then arithmetic right shift by ``shift`` and saturation to 16 bits.

    The result is always in ``[0, WORD_MAX]``; rounding is truncation.
    """
    if acc <= 0:
        return 0
    return min(acc >> shift, WORD_MAX)


def quantize_relu_array(acc, shift=DEFAULT_FRAC_BITS):
    """Vectorised :func:`quantize_relu` over an integer numpy array."""
    import numpy as np

    acc = np.asarray(acc, dtype=np.int64)
    return np.minimum(np.maximum(acc, 0) >> shift, WORD_MAX).astype(np.int64)
