"""Byte-oriented run-length coding for DRAM-to-SRAM transfers.

The stream is a sequence of ``(value, run)`` byte pairs with ``1 <= run <= 255``.
"""


class RlcError(ValueError):
    """Malformed run-length stream."""


def rlc_encode(data):
    data = bytes(data)
    out = bytearray()
    i = 0
    while i < len(data):
        value = data[i]
        run = 1
        while i + run < len(data) and data[i + run] == value and run < 255:
            run += 1
        out += bytes((value, run))
        i += run
    return bytes(out)


def rlc_decode(encoded):
    encoded = bytes(encoded)
    if len(encoded) % 2:
        raise RlcError("run-length stream has odd length")
    out = bytearray()
    for i in range(0, len(encoded), 2):
        value, run = encoded[i], encoded[i + 1]
        if run == 0:
            raise RlcError(f"zero-length run at offset {i}")
        out += bytes((value,)) * run
    return bytes(out)
