"""Bit-level models of the temporal-carry-deferring MAC and a conventional MAC.

Every signal is a *bit plane*: a Python ``int`` whose bit ``k`` holds the
value of that wire in lane ``k``. A single MAC is the one-lane case; an
array of PEs, or ten thousand independent test streams, is simulated by
widening the planes. All gate functions (AND/XOR/OR) therefore operate on
every lane at once, and the compressor tree, generate/propagate stage and
final carry-propagate adder are written as the gates they stand for.

Per cycle in carry-deferring mode (CDM) the MAC

1. forms partial-product columns from the operands (DRU),
2. merges the previous output register (ORU) as one more row and injects
   the deferred carries (CBU) one column to the left,
3. reduces every column to at most two bits with hamming-weight
   compressors (CEL),
4. keeps ``P = A ^ B`` in the ORU and ``G = A & B`` in the CBU (GEN).

The carry chain (PCPA) is closed once, in carry-propagating mode (CPM),
after the last operand pair.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fixed import ACC_WIDTH, WORD_BITS, wrap_signed


class MacMode(Enum):
    CDM = "cdm"
    CPM = "cpm"


@dataclass(frozen=True)
class MacGeometry:
    """Operand width and accumulator width of a MAC instance."""

    width: int = WORD_BITS
    acc_width: int = ACC_WIDTH

    def __post_init__(self):
        if self.width < 2:
            raise ValueError("operand width must be at least 2 bits")
        if not 2 * self.width <= self.acc_width <= 62:
            raise ValueError("acc_width must hold a full product and fit in int64")

    @property
    def word_min(self):
        return -(1 << (self.width - 1))

    @property
    def word_max(self):
        return (1 << (self.width - 1)) - 1


DEFAULT_GEOMETRY = MacGeometry()


# --------------------------------------------------------------------------
# Plane packing
# --------------------------------------------------------------------------

def to_planes(values, nbits):
    """Transpose integer lane values into bit planes.

    ``values`` has shape ``(steps, lanes)`` (or ``(lanes,)``); the result is
    a list over steps of ``nbits`` plane ints (or a single list for 1-D
    input). Negative values are taken in ``nbits``-bit two's complement.
    """
    v = np.asarray(values, dtype=np.int64)
    flat = v.ndim == 1
    if flat:
        v = v[None, :]
    steps = v.shape[0]
    out = [[0] * nbits for _ in range(steps)]
    for j in range(nbits):
        packed = np.packbits(((v >> j) & 1).astype(np.uint8), axis=-1, bitorder="little")
        for s in range(steps):
            out[s][j] = int.from_bytes(packed[s].tobytes(), "little")
    return out[0] if flat else out


def from_planes(planes, lanes):
    """Inverse of :func:`to_planes` for one step: unsigned lane values."""
    nbytes = (lanes + 7) // 8
    acc = np.zeros(lanes, dtype=np.int64)
    for j, plane in enumerate(planes):
        if not plane:
            continue
        raw = np.frombuffer(plane.to_bytes(nbytes, "little"), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:lanes].astype(np.int64)
        acc |= bits << j
    return acc


def int_to_bits(value, nbits):
    """Single-lane planes of ``value`` (LSB first)."""
    return [(value >> i) & 1 for i in range(nbits)]


def bits_to_int(bits):
    return sum(b << i for i, b in enumerate(bits))


def _signed_lanes(unsigned, bits):
    unsigned = unsigned & ((1 << bits) - 1)
    return np.where(unsigned >> (bits - 1) == 1, unsigned - (1 << bits), unsigned)


# --------------------------------------------------------------------------
# Gates
# --------------------------------------------------------------------------

def full_adder(a, b, c):
    t = a ^ b
    return t ^ c, (a & b) | (t & c)


def hwc(bits):
    """Hamming-weight compressor C_HW(m:n).

    Returns the ``n = ceil(log2(m + 1))`` output planes, LSB first. The
    complete compressors CC(3:2) and CC(7:3) are full-adder networks; any
    other ``m`` is a ripple counter of half adders.
    """
    m = len(bits)
    if m == 0:
        raise ValueError("a compressor needs at least one input bit")
    if m == 1:
        return [bits[0]]
    if m == 3:
        return list(full_adder(*bits))
    if m == 7:
        s1, c1 = full_adder(bits[0], bits[1], bits[2])
        s2, c2 = full_adder(bits[3], bits[4], bits[5])
        s3, c3 = full_adder(s1, s2, bits[6])
        s4, c4 = full_adder(c1, c2, c3)
        return [s3, s4, c4]
    out = [0] * m.bit_length()
    for x in bits:
        carry = x
        for k in range(len(out)):
            if not carry:
                break
            out[k], carry = out[k] ^ carry, out[k] & carry
    return out


def _partition(m):
    """Greedy CC(7:3) then CC(3:2) split of an ``m``-bit column.

    Returns ``(groups, leftover)``: compressor sizes and the 0-2 remaining
    bits. One remaining bit is a wire; two feed a half adder C(2:2).
    """
    groups = [7] * (m // 7)
    rest = m % 7
    while rest >= 3:
        groups.append(3)
        rest -= 3
    return groups, rest


def reduce_columns(columns, injected, acc_width):
    """Compress plane columns until every column holds at most two bits.

    ``injected`` maps column index to a carry plane that must join that
    column. A carry enters the first layer in which its column ends in an
    incomplete C(2:2), completing it into a CC(3:2). Carries that never find
    such a slot are appended once the tree would otherwise stop, adding
    compressors as needed.

    Returns ``(row_a, row_b, layers)`` with rows as plane lists.
    """
    cols = [list(c) for c in columns]
    pending = {p: bit for p, bit in injected.items() if p < acc_width}
    layers = 0
    while True:
        if max(len(c) for c in cols) <= 2:
            if not pending:
                break
            for p, bit in pending.items():
                cols[p].append(bit)
            pending = {}
            continue
        nxt = [[] for _ in range(acc_width)]
        for p, col in enumerate(cols):
            groups, rest = _partition(len(col))
            pos = 0
            for g in groups:
                for k, out in enumerate(hwc(col[pos:pos + g])):
                    if p + k < acc_width:
                        nxt[p + k].append(out)
                pos += g
            wires = col[pos:]
            if rest == 2:
                # incomplete C(2:2); a pending carry completes it into CC(3:2)
                if p in pending:
                    s, c = full_adder(wires[0], wires[1], pending.pop(p))
                else:
                    s, c = wires[0] ^ wires[1], wires[0] & wires[1]
                nxt[p].append(s)
                if p + 1 < acc_width:
                    nxt[p + 1].append(c)
            else:
                nxt[p].extend(wires)
        cols = nxt
        layers += 1
    row_a = [c[0] if c else 0 for c in cols]
    row_b = [c[1] if len(c) > 1 else 0 for c in cols]
    return row_a, row_b, layers


def gen_planes(row_a, row_b):
    """GEN layer on planes: propagate and generate signals per bit."""
    return [a ^ b for a, b in zip(row_a, row_b)], [a & b for a, b in zip(row_a, row_b)]


def pcpa_planes(p, g):
    """Ripple carry-propagate adder computing ``P + (G << 1)`` on planes."""
    out = []
    carry = 0
    shifted = [0] + list(g[:-1])
    for x, y in zip(p, shifted):
        s, carry = full_adder(x, y, carry)
        out.append(s)
    return out


# --------------------------------------------------------------------------
# Data reshape unit
# --------------------------------------------------------------------------

def _steer_operands(a, b, width):
    """Sign pre-processing: return ``(multiplier, multiplicand, negative)``.

    A negative operand becomes the multiplier. If both are negative both are
    negated first, so the multiplicand is always in ``[0, 2**(width-1)]``.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    both = (a < 0) & (b < 0)
    a = np.where(both, -a, a)
    b = np.where(both, -b, b)
    swap = a < 0
    mult = np.where(swap, a, b)
    mcand = np.where(swap, b, a)
    return mult & ((1 << width) - 1), mcand, mult < 0


def operand_planes(a, b, geometry=DEFAULT_GEOMETRY):
    """Steer lane operands and transpose them to planes.

    ``a`` and ``b`` have shape ``(steps, lanes)``. Returns a list over steps
    of ``(multiplier_planes, multiplicand_planes, negative_plane)``.
    """
    w = geometry.width
    mult, mcand, neg = _steer_operands(a, b, w)
    mp = to_planes(mult, w)
    cp = to_planes(mcand, w)
    np_ = to_planes(neg.astype(np.int64), 1)
    return [(mp[s], cp[s], np_[s][0]) for s in range(len(mp))]


def dru_columns(mult, mcand, neg, ones, geometry=DEFAULT_GEOMETRY):
    """Partial-product columns for one cycle.

    Rows ``0 .. width-2`` are ``mult_i AND mcand``. The top row carries the
    multiplier's sign weight: when the multiplier is negative it is the
    two's complement of the shifted multiplicand (inverted bits plus a
    correction bit at column ``width-1``); when a negated multiplier equals
    ``2**(width-1)`` it is the plain shifted multiplicand.
    """
    w, acc = geometry.width, geometry.acc_width
    cols = [[] for _ in range(acc)]
    for i in range(w - 1):
        mi = mult[i]
        for j in range(w):
            cols[i + j].append(mi & mcand[j])
    pos_top = mult[w - 1] & (neg ^ ones)
    for j in range(acc - (w - 1)):
        cj = mcand[j] if j < w else 0
        cols[w - 1 + j].append((neg & (cj ^ ones)) | (pos_top & cj))
    cols[w - 1].append(neg)
    return cols


def gen_partial_products(a, b, geometry=DEFAULT_GEOMETRY):
    """Bit columns whose weighted count equals ``a * b`` modulo ``2**acc_width``."""
    _check_operand(a, geometry)
    _check_operand(b, geometry)
    (mult, mcand, neg), = operand_planes([[a]], [[b]], geometry)
    return dru_columns(mult, mcand, neg, 1, geometry)


def columns_value(columns, acc_width=None):
    """Integer value of bit columns: sum over positions of ones * 2**p."""
    total = sum(sum(col) << p for p, col in enumerate(columns))
    if acc_width is not None:
        total &= (1 << acc_width) - 1
    return total


def _check_operand(v, geometry):
    if not geometry.word_min <= v <= geometry.word_max:
        raise ValueError(f"operand {v} outside signed {geometry.width}-bit range")


# --------------------------------------------------------------------------
# Single-lane operations on bit vectors (ints)
# --------------------------------------------------------------------------

def compress_cel(columns, injected_carries, acc_width=ACC_WIDTH):
    """Reduce single-lane bit columns plus injected carries to two rows.

    ``injected_carries[p]`` is a bit that joins column ``p``. Returns
    ``(row_a, row_b, layers)`` with the rows as integers.
    """
    if len(injected_carries) != acc_width:
        raise ValueError("injected_carries must have acc_width entries")
    cols = [list(c) for c in columns] + [[] for _ in range(acc_width - len(columns))]
    inj = {p: bit for p, bit in enumerate(injected_carries) if bit}
    row_a, row_b, layers = reduce_columns(cols[:acc_width], inj, acc_width)
    return bits_to_int(row_a), bits_to_int(row_b), layers


def gen_stage(row_a, row_b):
    """Propagate ``P = A ^ B`` and generate ``G = A & B`` (G_i weighs 2**(i+1))."""
    return row_a ^ row_b, row_a & row_b


def pcpa(p, g, acc_width=ACC_WIDTH):
    """Close the carry chain: ``(P + (G << 1)) mod 2**acc_width``."""
    return bits_to_int(pcpa_planes(int_to_bits(p, acc_width), int_to_bits(g, acc_width)))


# --------------------------------------------------------------------------
# MAC state machines
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TcdMacState:
    """ORU and CBU contents of one TCD-MAC.

    CBU bit ``i`` is a deferred generate signal and weighs ``2**(i+1)``, so
    the accumulated value is ``oru + 2 * cbu`` modulo ``2**acc_width``.
    ``result`` is set only by the CPM step that closed a stream.
    """

    oru: int = 0
    cbu: int = 0
    cycle_count: int = 0
    result: int | None = None

    def value(self, acc_width=ACC_WIDTH):
        return wrap_signed(self.oru + (self.cbu << 1), acc_width)


class TcdMacArray:
    """``lanes`` TCD-MACs stepped in lock-step with per-lane clock gating."""

    def __init__(self, lanes, geometry=DEFAULT_GEOMETRY):
        if lanes < 1:
            raise ValueError("need at least one lane")
        self.lanes = lanes
        self.geometry = geometry
        self.ones = (1 << lanes) - 1
        self.oru = [0] * geometry.acc_width
        self.cbu = [0] * geometry.acc_width
        self.cycles = np.zeros(lanes, dtype=np.int64)
        self.last_layers = 0

    def cdm(self, a, b, active=None):
        """One carry-deferring cycle on lane operand arrays ``a`` and ``b``."""
        (planes,) = operand_planes(np.asarray(a)[None, :], np.asarray(b)[None, :], self.geometry)
        self.cdm_planes(*planes, active=active)

    def cdm_planes(self, mult, mcand, neg, active=None):
        """CDM cycle from pre-steered operand planes (see :func:`operand_planes`).

        ``active`` is a plane of lanes that are clocked; others hold state.
        """
        acc = self.geometry.acc_width
        cols = dru_columns(mult, mcand, neg, self.ones, self.geometry)
        for p in range(acc):
            cols[p].append(self.oru[p])
        injected = {p + 1: self.cbu[p] for p in range(acc - 1)}
        row_a, row_b, self.last_layers = reduce_columns(cols, injected, acc)
        p_new, g_new = gen_planes(row_a, row_b)
        self._commit(p_new, g_new, active)

    def cpm(self, active=None):
        """Carry-propagating cycle: return signed lane values and clear the state."""
        acc = self.geometry.acc_width
        total = pcpa_planes(self.oru, self.cbu)
        values = _signed_lanes(from_planes(total, self.lanes), acc)
        self._commit([0] * acc, [0] * acc, active)
        return values

    def values(self):
        """Accumulated value of every lane without closing the carry chain."""
        oru = from_planes(self.oru, self.lanes)
        cbu = from_planes(self.cbu, self.lanes)
        return _signed_lanes(oru + (cbu << 1), self.geometry.acc_width)

    def _commit(self, oru, cbu, active):
        if active is None or active == self.ones:
            self.oru, self.cbu = oru, cbu
            self.cycles += 1
            return
        hold = active ^ self.ones
        self.oru = [(n & active) | (o & hold) for n, o in zip(oru, self.oru)]
        self.cbu = [(n & active) | (o & hold) for n, o in zip(cbu, self.cbu)]
        self.cycles += from_planes([active], self.lanes)


def tcd_mac_step(state, a, b, mode, geometry=DEFAULT_GEOMETRY):
    """Advance one TCD-MAC by one cycle.

    CDM folds ``a * b`` into the state. CPM ignores the operands, closes the
    carry chain and returns a cleared state whose ``result`` holds the
    signed accumulated value.
    """
    acc = geometry.acc_width
    mac = TcdMacArray(1, geometry)
    mac.oru = int_to_bits(state.oru, acc)
    mac.cbu = int_to_bits(state.cbu, acc)
    if mode is MacMode.CPM:
        (value,) = mac.cpm()
        return TcdMacState(0, 0, state.cycle_count + 1, int(value))
    _check_operand(a, geometry)
    _check_operand(b, geometry)
    mac.cdm([a], [b])
    return TcdMacState(bits_to_int(mac.oru), bits_to_int(mac.cbu), state.cycle_count + 1)


def tcd_mac_stream(pairs, geometry=DEFAULT_GEOMETRY):
    """Dot product of ``pairs`` on one TCD-MAC: ``(value, cycles)``.

    N pairs take N CDM cycles plus one CPM cycle; an empty stream takes none.
    """
    values, cycles = tcd_mac_streams([pairs], geometry)
    return int(values[0]), int(cycles[0])


def tcd_mac_streams(streams, geometry=DEFAULT_GEOMETRY, chunk=256):
    """Run independent streams on one lane each; returns ``(values, cycles)`` arrays.

    Shorter streams are clock-gated once exhausted; every lane is closed by
    a single CPM cycle (lanes with empty streams are never clocked).
    """
    lanes = len(streams)
    lengths = np.array([len(s) for s in streams], dtype=np.int64)
    if lanes == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    for s in streams:
        for a, b in s:
            _check_operand(a, geometry)
            _check_operand(b, geometry)
    steps = int(lengths.max())
    mac = TcdMacArray(lanes, geometry)
    for start in range(0, steps, chunk):
        stop = min(steps, start + chunk)
        a = np.zeros((stop - start, lanes), dtype=np.int64)
        b = np.zeros_like(a)
        for lane, s in enumerate(streams):
            seg = s[start:stop]
            if len(seg):
                arr = np.asarray(seg, dtype=np.int64)
                a[: len(seg), lane] = arr[:, 0]
                b[: len(seg), lane] = arr[:, 1]
        active = to_planes((np.arange(start, stop)[:, None] < lengths[None, :]).astype(np.int64), 1)
        for planes, act in zip(operand_planes(a, b, geometry), active):
            mac.cdm_planes(*planes, active=act[0])
    nonempty = to_planes((lengths > 0).astype(np.int64), 1)[0]
    values = mac.cpm(active=nonempty)
    return np.where(lengths > 0, values, 0), mac.cycles.copy()


def conv_mac_stream(pairs, geometry=DEFAULT_GEOMETRY):
    """Behavioural conventional MAC: exact running sum, one cycle per pair."""
    total = 0
    for a, b in pairs:
        _check_operand(a, geometry)
        _check_operand(b, geometry)
        total = wrap_signed(total + a * b, geometry.acc_width)
    return total, len(pairs)
