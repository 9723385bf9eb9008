"""W-Mem / FM-Mem images, data layout and access counting.

Weights for a group of N neurons are packed so that one W-Mem row holds the
N weights of ``row_words // N`` consecutive input neurons; one row read
therefore feeds the array for that many cycles. Feature memory rows are
split into B equal segments, one per batch, each holding ``row_words // B``
consecutive features of its batch.
"""

from dataclasses import dataclass
from math import ceil

import numpy as np

from .rlc import rlc_encode


class LayerDoesNotFit(ValueError):
    """A layer's weights or features exceed the on-chip memory."""


@dataclass(frozen=True)
class MemGeometry:
    """Row widths (16-bit words) and depths of W-Mem and each FM-Mem.

    Defaults: 256-byte W-Mem rows, 512 KByte W-Mem, 128-byte FM-Mem rows and
    two 64 KByte FM-Mems.
    """

    w_mem_row_words: int = 128
    fm_mem_row_words: int = 64
    w_mem_rows: int = 512 * 1024 // 256
    fm_mem_rows: int = 64 * 1024 // 128

    def __post_init__(self):
        if min(self.w_mem_row_words, self.fm_mem_row_words, self.w_mem_rows, self.fm_mem_rows) < 1:
            raise ValueError("memory geometry fields must be >= 1")


class MemImage:
    """Word-addressable memory with row-granular reads and word-granular writes."""

    def __init__(self, rows, row_words, name=""):
        self.name = name
        self.words = np.zeros((rows, row_words), dtype=np.int64)
        self.read_count = 0
        self.write_count = 0
        self.word_write_count = 0
        self.used_rows = 0

    @property
    def rows(self):
        return self.words.shape[0]

    @property
    def row_words(self):
        return self.words.shape[1]

    def read_row(self, row):
        self.read_count += 1
        return self.words[row].copy()

    def write_row(self, row, values, start=0):
        """Write ``values`` into ``row`` from word ``start``; other words keep their value."""
        values = np.asarray(values, dtype=np.int64)
        self.words[row, start:start + len(values)] = values
        self.write_count += 1
        self.word_write_count += len(values)
        self.used_rows = max(self.used_rows, row + 1)

    def write_word(self, row, word, value):
        self.words[row, word] = value
        self.write_count += 1
        self.word_write_count += 1
        self.used_rows = max(self.used_rows, row + 1)

    def peek(self, row, word):
        """Uncounted debug read."""
        return int(self.words[row, word])

    def hexdump(self, rows=None):
        """One line per row, words as 4-digit two's complement hex."""
        rows = self.used_rows if rows is None else rows
        return "\n".join(" ".join(f"{int(w) & 0xFFFF:04x}" for w in self.words[r]) for r in range(rows))


def inputs_per_row(n, geom):
    if n > geom.w_mem_row_words:
        raise LayerDoesNotFit(f"N={n} weights do not fit a {geom.w_mem_row_words}-word W-Mem row")
    return geom.w_mem_row_words // n


def weight_block_rows(inputs, n, geom):
    """Rows occupied by one N-neuron weight group: ceil(I / (row_words / N))."""
    return ceil(inputs / inputs_per_row(n, geom))


class WeightLayout:
    """W-Mem image for one layer, filled block by block.

    A block holds the weights of neurons ``[start, start + count)`` in slots
    ``n`` words wide; blocks are placed in consecutive rows as they are
    requested and reused while resident. With ``streaming`` set, a block
    that no longer fits flushes the memory and is loaded from row 0, so a
    layer larger than W-Mem is fetched from DRAM in pieces; otherwise it is
    an error. ``rlc_bytes`` accumulates the run-length-coded size of every
    block transferred in.
    """

    def __init__(self, weights, geom, image=None, streaming=False):
        self.weights = np.asarray(weights, dtype=np.int64)
        self.geom = geom
        self.image = image or MemImage(geom.w_mem_rows, geom.w_mem_row_words, "W-Mem")
        self.streaming = streaming
        self.blocks = {}
        self.next_row = 0
        self.rlc_bytes = 0
        self.flushes = 0

    @property
    def inputs(self):
        return self.weights.shape[0]

    def block(self, start, count, n):
        """First row of the block for neurons ``[start, start+count)`` with slot width ``n``."""
        key = (start, count, n)
        if key in self.blocks:
            return self.blocks[key]
        if count > n:
            raise ValueError("block holds more neurons than its slot width")
        ipr = inputs_per_row(n, self.geom)
        rows = ceil(self.inputs / ipr)
        if self.next_row + rows > self.image.rows:
            if not self.streaming or rows > self.image.rows:
                raise LayerDoesNotFit(
                    f"weights need {self.next_row + rows} W-Mem rows, only {self.image.rows} available")
            self.blocks.clear()
            self.next_row = 0
            self.flushes += 1
        base = self.next_row
        cols = self.weights[:, start:start + count]
        self.rlc_bytes += len(rlc_encode(cols.astype("<i2").tobytes()))
        for r in range(rows):
            line = np.zeros(self.geom.w_mem_row_words, dtype=np.int64)
            for s, i in enumerate(range(r * ipr, min(self.inputs, (r + 1) * ipr))):
                line[s * n:s * n + count] = cols[i]
            self.image.write_row(base + r, line)
        self.blocks[key] = base
        self.next_row += rows
        return base

    def read_block(self, start, count, n):
        """Uncounted inverse of :meth:`block`: the ``(I, count)`` weight slice."""
        base = self.blocks[(start, count, n)]
        ipr = inputs_per_row(n, self.geom)
        out = np.zeros((self.inputs, count), dtype=np.int64)
        for i in range(self.inputs):
            r, s = divmod(i, ipr)
            out[i] = self.image.words[base + r, s * n:s * n + count]
        return out


def layout_weights(weights, n, geom):
    """W-Mem image of a whole ``(I, U)`` layer for slot width ``n``.

    Neuron group ``g`` (neurons ``[g*n, g*n+n)``) occupies rows
    ``[g*R, (g+1)*R)`` with ``R = ceil(I / (row_words // n))``.
    """
    layout = WeightLayout(weights, geom)
    units = layout.weights.shape[1]
    for start in range(0, units, n):
        layout.block(start, min(n, units - start), n)
    return layout


def read_weights(layout, n):
    """Reassemble the full weight matrix from a :func:`layout_weights` image."""
    units = layout.weights.shape[1]
    parts = [layout.read_block(s, min(n, units - s), n) for s in range(0, units, n)]
    return np.concatenate(parts, axis=1)


def segment_words(batches, geom):
    """Feature words per batch segment of an FM-Mem row."""
    seg = geom.fm_mem_row_words // batches
    if seg < 1:
        raise LayerDoesNotFit(f"{batches} batches do not fit a {geom.fm_mem_row_words}-word FM-Mem row")
    return seg


def feature_rows(features, batches, geom):
    """Rows needed for ``features`` values per batch: ceil(I / (W_FM / B))."""
    return ceil(features / segment_words(batches, geom))


def feature_address(batch, index, batches, geom):
    """``(row, word)`` of feature ``index`` of ``batch``."""
    seg = segment_words(batches, geom)
    row, off = divmod(index, seg)
    return row, batch * seg + off


def check_feature_fit(features, batches, geom):
    rows = feature_rows(features, batches, geom)
    if rows > geom.fm_mem_rows:
        raise LayerDoesNotFit(
            f"{batches} batches of {features} features need {rows} FM-Mem rows, "
            f"only {geom.fm_mem_rows} available; the feature memory must hold a full layer")
    return rows


def layout_features(batch_vectors, geom, image=None):
    """Write ``(B, I)`` feature vectors into an FM-Mem image, one segment per batch."""
    data = np.asarray(batch_vectors, dtype=np.int64)
    if data.ndim == 1:
        data = data[None, :]
    batches, features = data.shape
    rows = check_feature_fit(features, batches, geom)
    seg = segment_words(batches, geom)
    image = image or MemImage(geom.fm_mem_rows, geom.fm_mem_row_words, "FM-Mem")
    for r in range(rows):
        line = np.zeros(geom.fm_mem_row_words, dtype=np.int64)
        chunk = data[:, r * seg:(r + 1) * seg]
        for b in range(batches):
            line[b * seg:b * seg + chunk.shape[1]] = chunk[b]
        image.write_row(r, line)
    return image


def read_features(image, batches, features, geom):
    """Uncounted inverse of :func:`layout_features`."""
    seg = segment_words(batches, geom)
    out = np.zeros((batches, features), dtype=np.int64)
    for i in range(features):
        r, off = divmod(i, seg)
        for b in range(batches):
            out[b, i] = image.words[r, b * seg + off]
    return out


def max_batches(layer_sizes, geom):
    """Largest batch count B* whose features fit FM-Mem for every layer (0 if none)."""
    best = 0
    for b in range(1, geom.fm_mem_row_words + 1):
        try:
            for size in layer_sizes:
                check_feature_fit(size, b, geom)
        except LayerDoesNotFit:
            break
        best = b
    return best
