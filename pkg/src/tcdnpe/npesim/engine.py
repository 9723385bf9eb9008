"""Cycle-level execution of mapper schedules on the TCD-NPE.

The controller interprets schedule events in order. For every roll it
drives the active PEs through one operand pair per cycle, fetching W-Mem
and FM-Mem rows into single-row buffers only when the buffer runs dry,
then closes each neuron (one CPM cycle for TCD-MACs), passes it through
ReLU/quantisation and word-writes it to the other feature memory.
"""

from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

from ..bitmac import DEFAULT_GEOMETRY, TcdMacArray, operand_planes
from ..fixed import DEFAULT_FRAC_BITS, quantize_relu_array
from ..mapper import ArrayShape, schedule
from .cast import make_cast_pattern
from .memory import (
    LayerDoesNotFit,
    MemGeometry,
    MemImage,
    WeightLayout,
    check_feature_fit,
    feature_address,
    inputs_per_row,
    layout_features,
    max_batches,
    read_features,
    segment_words,
)
from .rlc import rlc_encode


class Dataflow(str, Enum):
    OS_TCD = "os-tcd"
    OS_CONV = "os-conv"
    NLR = "nlr"
    RNA = "rna"

    @property
    def uses_tcd(self):
        return self is Dataflow.OS_TCD


class ScheduleMismatch(ValueError):
    """Schedule events do not match the layer being executed."""


@dataclass
class EngineCounters:
    """Activity counts of one layer (or a sum of layers)."""

    total_cycles: int = 0
    pe_active_cycles: int = 0
    w_mem_reads: int = 0
    fm_mem_reads: int = 0
    fm_mem_writes: int = 0
    rlc_bytes_in: int = 0
    w_mem_writes: int = 0
    w_mem_reads_unbuffered: int = 0
    fm_mem_reads_unbuffered: int = 0
    rolls: int = 0
    mac_ops: int = 0
    pe_count: int = 0
    layer_problems: tuple = ()
    dataflow: str = ""

    def __add__(self, other):
        merged = {}
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if f.name == "pe_count":
                merged[f.name] = max(a, b)
            elif f.name == "dataflow":
                if a and b and a != b:
                    raise ValueError(f"cannot add counters of dataflows {a} and {b}")
                merged[f.name] = a or b
            else:
                merged[f.name] = a + b
        return EngineCounters(**merged)

    def as_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["layer_problems"] = [list(p) for p in self.layer_problems]
        return d


def sum_counters(counters):
    total = EngineCounters()
    for c in counters:
        total = total + c
    return total


@dataclass
class ModelRun:
    outputs: list
    counters: list
    events: list
    fm_trace: list = field(default_factory=list)

    @property
    def total(self):
        return sum_counters(self.counters)


def _check_coverage(events, batches, neurons, batch_base):
    hits = np.zeros((batches, neurons), dtype=np.int64)
    for ev in events:
        k, n = ev.load
        for b0, n0 in ev.roll_tiles():
            b0 -= batch_base
            if b0 < 0 or n0 < 0 or b0 + k > batches or n0 + n > neurons:
                raise ScheduleMismatch(f"roll tile ({b0},{n0}) of load {ev.load} leaves the layer")
            hits[b0:b0 + k, n0:n0 + n] += 1
    if not (hits == 1).all():
        raise ScheduleMismatch("schedule does not cover every (batch, neuron) exactly once")


class NpeEngine:
    """One simulator instance; single owner, deterministic."""

    def __init__(self, shape=ArrayShape(16, 8), geom=MemGeometry(), dataflow=Dataflow.OS_TCD,
                 mac_geometry=DEFAULT_GEOMETRY, shift=DEFAULT_FRAC_BITS, ppa=None):
        self.shape = shape
        self.ppa = ppa
        self.geom = geom
        self.dataflow = Dataflow(dataflow)
        self.mac_geometry = mac_geometry
        self.shift = shift
        self._patterns = {}

    @property
    def base_dataflow(self):
        """The output-stationary dataflow that is actually simulated."""
        return Dataflow.OS_TCD if self.dataflow.uses_tcd else Dataflow.OS_CONV

    def _pattern(self, config):
        if config not in self._patterns:
            self._patterns[config] = make_cast_pattern(config, self.shape)
        return self._patterns[config]

    def _accumulate(self, a, b):
        """Raw neuron sums for operand matrices of shape ``(I, lanes)``."""
        if self.dataflow.uses_tcd:
            mac = TcdMacArray(a.shape[1], self.mac_geometry)
            for planes in operand_planes(a, b, self.mac_geometry):
                mac.cdm_planes(*planes)
            return mac.cpm()
        acc = self.mac_geometry.acc_width
        total = (a * b).sum(axis=0) & ((1 << acc) - 1)
        return np.where(total >> (acc - 1) == 1, total - (1 << acc), total)

    def run_layer(self, events, weights, fm_in, fm_out, batches, batch_base=0):
        """Execute one layer's events.

        ``weights`` is a :class:`WeightLayout` (filled on demand), ``fm_in``
        holds the layer input for ``batches`` batches, outputs go to
        ``fm_out``. Returns ``((B, U) outputs, EngineCounters)``.
        """
        if fm_in is fm_out:
            raise ValueError("a layer may not write the feature memory it reads")
        inputs, neurons = weights.weights.shape
        extra = 1 if self.dataflow.uses_tcd else 0
        for ev in events:
            if ev.cycles_per_roll != inputs + extra:
                raise ScheduleMismatch(
                    f"event expects {ev.cycles_per_roll} cycles per roll, layer needs {inputs + extra}")
        _check_coverage(events, batches, neurons, batch_base)

        seg = segment_words(batches, self.geom)
        check_feature_fit(max(inputs, neurons), batches, self.geom)
        start = (weights.image.read_count, weights.image.write_count, fm_in.read_count,
                 fm_out.write_count, weights.rlc_bytes)
        c = EngineCounters(pe_count=self.shape.total,
                           layer_problems=((batches, inputs, neurons),),
                           dataflow=self.base_dataflow.value)
        outputs = np.zeros((batches, neurons), dtype=np.int64)

        for ev in events:
            cfg = ev.config
            k_load, n_load = ev.load
            pes = list(self._pattern(cfg).active_pes(ev.load))
            lane_batch = np.array([p[2] for p in pes])
            lane_neuron = np.array([p[3] for p in pes])
            ipr = inputs_per_row(cfg.N, self.geom)
            for b0, n0 in ev.roll_tiles():
                local_b = b0 - batch_base
                base_row = weights.block(n0, n_load, cfg.N)
                w_roll = np.zeros((inputs, n_load), dtype=np.int64)
                for r in range(-(-inputs // ipr)):
                    row = weights.image.read_row(base_row + r)
                    take = min(ipr, inputs - r * ipr)
                    w_roll[r * ipr:r * ipr + take] = row[:ipr * cfg.N].reshape(ipr, cfg.N)[:take, :n_load]
                f_roll = np.zeros((inputs, k_load), dtype=np.int64)
                for r in range(-(-inputs // seg)):
                    row = fm_in.read_row(r)
                    take = min(seg, inputs - r * seg)
                    segs = row[:batches * seg].reshape(batches, seg)
                    f_roll[r * seg:r * seg + take] = segs[local_b:local_b + k_load, :take].T
                a = f_roll[:, lane_batch]
                b = w_roll[:, lane_neuron]
                values = quantize_relu_array(self._accumulate(a, b), self.shift)
                for lane, v in enumerate(values):
                    bb = local_b + lane_batch[lane]
                    nn = n0 + lane_neuron[lane]
                    outputs[bb, nn] = v
                    fm_out.write_word(*feature_address(bb, nn, batches, self.geom), int(v))
                lanes = len(pes)
                c.rolls += 1
                c.total_cycles += ev.cycles_per_roll
                c.pe_active_cycles += ev.cycles_per_roll * lanes
                c.mac_ops += inputs * lanes
                c.w_mem_reads_unbuffered += inputs
                c.fm_mem_reads_unbuffered += inputs

        c.w_mem_reads = weights.image.read_count - start[0]
        c.w_mem_writes = weights.image.write_count - start[1]
        c.rlc_bytes_in += weights.rlc_bytes - start[4]
        c.fm_mem_reads = fm_in.read_count - start[2]
        c.fm_mem_writes = fm_out.write_count - start[3]
        return outputs, c

    def max_batches(self, layer_sizes):
        b = max_batches(layer_sizes, self.geom)
        if b == 0:
            raise LayerDoesNotFit(
                "the feature memory must be large enough to hold the features of at least one "
                "full MLP layer for one batch")
        return b

    def run_model(self, model, inputs):
        """Run every layer for every batch; returns a :class:`ModelRun`.

        Batches beyond the feature-memory capacity B* are processed in
        successive passes; each pass reloads the weights layer by layer.
        NLR and RNA execute on the conventional output-stationary path and
        their counters are then rewritten by the analytical models of
        :func:`tcdnpe.ppamodel.derive_counters`.
        """
        data = np.asarray(inputs, dtype=np.int64)
        if data.ndim == 1:
            data = data[None, :]
        total_b = data.shape[0]
        sizes = model.layer_sizes
        if data.shape[1] != sizes[0]:
            raise ValueError(f"input length {data.shape[1]} != model input size {sizes[0]}")
        b_star = self.max_batches(sizes)
        events = schedule(sizes, total_b, self.shape, tcd=self.dataflow.uses_tcd, max_batches=b_star)
        nlayers = len(model.weights)
        per_layer = [EngineCounters(pe_count=self.shape.total) for _ in range(nlayers)]
        outputs = [np.zeros((total_b, sizes[l + 1]), dtype=np.int64) for l in range(nlayers)]
        trace = []

        for p, start in enumerate(range(0, total_b, b_star)):
            pass_b = min(b_star, total_b - start)
            fm = [MemImage(self.geom.fm_mem_rows, self.geom.fm_mem_row_words, "FM-Mem0"),
                  MemImage(self.geom.fm_mem_rows, self.geom.fm_mem_row_words, "FM-Mem1")]
            layout_features(data[start:start + pass_b], self.geom, fm[0])
            feature_bytes = data[start:start + pass_b].astype("<i2").tobytes()
            per_layer[0].rlc_bytes_in += len(rlc_encode(feature_bytes))
            per_layer[0].fm_mem_writes += fm[0].write_count
            for l, w in enumerate(model.weights):
                fm_in, fm_out = fm[l % 2], fm[(l + 1) % 2]
                layer_evs = [e for e in events if e.pass_index == p and e.layer_index == l]
                layout = WeightLayout(w, self.geom, streaming=True)
                out, c = self.run_layer(layer_evs, layout, fm_in, fm_out, pass_b, batch_base=start)
                per_layer[l] = per_layer[l] + c
                per_layer[l].pe_count = self.shape.total
                stored = read_features(fm_out, pass_b, w.shape[1], self.geom)
                if not np.array_equal(stored, out):
                    raise AssertionError("feature memory does not hold the computed layer outputs")
                outputs[l][start:start + pass_b] = stored
                trace.append((p, l, fm_in.name, fm_out.name))
        for c in per_layer:
            c.dataflow = self.base_dataflow.value
        if self.dataflow not in (Dataflow.OS_TCD, Dataflow.OS_CONV):
            from ..ppamodel import EnginePpa, derive_counters

            ppa = self.ppa or EnginePpa()
            per_layer = [derive_counters(c, self.dataflow, ppa) for c in per_layer]
        return ModelRun(outputs, per_layer, events, trace)


def run_model(model, inputs, shape=ArrayShape(16, 8), geom=MemGeometry(), dataflow=Dataflow.OS_TCD,
              **kwargs):
    """Convenience wrapper around :meth:`NpeEngine.run_model`."""
    return NpeEngine(shape, geom, dataflow, **kwargs).run_model(model, inputs)
