"""Time, energy and comparison models driven by engine counters.

Default parameters are the reference MAC and engine PPA figures and can be
overridden with a plain ``key = value`` text file. Units: area in um^2,
power in uW (MACs) or mW (leakage), delay in ns, energy in pJ.

The NLR and RNA dataflows are analytical timing models derived from the
output-stationary conventional-MAC counters; their constants are
approximate configuration values, not measurements.
"""

import math
import os
from dataclasses import asdict, dataclass, fields, replace

from .npesim.engine import Dataflow, EngineCounters


@dataclass(frozen=True)
class MacPpa:
    name: str
    area_um2: float
    power_uw: float
    delay_ns: float
    pdp_pj: float

    def __post_init__(self):
        if min(self.area_um2, self.power_uw, self.delay_ns, self.pdp_pj) <= 0:
            raise ValueError(f"MAC {self.name}: PPA values must be positive")

    @property
    def energy_per_op_pj(self):
        """Power x delay. The reference PDP column is ten times this figure."""
        return self.power_uw * self.delay_ns * 1e-3


MAC_TABLE = {m.name: m for m in (
    MacPpa("BRx2,KS", 8357, 467, 2.85, 13.31),
    MacPpa("BRx2,BK", 8122, 394, 3.3, 13.0),
    MacPpa("BRx8,BK", 7281, 383, 3.14, 12.03),
    MacPpa("BRx4,BK", 6437, 347, 3.35, 11.62),
    MacPpa("WAL,KS", 7171, 346, 3.04, 10.52),
    MacPpa("WAL,BK", 6520, 334, 3.13, 10.45),
    MacPpa("BRx4,KS", 6551, 393, 2.47, 9.71),
    MacPpa("BRx8,KS", 7342, 354, 2.63, 9.31),
    MacPpa("TCD-MAC", 5004, 320, 1.57, 5.02),
)}

CONVENTIONAL_MACS = [name for name in MAC_TABLE if name != "TCD-MAC"]

STREAM_SIZES = (1, 10, 100, 1000)

# Reference percentages (integers): throughput at 1/10/100/1000, then energy at 1/10/100/1000.
REFERENCE_IMPROVEMENTS = {
    "BRx2,KS": (25, 59, 62, 63, -10, 40, 45, 45),
    "BRx2,BK": (23, 58, 62, 62, 5, 48, 52, 53),
    "BRx8,BK": (17, 55, 58, 59, 0, 45, 50, 50),
    "BRx4,BK": (14, 53, 57, 57, 7, 49, 53, 54),
    "WAL,KS": (5, 48, 52, 53, -3, 44, 48, 49),
    "WAL,BK": (4, 48, 52, 52, 0, 45, 50, 50),
    "BRx4,KS": (-3, 44, 48, 49, -27, 31, 36, 37),
    "BRx8,KS": (-7, 41, 46, 47, -19, 35, 40, 41),
}

ENGINE_CLOCK_MHZ = 636.0


@dataclass(frozen=True)
class EnginePpa:
    """Engine-level parameters.

    ``pe_cycle_ns`` overrides the array clock for every dataflow; by default
    each dataflow runs at the delay of its MAC. Memory access energies are
    not measured values; they are configuration defaults (per row access).
    """

    tcd_mac: MacPpa = MAC_TABLE["TCD-MAC"]
    conv_mac: MacPpa = MAC_TABLE["BRx4,KS"]
    pe_cycle_ns: float | None = None
    pe_leak_mw: float = 6.4
    mem_leak_mw: float = 51.7
    other_leak_mw: float = 17.0
    mem_read_energy_pj: float = 10.0
    mem_write_energy_pj: float = 10.0
    # approximate: extra memory-bound cycles per MAC for partial-sum writeback
    nlr_writeback_cycles: float = 1.0
    rna_writeback_cycles: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and v < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def mac_for(self, dataflow):
        return self.tcd_mac if Dataflow(dataflow).uses_tcd else self.conv_mac

    def cycle_ns(self, dataflow):
        return self.pe_cycle_ns or self.mac_for(dataflow).delay_ns

    @property
    def pe_dyn_energy_pj(self):
        return self.tcd_mac.energy_per_op_pj


@dataclass
class EnergyReport:
    pe_dynamic_pj: float = 0.0
    pe_leakage_pj: float = 0.0
    mem_leakage_pj: float = 0.0
    other_leakage_pj: float = 0.0
    mem_dynamic_pj: float = 0.0
    total_pj: float = 0.0
    exec_time_ns: float = 0.0

    def as_dict(self):
        return asdict(self)


def improvement_table(tcd, conv, stream_sizes=STREAM_SIZES):
    """Percentage gains of a TCD-MAC over ``conv`` on streams of S operations.

    The TCD-MAC needs S + 1 cycles for S operations. Returns
    ``{S: (throughput_pct, energy_pct)}`` using the PDP ratio for the first
    figure and the delay ratio for the second, which is how the reference
    figures in :data:`REFERENCE_IMPROVEMENTS` evaluate.
    """
    out = {}
    for s in stream_sizes:
        if s < 1:
            raise ValueError("stream sizes must be >= 1")
        thr = 100.0 * (1.0 - (s + 1) * tcd.pdp_pj / (s * conv.pdp_pj))
        energy = 100.0 * (1.0 - (s + 1) * tcd.delay_ns / (s * conv.delay_ns))
        out[s] = (thr, energy)
    return out


def derive_counters(base, dataflow, ppa=EnginePpa()):
    """Counters of ``dataflow`` from output-stationary conventional-MAC counters.

    NLR writes every partial sum back and reads it again: each MAC costs
    ``1 + nlr_writeback_cycles`` cycles and two extra memory accesses. RNA
    unrolls each neuron into a multiplier stage and ``ceil(log2 I)`` adder
    stages; a stage's operations share the PE array and each result goes
    through memory.
    """
    dataflow = Dataflow(dataflow)
    if dataflow in (Dataflow.OS_TCD, Dataflow.OS_CONV):
        return base
    if base.dataflow and base.dataflow != Dataflow.OS_CONV.value:
        raise ValueError(f"{dataflow.value} is derived from os-conv counters, got {base.dataflow}")
    c = replace(base, dataflow=dataflow.value)
    if dataflow is Dataflow.NLR:
        c.total_cycles = math.ceil(base.total_cycles * (1 + ppa.nlr_writeback_cycles))
        c.pe_active_cycles = base.mac_ops
        c.fm_mem_writes = base.fm_mem_writes + base.mac_ops
        c.fm_mem_reads = base.fm_mem_reads + base.mac_ops
        return c
    pes = base.pe_count or 1
    cycles = ops_total = 0
    for batches, inputs, neurons in base.layer_problems:
        for ops in rna_stage_ops(batches, inputs, neurons):
            cycles += math.ceil(math.ceil(ops / pes) * (1 + ppa.rna_writeback_cycles))
            ops_total += ops
    c.total_cycles = cycles
    c.pe_active_cycles = ops_total
    c.mac_ops = ops_total
    c.fm_mem_reads = base.fm_mem_reads + 2 * ops_total
    c.fm_mem_writes = base.fm_mem_writes + ops_total
    return c


def rna_stage_ops(batches, inputs, neurons):
    """Operations per RNA stage: one multiplier stage, then a binary adder tree."""
    ops = [batches * neurons * inputs]
    width = inputs
    while width > 1:
        nxt = -(-width // 2)
        ops.append(batches * neurons * (width - nxt))
        width = nxt
    return ops


def _as_counters(counters):
    if isinstance(counters, EngineCounters):
        return counters
    total = EngineCounters()
    for c in counters:
        total = total + c
    return total


def _dataflow(counters, dataflow):
    if dataflow is None:
        dataflow = counters.dataflow or Dataflow.OS_TCD
    dataflow = Dataflow(dataflow)
    if counters.dataflow and counters.dataflow != dataflow.value:
        raise ValueError(f"counters were produced by {counters.dataflow}, not {dataflow.value}")
    return dataflow


def time_report(counters, ppa=EnginePpa(), dataflow=None):
    """Execution time in ns: the dataflow's cycles times its cycle time.

    ``dataflow`` defaults to the one recorded in the counters. OS-TCD cycles
    already include the closing cycle of every roll; NLR and RNA counters
    come from :func:`derive_counters`.
    """
    c = _as_counters(counters)
    return c.total_cycles * ppa.cycle_ns(_dataflow(c, dataflow))


def energy_report(counters, ppa=EnginePpa(), dataflow=None):
    """Energy split into PE dynamic, PE/memory/other leakage and memory dynamic."""
    c = _as_counters(counters)
    dataflow = _dataflow(c, dataflow)
    t = time_report(c, ppa, dataflow)
    r = EnergyReport(
        pe_dynamic_pj=c.pe_active_cycles * ppa.mac_for(dataflow).energy_per_op_pj,
        pe_leakage_pj=ppa.pe_leak_mw * t,
        mem_leakage_pj=ppa.mem_leak_mw * t,
        other_leakage_pj=ppa.other_leak_mw * t,
        mem_dynamic_pj=(c.w_mem_reads + c.fm_mem_reads) * ppa.mem_read_energy_pj
        + (c.w_mem_writes + c.fm_mem_writes) * ppa.mem_write_energy_pj,
        exec_time_ns=t,
    )
    r.total_pj = r.pe_dynamic_pj + r.pe_leakage_pj + r.mem_leakage_pj + r.other_leakage_pj + r.mem_dynamic_pj
    return r


# --------------------------------------------------------------------------
# Parameter files
# --------------------------------------------------------------------------

PPA_ENV = "TCDNPE_PPA"


def dump_ppa(ppa=EnginePpa()):
    """Render parameters (and the MAC table) in the text format read by :func:`parse_ppa`."""
    lines = ["# MAC rows: mac.<name> = area_um2, power_uw, delay_ns, pdp_pj"]
    macs = dict(MAC_TABLE)
    macs.setdefault(ppa.tcd_mac.name, ppa.tcd_mac)
    macs.setdefault(ppa.conv_mac.name, ppa.conv_mac)
    for m in macs.values():
        lines.append(f"mac.{m.name} = {m.area_um2:g}, {m.power_uw:g}, {m.delay_ns:g}, {m.pdp_pj:g}")
    lines.append(f"tcd_mac = {ppa.tcd_mac.name}")
    lines.append(f"conv_mac = {ppa.conv_mac.name}")
    for f in fields(EnginePpa):
        if f.name in ("tcd_mac", "conv_mac"):
            continue
        v = getattr(ppa, f.name)
        lines.append(f"{f.name} = {'' if v is None else v}")
    return "\n".join(lines) + "\n"


def parse_ppa(text, base=EnginePpa()):
    """Apply ``key = value`` overrides from ``text`` on top of ``base``."""
    macs = dict(MAC_TABLE)
    macs[base.tcd_mac.name] = base.tcd_mac
    macs[base.conv_mac.name] = base.conv_mac
    values = {}
    names = {"tcd_mac": base.tcd_mac.name, "conv_mac": base.conv_mac.name}
    numeric = {f.name for f in fields(EnginePpa)} - set(names)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("mac."):
            parts = [float(x) for x in value.split(",")]
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: MAC rows need area, power, delay, pdp")
            macs[key[4:]] = MacPpa(key[4:], *parts)
        elif key in names:
            names[key] = value
        elif key in numeric:
            values[key] = float(value) if value else None
        else:
            raise ValueError(f"line {lineno}: unknown parameter {key!r}")
    for key, name in names.items():
        if name not in macs:
            raise ValueError(f"unknown MAC {name!r} for {key}")
        values[key] = macs[name]
    return replace(base, **values)


def load_ppa(path=None):
    """Parameters from ``path``, else from ``$TCDNPE_PPA``, else the defaults."""
    path = path or os.environ.get(PPA_ENV)
    if not path:
        return EnginePpa()
    with open(path) as f:
        return parse_ppa(f.read())
