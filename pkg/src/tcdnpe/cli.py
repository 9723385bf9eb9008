"""Benchmark harness: schedule, simulate and report MLP benchmarks per dataflow.

Example::

    tcdnpe --model suite --dataflow all --batch 2 --out reports
    tcdnpe --model 4:10:5:3 --dataflow os-tcd --format json
    tcdnpe --selftest
"""

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bitmac import tcd_mac_streams
from .goldref import MlpModel, exact_dot, mlp_forward
from .mapper import ArrayShape, total_rolls
from .npesim.engine import Dataflow, NpeEngine
from .npesim.formats import FEATURES_MAGIC, load_matrix, load_model
from .npesim.memory import MemGeometry
from .ppamodel import PPA_ENV, dump_ppa, energy_report, load_ppa, time_report

BENCHMARKS = {
    "mnist": "784:700:10",
    "adult": "14:48:2",
    "fft": "8:140:2",
    "wine": "13:10:3",
    "iris": "4:10:5:3",
    "poker": "10:85:50:10",
    "fashion-mnist": "728:256:128:100:10",
}

ALL_DATAFLOWS = [d.value for d in Dataflow]

CSV_FIELDS = [
    "benchmark", "topology", "dataflow", "batch", "rows", "cols", "rolls", "cycles", "exec_ns",
    "pe_dynamic_pj", "pe_leakage_pj", "mem_leakage_pj", "other_leakage_pj", "mem_dynamic_pj",
    "total_pj", "utilization", "pe_active_cycles", "mac_ops", "w_mem_reads", "w_mem_writes",
    "fm_mem_reads", "fm_mem_writes", "rlc_bytes_in",
]


def parse_topology(text):
    """``"784:700:10"`` -> ``[784, 700, 10]``."""
    tokens = text.strip().split(":")
    if len(tokens) < 2:
        raise ValueError(f"topology {text!r} needs at least two layer sizes")
    sizes = []
    for tok in tokens:
        if not tok.strip().isdigit() or int(tok) < 1:
            raise ValueError(f"bad layer size {tok!r} in topology {text!r}")
        sizes.append(int(tok))
    return sizes


@dataclass
class RunSpec:
    """One harness invocation. ``models`` maps benchmark names to topologies."""

    models: dict
    batch: int = 1
    shape: ArrayShape = ArrayShape(16, 8)
    geom: MemGeometry = MemGeometry()
    dataflows: list = field(default_factory=lambda: [Dataflow.OS_TCD.value, Dataflow.OS_CONV.value])
    ppa_file: str | None = None
    seed: int = 0
    weights_file: str | None = None
    inputs_file: str | None = None

    def __post_init__(self):
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        self.dataflows = [Dataflow(d).value for d in self.dataflows]
        for topo in self.models.values():
            parse_topology(topo)


def resolve_models(text):
    """``suite``, a benchmark name or a topology string -> ``{name: topology}``."""
    if text == "suite":
        return dict(BENCHMARKS)
    if text in BENCHMARKS:
        return {text: BENCHMARKS[text]}
    parse_topology(text)
    return {text: text}


def _model_and_inputs(spec, index, topology):
    rng = np.random.default_rng([spec.seed, index])
    if spec.weights_file:
        model = load_model(spec.weights_file)
    else:
        model = MlpModel.random(parse_topology(topology), rng)
    if spec.inputs_file:
        inputs = load_matrix(spec.inputs_file, FEATURES_MAGIC)
        if inputs.shape[0] != spec.batch:
            raise ValueError(f"input file holds {inputs.shape[0]} batches, --batch is {spec.batch}")
    else:
        inputs = rng.integers(0, 256, size=(spec.batch, model.layer_sizes[0]))
    return model, inputs


def run_one(name, model, inputs, dataflow, spec, ppa):
    engine = NpeEngine(spec.shape, spec.geom, dataflow, ppa=ppa)
    run = engine.run_model(model, inputs)
    total = run.total
    energy = energy_report(total, ppa)
    rolls = total_rolls(run.events)
    useful = sum(inputs.shape[0] * n for n in model.layer_sizes[1:])
    row = {
        "benchmark": name,
        "topology": ":".join(map(str, model.layer_sizes)),
        "dataflow": Dataflow(dataflow).value,
        "batch": int(inputs.shape[0]),
        "rows": spec.shape.rows,
        "cols": spec.shape.cols,
        "rolls": rolls,
        "cycles": total.total_cycles,
        "exec_ns": time_report(total, ppa),
        "pe_dynamic_pj": energy.pe_dynamic_pj,
        "pe_leakage_pj": energy.pe_leakage_pj,
        "mem_leakage_pj": energy.mem_leakage_pj,
        "other_leakage_pj": energy.other_leakage_pj,
        "mem_dynamic_pj": energy.mem_dynamic_pj,
        "total_pj": energy.total_pj,
        "utilization": useful / (rolls * spec.shape.total) if rolls else 0.0,
        "pe_active_cycles": total.pe_active_cycles,
        "mac_ops": total.mac_ops,
        "w_mem_reads": total.w_mem_reads,
        "w_mem_writes": total.w_mem_writes,
        "fm_mem_reads": total.fm_mem_reads,
        "fm_mem_writes": total.fm_mem_writes,
        "rlc_bytes_in": total.rlc_bytes_in,
    }
    detail = {
        "layers": [c.as_dict() for c in run.counters],
        "schedule": [
            {"pass": e.pass_index, "layer": e.layer_index, "config": [e.config.K, e.config.N],
             "load": list(e.load), "rolls": e.rolls, "cycles_per_roll": e.cycles_per_roll,
             "batch_offset": e.batch_offset, "neuron_offset": e.neuron_offset}
            for e in run.events
        ],
    }
    return row, detail, run


def run_benchmarks(spec, out_dir=None, formats=("json", "csv")):
    """Run every (benchmark, dataflow) of ``spec``.

    Returns ``(report, texts)`` where ``texts`` maps ``json``/``csv`` to the
    rendered reports; with ``out_dir`` they are also written to
    ``report.json`` / ``report.csv``.
    """
    ppa = load_ppa(spec.ppa_file)
    runs = []
    for index, (name, topology) in enumerate(spec.models.items()):
        model, inputs = _model_and_inputs(spec, index, topology)
        for dataflow in spec.dataflows:
            row, detail, _ = run_one(name, model, inputs, dataflow, spec, ppa)
            runs.append({**row, **detail})
    report = {
        "version": __version__,
        "spec": {
            "models": spec.models, "batch": spec.batch, "shape": asdict(spec.shape),
            "geom": asdict(spec.geom), "dataflows": spec.dataflows, "seed": spec.seed,
            "ppa_file": spec.ppa_file, "weights_file": spec.weights_file,
        },
        "ppa": dump_ppa(ppa),
        "runs": runs,
    }
    texts = {}
    if "json" in formats:
        texts["json"] = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if "csv" in formats:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in runs:
            writer.writerow({k: r[k] for k in CSV_FIELDS})
        texts["csv"] = buf.getvalue()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for kind, text in texts.items():
            with open(os.path.join(out_dir, f"report.{kind}"), "w", newline="") as f:
                f.write(text)
    return report, texts


def selftest(seed=0, out=None):
    """Quick bit-exactness checks of the MAC and the engine; returns True if all pass."""
    out = out or sys.stdout
    rng = np.random.default_rng(seed)
    results = []
    streams = [list(zip(rng.integers(-32768, 32768, n).tolist(), rng.integers(-32768, 32768, n).tolist()))
               for n in rng.integers(1, 65, 200)]
    values, cycles = tcd_mac_streams(streams)
    ok = all(int(v) == exact_dot(s) for v, s in zip(values, streams))
    ok &= all(int(c) == len(s) + 1 for c, s in zip(cycles, streams))
    results.append(("tcd-mac streams vs exact dot product", ok))
    for topology in ("4:10:5:3", "13:10:3", "10:85:50:10"):
        model = MlpModel.random(parse_topology(topology), rng)
        inputs = rng.integers(0, 256, size=(3, model.layer_sizes[0]))
        gold = mlp_forward(model, inputs)
        for dataflow in (Dataflow.OS_TCD, Dataflow.OS_CONV):
            run = NpeEngine(dataflow=dataflow).run_model(model, inputs)
            ok = all(np.array_equal(a, b) for a, b in zip(run.outputs, gold))
            results.append((f"engine {dataflow.value} {topology} vs golden model", ok))
    for label, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {label}", file=out)
    return all(ok for _, ok in results)


def build_parser():
    p = argparse.ArgumentParser(prog="tcdnpe", description=__doc__.split("\n")[0])
    p.add_argument("--model", default="suite",
                   help="topology like 784:700:10, a benchmark name "
                        f"({', '.join(BENCHMARKS)}) or 'suite' (default)")
    p.add_argument("--weights", help="model file of TCDW records (overrides random weights)")
    p.add_argument("--inputs", help="TCDF feature file with one row per batch")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--rows", type=int, default=16, help="PE-array rows (TGs)")
    p.add_argument("--cols", type=int, default=8, help="TCD-MACs per TG")
    p.add_argument("--dataflow", choices=ALL_DATAFLOWS + ["all"], action="append",
                   help="repeatable; default os-tcd and os-conv")
    p.add_argument("--ppa", help=f"PPA parameter file (default ${PPA_ENV} or built-in values)")
    p.add_argument("--out", help="directory for report.json / report.csv; stdout if omitted")
    p.add_argument("--format", choices=["json", "csv", "both"], default="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--selftest", action="store_true", help="run the bit-exactness checks and exit")
    p.add_argument("--dump-ppa", action="store_true", help="print the PPA parameter file and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.selftest:
            return 0 if selftest(args.seed) else 1
        if args.dump_ppa:
            sys.stdout.write(dump_ppa(load_ppa(args.ppa)))
            return 0
        flows = args.dataflow or [Dataflow.OS_TCD.value, Dataflow.OS_CONV.value]
        if "all" in flows:
            flows = ALL_DATAFLOWS
        models = resolve_models(args.model)
        if args.weights:
            if len(models) != 1:
                raise ValueError("--weights needs a single --model")
            models = {next(iter(models)): ":".join(map(str, load_model(args.weights).layer_sizes))}
        spec = RunSpec(
            models=models, batch=args.batch, shape=ArrayShape(args.rows, args.cols),
            dataflows=list(dict.fromkeys(flows)), ppa_file=args.ppa, seed=args.seed,
            weights_file=args.weights, inputs_file=args.inputs,
        )
        formats = ("json", "csv") if args.format == "both" else (args.format,)
        _, texts = run_benchmarks(spec, args.out, formats)
    except (ValueError, OSError) as exc:
        print(f"tcdnpe: error: {exc}", file=sys.stderr)
        return 2
    if not args.out:
        for kind in formats:
            sys.stdout.write(texts[kind])
    return 0


if __name__ == "__main__":
    sys.exit(main())
