import numpy as np
import pytest

from tcdnpe.goldref import MlpModel, mlp_forward
from tcdnpe.mapper import ArrayShape, LayerProblem, NpeConfig, layer_events, schedule
from tcdnpe.npesim import (
    Dataflow,
    LayerDoesNotFit,
    MemGeometry,
    MemImage,
    NpeEngine,
    ScheduleMismatch,
    WeightLayout,
    feature_rows,
    layout_features,
    layout_weights,
    make_cast_pattern,
    read_features,
    read_weights,
    run_model,
    weight_block_rows,
)
from tcdnpe.npesim.memory import feature_address, max_batches, segment_words

GEOM = MemGeometry()
S16x8 = ArrayShape(16, 8)
S6x3 = ArrayShape(6, 3)


# -- memory layout ----------------------------------------------------------

def test_default_geometry_sizes():
    assert GEOM.w_mem_rows * GEOM.w_mem_row_words * 2 == 512 * 1024
    assert GEOM.fm_mem_rows * GEOM.fm_mem_row_words * 2 == 64 * 1024


def test_weight_block_rows_layout_example():
    assert weight_block_rows(200, 64, GEOM) == 100
    assert weight_block_rows(200, 128, GEOM) == 200
    assert weight_block_rows(1, 1, GEOM) == 1


def test_feature_rows_layout_example():
    assert segment_words(2, GEOM) == 32
    assert feature_rows(200, 2, GEOM) == 7


def test_weights_round_trip():
    rng = np.random.default_rng(0)
    w = rng.integers(-300, 300, (37, 50))
    for n in (8, 16, 64, 128):
        layout = layout_weights(w, n, GEOM)
        assert np.array_equal(read_weights(layout, n), w)


def test_weight_block_placement():
    w = np.arange(200 * 100).reshape(200, 100) % 1000
    layout = layout_weights(w, 64, GEOM)
    assert layout.blocks[(0, 64, 64)] == 0 and layout.blocks[(64, 36, 64)] == 100
    # row 0 holds inputs 0 and 1 of neurons 0..63
    assert list(layout.image.words[0, :64]) == list(w[0, :64])
    assert list(layout.image.words[0, 64:]) == list(w[1, :64])


def test_weights_too_large():
    small = MemGeometry(w_mem_rows=10)
    with pytest.raises(LayerDoesNotFit):
        layout_weights(np.zeros((200, 8)), 8, small)
    with pytest.raises(LayerDoesNotFit):
        layout_weights(np.zeros((4, 200)), 200, GEOM)


def test_streaming_layout_flushes():
    small = MemGeometry(w_mem_rows=10)
    layout = WeightLayout(np.ones((64, 24)), small, streaming=True)
    for start in (0, 8, 16):
        layout.block(start, 8, 8)
    assert layout.flushes == 1


def test_features_round_trip_and_address():
    rng = np.random.default_rng(2)
    x = rng.integers(0, 1000, (3, 50))
    img = layout_features(x, GEOM)
    assert np.array_equal(read_features(img, 3, 50, GEOM), x)
    seg = 64 // 3
    assert feature_address(2, seg + 1, 3, GEOM) == (1, 2 * seg + 1)


def test_feature_fit_and_max_batches():
    with pytest.raises(LayerDoesNotFit):
        layout_features(np.zeros((65, 1)), GEOM)
    assert max_batches([784, 700, 10], GEOM) == 32
    assert max_batches([4, 10], GEOM) == 64
    assert max_batches([10 ** 6], GEOM) == 0


def test_hexdump():
    img = MemImage(2, 2)
    img.write_row(0, [-1, 2])
    assert img.hexdump() == "ffff 0002"


# -- distribution network ---------------------------------------------------

def test_cast_full_broadcast():
    p = make_cast_pattern(NpeConfig(1, 18), S6x3)
    assert p.broadcast_groups() == {0: list(range(6))}


def test_cast_full_unicast_by_batch():
    p = make_cast_pattern(NpeConfig(6, 3), S6x3)
    assert p.broadcast_groups() == {k: [k] for k in range(6)}


@pytest.mark.parametrize("shape", [S6x3, S16x8])
def test_each_pe_gets_one_weight_and_one_feature(shape):
    from tcdnpe.mapper import enumerate_configs

    for cfg in enumerate_configs(shape):
        p = make_cast_pattern(cfg, shape)
        pes = list(p.active_pes((cfg.K, cfg.N)))
        assert len(pes) == shape.total
        assert len({(k, j) for _, _, k, j in pes}) == shape.total


def test_cast_rejects_illegal():
    with pytest.raises(ValueError):
        make_cast_pattern(NpeConfig(4, 5), S6x3)


def test_partial_load_gates_pes():
    p = make_cast_pattern(NpeConfig(2, 9), S6x3)
    assert len(list(p.active_pes((1, 5)))) == 5


# -- engine -----------------------------------------------------------------

def _layer_setup(b, i, u, config, dataflow=Dataflow.OS_TCD, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.integers(-256, 256, (i, u))
    x = rng.integers(0, 256, (b, i))
    events = layer_events(LayerProblem(b, i, u), S16x8, configs=[config],
                          tcd=Dataflow(dataflow).uses_tcd)
    fm_in = layout_features(x, GEOM)
    fm_out = MemImage(GEOM.fm_mem_rows, GEOM.fm_mem_row_words)
    return w, x, events, fm_in, fm_out


def test_run_layer_buffered_accesses():
    w, x, events, fm_in, fm_out = _layer_setup(2, 200, 100, NpeConfig(2, 64))
    engine = NpeEngine()
    out, c = engine.run_layer(events, WeightLayout(w, GEOM), fm_in, fm_out, 2)
    assert np.array_equal(out, mlp_forward(MlpModel([200, 100], [w]), x)[0])
    assert c.rolls == 2
    assert c.w_mem_reads == 200 and c.w_mem_reads_unbuffered == 400
    assert c.fm_mem_reads == 14
    assert c.total_cycles == 2 * 201
    assert c.pe_active_cycles == 201 * (2 * 64 + 2 * 36)
    assert c.fm_mem_writes == 200


def test_run_layer_rejects_mismatch():
    w, x, events, fm_in, fm_out = _layer_setup(2, 20, 10, NpeConfig(2, 64))
    engine = NpeEngine()
    with pytest.raises(ScheduleMismatch):
        engine.run_layer(events, WeightLayout(w[:10], GEOM), fm_in, fm_out, 2)
    with pytest.raises(ScheduleMismatch):
        engine.run_layer(events[:0], WeightLayout(w, GEOM), fm_in, fm_out, 2)
    with pytest.raises(ValueError):
        engine.run_layer(events, WeightLayout(w, GEOM), fm_in, fm_in, 2)


def test_zero_weights_single_layer():
    m = MlpModel([5, 3], [np.zeros((5, 3))])
    run = run_model(m, np.ones((2, 5)))
    assert (run.outputs[-1] == 0).all()


@pytest.mark.parametrize("topology,b", [([4, 10, 5, 3], 3), ([13, 10, 3], 2), ([30, 150, 20], 4)])
def test_model_bit_exact_and_dataflow_independent(topology, b):
    rng = np.random.default_rng(sum(topology))
    m = MlpModel.random(topology, rng)
    x = rng.integers(0, 256, (b, topology[0]))
    gold = mlp_forward(m, x)
    tcd = run_model(m, x, dataflow="os-tcd")
    conv = run_model(m, x, dataflow="os-conv")
    for g, o1, o2 in zip(gold, tcd.outputs, conv.outputs):
        assert np.array_equal(g, o1) and np.array_equal(g, o2)
    for ct, cc in zip(tcd.counters, conv.counters):
        assert ct.total_cycles == cc.total_cycles + ct.rolls
        assert ct.w_mem_reads == cc.w_mem_reads


def test_counter_sanity_and_ping_pong():
    rng = np.random.default_rng(5)
    m = MlpModel.random([10, 85, 50, 10], rng)
    run = run_model(m, rng.integers(0, 256, (2, 10)))
    for l, c in enumerate(run.counters):
        evs = [e for e in run.events if e.layer_index == l]
        assert c.total_cycles == sum(e.rolls * e.cycles_per_roll for e in evs)
        assert c.pe_active_cycles == sum(e.rolls * e.cycles_per_roll * e.load[0] * e.load[1] for e in evs)
    assert [(t[2], t[3]) for t in run.fm_trace] == [
        ("FM-Mem0", "FM-Mem1"), ("FM-Mem1", "FM-Mem0"), ("FM-Mem0", "FM-Mem1")]
    assert all(t[2] != t[3] for t in run.fm_trace)


def test_multiple_passes():
    rng = np.random.default_rng(8)
    m = MlpModel.random([60, 40, 4], rng)
    x = rng.integers(0, 256, (5, 60))
    small = MemGeometry(fm_mem_rows=2)
    run = run_model(m, x, geom=small)
    assert max(e.pass_index for e in run.events) >= 1
    assert np.array_equal(run.outputs[-1], mlp_forward(m, x)[-1])


def test_capacity_error():
    m = MlpModel([2000, 2], [np.zeros((2000, 2))])
    with pytest.raises(LayerDoesNotFit, match="at least one"):
        run_model(m, np.zeros((1, 2000)), geom=MemGeometry(fm_mem_rows=4))


def test_input_length_checked():
    m = MlpModel([3, 2], [np.zeros((3, 2))])
    with pytest.raises(ValueError):
        run_model(m, np.zeros((1, 4)))


def test_nlr_rna_counters_are_derived():
    rng = np.random.default_rng(4)
    m = MlpModel.random([14, 48, 2], rng)
    x = rng.integers(0, 256, (2, 14))
    conv = run_model(m, x, dataflow="os-conv").total
    nlr = run_model(m, x, dataflow="nlr")
    assert np.array_equal(nlr.outputs[-1], mlp_forward(m, x)[-1])
    assert nlr.total.dataflow == "nlr"
    assert nlr.total.total_cycles == 2 * conv.total_cycles
    rna = run_model(m, x, dataflow=Dataflow.RNA).total
    assert rna.dataflow == "rna" and rna.total_cycles > 0


def test_schedule_and_engine_agree_on_rolls():
    rng = np.random.default_rng(6)
    m = MlpModel.random([784, 700, 10], rng)
    events = schedule(m.layer_sizes, 1, S16x8)
    run = run_model(m, rng.integers(0, 256, (1, 784)))
    assert run.total.rolls == sum(e.rolls for e in events) == 7
    assert run.total.w_mem_writes > 0 and run.total.rlc_bytes_in > 0
