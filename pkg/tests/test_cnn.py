import numpy as np
import pytest

from dynapsim.cnn import (
    CnnSpec,
    GLYPH_NAMES,
    build_cnn,
    classify_windows,
    feature_kernels,
    first_correct_decision_ms,
    glyph_mask,
    synth_glyph_events,
    train_readout,
)
from dynapsim.errors import ConfigError
from dynapsim.packets import CAM_SLOTS_PER_NEURON, SynType


class TestSpecShapes:
    def test_default_chain(self):
        spec = CnnSpec()
        assert spec.conv_out == 16
        assert spec.pool_out == 8
        assert spec.n_conv == 4 * 16 * 16
        assert spec.n_pool == 4 * 8 * 8

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            CnnSpec(input_size=33)  # (33+6-8) not divisible by 2
        with pytest.raises(ConfigError):
            CnnSpec(pool_size=3)  # 16 % 3 != 0


class TestBuild:
    def test_population_sizes(self):
        net = build_cnn()
        sizes = {p.name: p.size for p in net.populations}
        assert sizes["pix"] == 1024
        assert all(sizes[f"conv{m}"] == 256 for m in range(4))
        assert all(sizes[f"pool{m}"] == 64 for m in range(4))
        assert all(sizes[f"out{c}"] == 64 for c in range(4))
        assert net.population("pix").external

    def test_simulated_neuron_count(self):
        # 4*16*16 conv + 4*8*8 pool + 4*64 out = 1536 placed neurons
        net = build_cnn()
        placed = sum(p.size for p in net.populations if not p.external)
        assert placed == 1536

    def test_pool_neurons_have_exactly_four_entries(self):
        net = build_cnn()
        spec = CnnSpec()
        fan = {}
        for e in net.edges:
            fan[e.dst] = fan.get(e.dst, 0) + 1
        pool0 = net.gid("pool0", 0)
        for i in range(spec.n_pool):
            assert fan[pool0 + i] == 4

    def test_conv_fan_in_within_budget(self):
        net = build_cnn()
        fan = {}
        for e in net.edges:
            fan[e.dst] = fan.get(e.dst, 0) + 1
        conv0 = net.gid("conv0", 0)
        counts = [fan.get(conv0 + i, 0) for i in range(1024)]
        assert max(counts) <= CAM_SLOTS_PER_NEURON
        assert min(counts) > 0

    def test_kernels_are_signed_two_level(self):
        for k in feature_kernels():
            assert set(np.unique(k)) <= {-1, 0, 1}
            assert (k == 1).sum() > 0 and (k == -1).sum() > 0


class TestGlyphs:
    def test_masks_distinct_and_nonempty(self):
        masks = {g: glyph_mask(g) for g in GLYPH_NAMES}
        for g, m in masks.items():
            assert m.shape == (31, 31)
            assert 100 < m.sum() < 500
        names = list(GLYPH_NAMES)
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                assert (masks[names[a]] != masks[names[b]]).sum() > 50

    def test_unknown_glyph(self):
        with pytest.raises(ConfigError):
            glyph_mask("ace")

    def test_synth_events_deterministic(self):
        a = synth_glyph_events("heart", 0, 10_000, 400.0,
                               np.random.default_rng(3))
        b = synth_glyph_events("heart", 0, 10_000, 400.0,
                               np.random.default_rng(3))
        assert a == b
        assert all(0 <= e.t_us < 10_000 for e in a)
        ts = [e.t_us for e in a]
        assert ts == sorted(ts)


class TestReadout:
    def test_known_top_set_connected(self):
        net = build_cnn()
        spec = CnnSpec()
        counts = np.zeros(spec.n_pool, dtype=int)
        chosen = list(range(10, 74))
        counts[chosen] = np.arange(64, 0, -1)
        per_class = [counts if c == 0 else np.zeros(spec.n_pool, dtype=int)
                     for c in range(4)]
        with pytest.warns(UserWarning):  # three classes have no activity
            edges = train_readout(net, per_class, spec)
        pool_base = net.gid("pool0", 0)
        srcs = {e.src - pool_base for e in edges}
        assert srcs == set(chosen)
        assert len(edges) == 64 * 64

    def test_disjoint_actives_disjoint_wiring(self):
        net = build_cnn()
        spec = CnnSpec()
        per_class = []
        for c in range(4):
            counts = np.zeros(spec.n_pool, dtype=int)
            counts[c * 64:(c + 1) * 64] = 5
            per_class.append(counts)
        edges = train_readout(net, per_class, spec)
        pool_base = net.gid("pool0", 0)
        by_class = {}
        for e in edges:
            cls = next(c for c in range(4)
                       if net.gid(f"out{c}", 0) <= e.dst
                       < net.gid(f"out{c}", 0) + 64)
            by_class.setdefault(cls, set()).add(e.src - pool_base)
        for a in range(4):
            for b in range(a + 1, 4):
                assert not (by_class[a] & by_class[b])

    def test_ties_break_by_index(self):
        net = build_cnn()
        spec = CnnSpec()
        counts = np.ones(spec.n_pool, dtype=int)  # all tied
        per_class = [counts.copy() for _ in range(4)]
        edges = train_readout(net, per_class, spec)
        pool_base = net.gid("pool0", 0)
        out0 = net.gid("out0", 0)
        srcs = sorted({e.src - pool_base for e in edges
                       if out0 <= e.dst < out0 + 64})
        assert srcs == list(range(64))

    def test_fewer_active_warns(self):
        net = build_cnn()
        spec = CnnSpec()
        counts = np.zeros(spec.n_pool, dtype=int)
        counts[:10] = 3
        with pytest.warns(UserWarning):
            edges = train_readout(net, [counts] * 4, spec)
        assert len(edges) == 4 * 10 * 64


class TestClassification:
    def test_all_silent_is_ambiguous(self):
        assert classify_windows([], [0.0]) == [None]

    def test_single_active_population(self):
        spikes = [(30.0 + k, 2) for k in range(10)]
        assert classify_windows(spikes, [0.0]) == [2]

    def test_tie_is_ambiguous(self):
        spikes = [(30.0, 1), (31.0, 2)]
        assert classify_windows(spikes, [0.0]) == [None]

    def test_window_boundaries(self):
        # window is [onset+24, onset+44); spikes outside don't count
        spikes = [(23.9, 0), (44.0, 0), (24.0, 1)]
        assert classify_windows(spikes, [0.0]) == [1]

    def test_first_decision_stable_point(self):
        # pop 1 leads early, truth pop 0 overtakes at t=12 and holds
        spikes = [(5.0, 1), (8.0, 0), (12.0, 0), (20.0, 0), (30.0, 0)]
        d = first_correct_decision_ms(spikes, 0.0, truth=0, horizon_ms=50.0)
        assert d == pytest.approx(12.0)

    def test_first_decision_none_when_wrong(self):
        spikes = [(5.0, 1), (8.0, 1)]
        assert first_correct_decision_ms(spikes, 0.0, 0, 50.0) is None

    def test_first_decision_resets_on_flip(self):
        spikes = [(5.0, 0), (10.0, 1), (11.0, 1), (20.0, 0), (21.0, 0)]
        d = first_correct_decision_ms(spikes, 0.0, truth=0, horizon_ms=50.0)
        assert d == pytest.approx(21.0)
