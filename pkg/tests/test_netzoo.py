import numpy as np
import pytest

from ensnet.archdsl import Inception, count_params, param_shapes, parse_arch
from ensnet.ensemble import predict
from ensnet.imageprep import generate_synthetic
from ensnet.netzoo import (
    COUNTERPART,
    DEFAULT_EPOCHS,
    PRESETS,
    Network,
    build,
    default_schedule,
    extract_scores,
    preset,
    replace_head,
    train,
)
from ensnet.tensor import TrainSchedule


def _state_bytes(net):
    return {k: v.tobytes() for k, v in net.state().items()}


@pytest.fixture(scope="module")
def four_class():
    data = generate_synthetic(4, 16, 32, seed=3)
    return data.arrays()


class TestPresets:
    def test_unknown(self):
        with pytest.raises(KeyError):
            preset("vgg16")

    def test_alexnet_fc7(self):
        g = build("alexnet", 101).graph
        assert g.shape_of("fc2") == (1, 1, 4096)
        assert g.shape_of("fc3") == (1, 1, 101)

    def test_googlenet_has_nine_inceptions(self):
        assert preset("googlenet").count(Inception) == 9

    def test_default_epochs(self):
        assert (DEFAULT_EPOCHS["alexnet"], DEFAULT_EPOCHS["googlenet"], DEFAULT_EPOCHS["resnet50"]) == (16, 20, 20)
        assert default_schedule("tiny-r").epochs == 20
        assert default_schedule("tiny-a", lr=0.05).lr == 0.05

    @pytest.mark.parametrize("pid", ["tiny-a", "tiny-g", "tiny-r"])
    def test_tiny_bounds(self, pid):
        spec = preset(pid)
        w, h, c = spec.input.w, spec.input.h, spec.input.c
        assert w <= 32 and h <= 32 and c <= 3
        net = build(pid, 101)
        assert count_params(net.graph).total <= 200_000
        # same layer-type family as the full-size counterpart
        full = {n.kind for n in build(COUNTERPART[pid], 101).graph.nodes}
        assert {n.kind for n in net.graph.nodes} == full

    def test_tiny_r_has_both_shortcut_kinds(self):
        g = build("tiny-r", 10).graph
        adds = g.by_kind("add")
        projections = g.by_kind("proj")
        assert len(adds) == 3 and 1 <= len(projections) < len(adds)

    @pytest.mark.parametrize("pid", ["tiny-a", "tiny-g", "tiny-r"])
    def test_params_match_report(self, pid):
        net = build(pid, 7)
        g = net.graph
        for node, layer in zip(g.nodes, net.layers):
            expected = param_shapes(g, node)
            got = {} if layer is None else {k: t.shape for k, t in layer.params.items()}
            assert got == expected, node.label
        assert sum(t.value.size for t in net.params()) == count_params(g).total

    @pytest.mark.parametrize("pid", ["tiny-a", "tiny-g", "tiny-r"])
    def test_zero_image_is_finite(self, pid):
        net = build(pid, 5)
        out = net.forward(np.zeros((2, *net.input_shape)))
        assert np.all(np.isfinite(out)) and out.shape == (2, 5)

    @pytest.mark.slow
    @pytest.mark.parametrize("pid", ["alexnet", "googlenet", "resnet50"])
    def test_full_size_zero_image_is_finite(self, pid):
        net = build(pid, 101)
        out = net.forward(np.zeros((1, *net.input_shape)))
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out.sum(), 1.0, atol=1e-12)


class TestNetwork:
    def test_residual_with_zero_weights_is_relu(self):
        net = Network.from_spec(parse_arch("I(4,4,3)->R(C(1,1,3)->C(3,1,3))->F(e)"), 2, seed=0)
        for name, t in net.named_params():
            if name.startswith("res1/conv"):
                t.value = np.zeros(t.shape) if name.endswith((".W", ".b")) else t.value
        x = np.random.default_rng(0).standard_normal((2, 4, 4, 3))
        out = net.features(x, "res1/relu")
        np.testing.assert_array_equal(out, np.maximum(x, 0.0))

    def test_init_is_seeded(self):
        a, b, c = build("tiny-g", 4, seed=1), build("tiny-g", 4, seed=1), build("tiny-g", 4, seed=2)
        assert _state_bytes(a) == _state_bytes(b)
        assert _state_bytes(a) != _state_bytes(c)

    def test_biases_start_at_zero(self):
        for name, t in build("tiny-a", 4).named_params():
            if name.endswith(".b"):
                assert not t.value.any()

    def test_input_shape_mismatch(self):
        net = build("tiny-a", 4)
        with pytest.raises(ValueError):
            net.forward(np.zeros((1, 16, 16, 3)))

    def test_checkpoint_round_trip(self, tmp_path):
        net = build("tiny-r", 4, seed=5)
        net.save(tmp_path / "n.ensw")
        other = build("tiny-r", 4, seed=6)
        other.load(tmp_path / "n.ensw")
        assert _state_bytes(other) == _state_bytes(net)

    def test_load_rejects_other_architecture(self, tmp_path):
        build("tiny-a", 4).save(tmp_path / "a.ensw")
        with pytest.raises(ValueError, match="mismatch"):
            build("tiny-g", 4).load(tmp_path / "a.ensw")


class TestReplaceHead:
    def test_1000_to_101_keeps_penultimate(self):
        net = build("tiny-a", 1000, seed=0)
        x = np.random.default_rng(1).uniform(-0.5, 0.5, (2, *net.input_shape))
        pen = net.graph.nodes[net.head_index - 1].label
        before = net.features(x, pen)
        new = replace_head(net, 101, seed=9)
        np.testing.assert_array_equal(new.features(x, pen), before)
        assert new.forward(x).shape == (2, 101)
        assert net.classes == 1000  # original untouched

    def test_width_50(self):
        net = replace_head(build("tiny-g", 101), 50, seed=0)
        assert net.forward(np.zeros((1, *net.input_shape))).shape == (1, 50)
        assert net.graph.shape_of("softmax") == (1, 1, 50)

    def test_deterministic(self):
        net = build("tiny-r", 10)
        assert _state_bytes(replace_head(net, 4, 3)) == _state_bytes(replace_head(net, 4, 3))

    def test_non_head_bitwise_preserved(self):
        net = build("tiny-r", 10, seed=4)
        new = replace_head(net, 3, seed=1)
        head = net.graph.head.label
        old, cur = _state_bytes(net), _state_bytes(new)
        for k in old:
            if not k.startswith(head + "."):
                assert cur[k] == old[k]

    def test_too_few_classes(self):
        with pytest.raises(ValueError):
            replace_head(build("tiny-a", 4), 1, seed=0)


class TestTrain:
    def test_loss_decreases(self, four_class):
        net = build("tiny-a", 4, seed=0)
        _, hist = train(net, four_class, default_schedule("tiny-a", seed=0))
        assert len(hist) == 16
        assert hist[-1] < hist[0]

    def test_zero_epochs_rejected(self):
        with pytest.raises(ValueError):
            default_schedule("tiny-a", epochs=0)

    def test_lr_zero_leaves_params(self, four_class):
        net = build("tiny-g", 4, seed=0)
        before = {n: t.value.tobytes() for n, t in net.named_params()}
        train(net, four_class, TrainSchedule(epochs=1, lr=0.0))
        assert {n: t.value.tobytes() for n, t in net.named_params()} == before

    def test_same_seed_bitwise_identical(self, four_class, tmp_path):
        sched = TrainSchedule(epochs=2, batch=16, seed=7)
        for i in range(2):
            train(build("tiny-r", 4, seed=1), four_class, sched)[0].save(tmp_path / f"{i}.ensw")
        assert (tmp_path / "0.ensw").read_bytes() == (tmp_path / "1.ensw").read_bytes()

    def test_jitter_runs(self, four_class):
        x, y = four_class
        _, hist = train(build("tiny-a", 4), (x[:8], y[:8]), TrainSchedule(epochs=1, jitter=True))
        assert np.isfinite(hist[0])

    def test_label_overflow(self, four_class):
        x, y = four_class
        with pytest.raises(ValueError, match="labels"):
            train(build("tiny-a", 3), (x, y), TrainSchedule(epochs=1))

    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            train(build("tiny-a", 3), (np.zeros((0, 32, 32, 3)), np.zeros(0, int)), TrainSchedule(epochs=1))


class TestExtractScores:
    def test_shape_and_rows(self):
        net = build("tiny-a", 101)
        x = np.random.default_rng(0).uniform(-0.5, 0.5, (5, *net.input_shape))
        s = extract_scores(net, x, batch=2)
        assert s.shape == (5, 101)
        np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_zero_head_gives_uniform(self):
        net = build("tiny-g", 7)
        head = net.layers[net.head_index]
        head.params["W"].value = np.zeros(head.params["W"].shape)
        s = extract_scores(net, np.random.default_rng(0).uniform(-0.5, 0.5, (3, *net.input_shape)))
        np.testing.assert_allclose(s, 1 / 7, rtol=0, atol=1e-15)

    def test_argmax_matches_predict(self):
        net = build("tiny-r", 6, seed=2)
        s = extract_scores(net, np.random.default_rng(3).uniform(-0.5, 0.5, (8, *net.input_shape)))
        for row in s:
            assert predict(row) == int(np.argmax(row)) + 1

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            extract_scores(build("tiny-a", 4), np.zeros((1, 8, 8, 3)))
