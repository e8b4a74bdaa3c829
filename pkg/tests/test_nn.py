import numpy as np
import pytest

from eusml.cnn import (
    ToyCnn,
    TrainConfig,
    grad_cam,
    gradient_check,
    load_checkpoint,
    overlay,
    predict_frames,
    save_checkpoint,
    softmax,
    train,
)
from eusml.cnn.gradcam import Heatmap
from eusml.cnn.layers import Conv2D, GlobalAvgPool, MaxPool2, cross_entropy
from eusml.dataset import (
    LabeledFrame,
    NormStats,
    SplitAssignment,
    Station,
    build_manifest,
    compute_norm_stats,
)
from eusml.enhance import EnhanceConfig
from eusml.imaging import ImageBuffer, write_png


def tensorize(images, stats):
    x = np.stack(
        [(im.data[:, :, 0].astype(np.float64) / 255.0 - stats.mean[0]) / stats.std[0] for im in images]
    )
    return x[:, None, :, :]


def brightness_dataset(n=40, seed=60):
    """Two classes separable by mean intensity (a linear functional of pixels)."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for i in range(n):
        level = 60 if i % 2 == 0 else 190
        images.append(
            ImageBuffer.from_array(np.clip(level + rng.normal(0, 10, (64, 64)), 0, 255))
        )
        labels.append(i % 2)
    stats = compute_norm_stats(images)
    return tensorize(images, stats), np.array(labels)


# ---------------------------------------------------------------------------
# forward
# ---------------------------------------------------------------------------

def test_zeroed_dense_gives_uniform_softmax():
    model = ToyCnn(num_classes=4, seed=0)
    model.dense.w[:] = 0.0
    model.dense.b[:] = 0.0
    x = np.random.default_rng(0).normal(size=(3, 1, 16, 16))
    probs = model.predict_proba(x)
    np.testing.assert_allclose(probs, 0.25, atol=1e-12)
    # argmax ties break toward the lowest class index
    np.testing.assert_array_equal(model.predict(x), 0)


def test_identical_inputs_identical_logits():
    model = ToyCnn(num_classes=3, seed=1)
    x = np.random.default_rng(1).normal(size=(1, 1, 16, 16))
    batch = np.repeat(x, 4, axis=0)
    logits, _ = model.forward(batch)
    for row in logits[1:]:
        np.testing.assert_array_equal(row, logits[0])


def test_conv_layer_matches_hand_convolution():
    rng = np.random.default_rng(2)
    conv = Conv2D(1, 2, 3, rng)
    x = rng.normal(size=(1, 1, 8, 8))
    out = conv.forward(x)
    padded = np.pad(x[0, 0], 1)
    for oc in range(2):
        for y in range(8):
            for xx in range(8):
                want = (padded[y:y + 3, xx:xx + 3] * conv.w[oc, 0]).sum() + conv.b[oc]
                assert out[0, oc, y, xx] == pytest.approx(want, abs=1e-12)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(3)
    logits = rng.normal(0, 50, (20, 5))
    np.testing.assert_allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-6)


def test_forward_shape_validation():
    model = ToyCnn(num_classes=3, seed=0)
    with pytest.raises(ValueError):
        model.forward(np.zeros((2, 3, 16, 16)))
    with pytest.raises(ValueError):
        ToyCnn(num_classes=1)


def test_parameter_count_is_desk_scale():
    assert ToyCnn(num_classes=3).param_count() < 10**5


# ---------------------------------------------------------------------------
# backprop
# ---------------------------------------------------------------------------

def test_gradient_check_passes():
    rng = np.random.default_rng(100)
    model = ToyCnn(num_classes=3, seed=1)
    x = rng.normal(0, 1, (2, 1, 16, 16))
    y = np.array([0, 2])
    assert gradient_check(model, x, y, n_checks=200, seed=0) < 1e-4


def test_gradient_check_catches_sign_flip():
    rng = np.random.default_rng(101)
    model = ToyCnn(num_classes=3, seed=1)
    x = rng.normal(0, 1, (2, 1, 16, 16))
    y = np.array([1, 2])
    original = model.conv2.backward

    def corrupted(grad_out):
        result = original(grad_out)
        model.conv2.gw = -model.conv2.gw
        return result

    model.conv2.backward = corrupted
    assert gradient_check(model, x, y, n_checks=120, seed=0) > 0.1


def test_gradient_check_degenerate_inputs_finite():
    model = ToyCnn(num_classes=2, seed=0)
    for _, value, _ in model.parameters():
        value[:] = 0.0
    err = gradient_check(model, np.zeros((1, 1, 16, 16)), np.array([0]), n_checks=40)
    assert np.isfinite(err)


def test_maxpool_routes_to_single_position():
    pool = MaxPool2()
    x = np.array([[[[5.0, 5.0], [5.0, 5.0]]]])  # full tie
    pool.forward(x)
    grad = pool.backward(np.array([[[[1.0]]]]))
    assert grad.sum() == 1.0
    assert (grad != 0).sum() == 1  # exactly one window position
    # distinct values route to the max
    x2 = np.array([[[[1.0, 9.0], [3.0, 2.0]]]])
    pool.forward(x2)
    grad2 = pool.backward(np.array([[[[1.0]]]]))
    np.testing.assert_array_equal(grad2[0, 0], [[0.0, 1.0], [0.0, 0.0]])


def test_global_avg_pool_matches_naive_mean():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 5, 8, 8))
    out = GlobalAvgPool().forward(x)
    naive = np.array([[x[n, c].sum() / 64.0 for c in range(5)] for n in range(3)])
    np.testing.assert_allclose(out, naive, atol=1e-12)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def test_lr_zero_leaves_parameters_unchanged():
    x, y = brightness_dataset(n=8)
    model = ToyCnn(num_classes=2, seed=0)
    before = {name: value.copy() for name, value, _ in model.parameters()}
    train(model, x, y, TrainConfig(lr=0.0, epochs=3, seed=0))
    for name, value, _ in model.parameters():
        np.testing.assert_array_equal(value, before[name])


def test_training_is_bit_deterministic():
    x, y = brightness_dataset(n=16)

    def run():
        model = ToyCnn(num_classes=2, seed=3)
        _, history = train(model, x, y, TrainConfig(epochs=3, seed=3))
        return {name: value.copy() for name, value, _ in model.parameters()}, history

    params_a, hist_a = run()
    params_b, hist_b = run()
    assert hist_a == hist_b
    for name in params_a:
        np.testing.assert_array_equal(params_a[name], params_b[name])


def test_full_batch_descent_loss_non_increasing():
    x, y = brightness_dataset(n=40)
    cfg = TrainConfig(lr=0.01, momentum=0.0, batch_size=40, epochs=12, seed=0)
    _, history = train(ToyCnn(num_classes=2, seed=0), x, y, cfg)
    losses = [h["loss"] for h in history]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_memorizes_ten_images():
    x, y = brightness_dataset(n=10, seed=61)
    model, _ = train(ToyCnn(num_classes=2, seed=1), x, y, TrainConfig(epochs=25, seed=1))
    np.testing.assert_array_equal(model.predict(x), y)


def test_train_validation():
    x, y = brightness_dataset(n=8)
    with pytest.raises(ValueError):
        train(ToyCnn(2, seed=0), x[:0], y[:0], TrainConfig(epochs=1))
    with pytest.raises(ValueError, match="2 classes"):
        train(ToyCnn(2, seed=0), x, np.zeros(8, dtype=np.int64), TrainConfig(epochs=1))


# ---------------------------------------------------------------------------
# grad-cam
# ---------------------------------------------------------------------------

def test_grad_cam_analytic_single_channel():
    model = ToyCnn(num_classes=2, seed=5)
    h = w = 16  # conv3 resolution for 64x64 input
    x = np.random.default_rng(5).normal(0, 1, (1, 1, 64, 64))
    _, cache = model.forward(x)
    channel = int(cache["conv3"][0].sum(axis=(1, 2)).argmax())  # an active channel
    model.dense.w[:] = 0.0
    model.dense.w[channel, 0] = h * w  # logit0 = sum of that conv3 feature map
    model.dense.b[:] = 0.0
    activation = cache["conv3"][0, channel]
    cam = grad_cam(model, x, target_class=0, layer="conv3")
    expected = np.maximum(activation, 0.0)
    assert expected.max() > 0
    np.testing.assert_allclose(cam.values, expected / expected.max(), atol=1e-9)


def test_grad_cam_all_negative_combination_is_zero():
    model = ToyCnn(num_classes=2, seed=6)
    model.dense.w[:] = -1.0
    model.dense.b[:] = 0.0
    x = np.random.default_rng(6).normal(0, 1, (1, 1, 64, 64))
    cam = grad_cam(model, x, target_class=0)
    assert (cam.values == 0.0).all()


def test_grad_cam_invariants_and_errors():
    model = ToyCnn(num_classes=3, seed=7)
    x = np.random.default_rng(7).normal(0, 1, (1, 1, 64, 64))
    cam = grad_cam(model, x, target_class=1)
    assert (cam.values >= 0).all()
    if cam.values.any():
        assert cam.values.max() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        grad_cam(model, x, target_class=3)
    with pytest.raises(ValueError):
        grad_cam(model, x, target_class=0, layer="conv9")


def test_grad_cam_earlier_layer_resolution():
    model = ToyCnn(num_classes=2, seed=8)
    x = np.random.default_rng(8).normal(0, 1, (1, 1, 64, 64))
    cam1 = grad_cam(model, x, 0, layer="conv1")
    cam2 = grad_cam(model, x, 0, layer="conv2")
    assert (cam1.height, cam1.width) == (64, 64)
    assert (cam2.height, cam2.width) == (32, 32)


# ---------------------------------------------------------------------------
# overlay
# ---------------------------------------------------------------------------

def test_overlay_endpoints_and_midpoint():
    gray = ImageBuffer.from_array(np.full((8, 8), 100))
    zero = Heatmap(8, 8, np.zeros((8, 8)))
    ones = Heatmap(8, 8, np.ones((8, 8)))
    mid = Heatmap(8, 8, np.full((8, 8), 0.5))
    alpha = 0.4
    out0 = overlay(zero, gray, alpha)
    want0 = np.floor(np.array([0.6 * 100, 0.6 * 100, 0.6 * 100 + 0.4 * 255]) + 0.5)
    np.testing.assert_array_equal(out0.data[0, 0], want0.astype(np.uint8))
    out1 = overlay(ones, gray, alpha)
    want1 = np.floor(np.array([0.6 * 100 + 0.4 * 255, 0.6 * 100, 0.6 * 100]) + 0.5)
    np.testing.assert_array_equal(out1.data[0, 0], want1.astype(np.uint8))
    outm = overlay(mid, gray, alpha)
    wantm = np.floor(
        np.array([0.6 * 100 + 0.4 * 127.5, 0.6 * 100, 0.6 * 100 + 0.4 * 127.5]) + 0.5
    )
    np.testing.assert_array_equal(outm.data[0, 0], wantm.astype(np.uint8))
    assert out0.channels == 3


def test_overlay_upsamples_and_validates():
    img = ImageBuffer.from_array(np.full((32, 32), 50))
    cam = Heatmap(8, 8, np.ones((8, 8)))
    out = overlay(cam, img)
    assert (out.height, out.width) == (32, 32)
    with pytest.raises(ValueError):
        overlay(cam, img, alpha=1.5)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model = ToyCnn(num_classes=3, seed=9)
    model.norm_stats = NormStats(mean=(0.3,), std=(0.2,))
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    assert back.num_classes == 3
    assert back.norm_stats == model.norm_stats
    for (an, av, _), (bn, bv, _) in zip(model.parameters(), back.parameters()):
        assert an == bn
        np.testing.assert_array_equal(av, bv)


def test_checkpoint_refuses_bad_version_and_magic(tmp_path):
    model = ToyCnn(num_classes=2, seed=0)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 99  # version byte
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(bad)
    raw2 = bytearray(path.read_bytes())
    raw2[:4] = b"NOPE"
    bad2 = tmp_path / "bad2.ckpt"
    bad2.write_bytes(bytes(raw2))
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(bad2)


def test_checkpoint_bytes_deterministic(tmp_path):
    model = ToyCnn(num_classes=3, seed=10)
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(model, a)
    save_checkpoint(model, b)
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# manifest-backed prediction
# ---------------------------------------------------------------------------

def tiny_manifest(tmp_path):
    rng = np.random.default_rng(11)
    labeled = []
    for proc, split_station in (("pa", Station.S1), ("pb", Station.S2), ("pc", Station.S3)):
        for i in range(3):
            img = ImageBuffer.from_array(rng.integers(0, 256, (64, 64)))
            rel = f"{proc}/{i}.png"
            write_png(img, tmp_path / rel)
            labeled.append(LabeledFrame(proc, rel, split_station))
    splits = SplitAssignment(frozenset({"pa", "pb"}), frozenset({"pc"}), seed=0)
    stats = NormStats(mean=(0.5,), std=(0.25,))
    return build_manifest(labeled, splits, stats, EnhanceConfig())


def test_predict_frames_order_and_validation(tmp_path):
    manifest = tiny_manifest(tmp_path)
    model = ToyCnn(num_classes=3, seed=0)
    y, preds = predict_frames(model, manifest, "test", root=tmp_path)
    assert y.shape == preds.shape == (3,)
    np.testing.assert_array_equal(y, [Station.S3.index] * 3)
    small = ToyCnn(num_classes=2, seed=0)
    with pytest.raises(ValueError, match="classes"):
        predict_frames(small, manifest, "test", root=tmp_path)
