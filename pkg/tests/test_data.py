import numpy as np
import pytest

from mohn.data import (AugmentPolicy, VectorAugmentPolicy, apply_augment, augment_vector,
                       augment_view, gen_clusters, load_cifar10, read_batch_file, read_csv,
                       sample_augment_params, stratified_split, two_views, write_batch_file,
                       write_csv)
from mohn.data.augment import gaussian_kernel, resize_bilinear
from mohn.data.cifar import to_dataset
from mohn.errors import (InvalidImage, InvalidShape, LabelOutOfRange, MissingFile,
                         TruncatedRecord)
from mohn.rng import make_rng


def test_gen_clusters_balanced_and_deterministic():
    ds = gen_clusters(10, 100, 64, 0.1, 3)
    assert len(ds) == 1000
    assert np.array_equal(np.bincount(ds.labels), [100] * 10)
    assert ds.images.min() >= 0 and ds.images.max() <= 1
    again = gen_clusters(10, 100, 64, 0.1, 3)
    assert np.array_equal(ds.images, again.images) and np.array_equal(ds.labels, again.labels)


@pytest.mark.parametrize("args", [(10, 100, 64, 0.0, 3), (1, 10, 4, 0.1, 0), (2, 0, 4, 0.1, 0),
                                  (2, 3, 1, 0.1, 0)])
def test_gen_clusters_guards(args):
    with pytest.raises(InvalidShape):
        gen_clusters(*args)


def test_clusters_are_one_nn_separable():
    train, test = stratified_split(gen_clusters(10, 100, 64, 0.1, 3), 0.1, 3)
    a, b = train.flat(), test.flat()
    d = ((b[:, None, :] - a[None, :, :]) ** 2).sum(-1)
    acc = np.mean(train.labels[d.argmin(1)] == test.labels)
    assert acc > 0.99


def test_stratified_split():
    train, test = stratified_split(gen_clusters(10, 100, 8, 0.1, 0), 0.1, 5)
    assert len(train) == 900 and len(test) == 100
    assert np.array_equal(np.bincount(test.labels), [10] * 10)


def test_csv_round_trip(tmp_path):
    ds = gen_clusters(3, 4, 5, 0.2, 1)
    path = tmp_path / "d.csv"
    write_csv(ds, path)
    header = path.read_text().splitlines()[0]
    assert header == "label,x0,x1,x2,x3,x4"
    back = read_csv(path)
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)
    with pytest.raises(MissingFile):
        read_csv(tmp_path / "nope.csv")


def _cifar_bytes(n, rng, label_max=10):
    labels = rng.integers(0, label_max, n, dtype=np.uint8)
    pixels = rng.integers(0, 256, (n, 3072), dtype=np.uint8)
    return np.hstack([labels[:, None], pixels]).tobytes()


def test_cifar_full_size_batch(tmp_path, rng):
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(_cifar_bytes(10000, rng))
    assert path.stat().st_size == 30_730_000
    pixels, labels = read_batch_file(path)
    assert pixels.shape == (10000, 3072) and labels.shape == (10000,)


def test_cifar_round_trip_and_layout(tmp_path, rng):
    raw = _cifar_bytes(20, rng)
    src = tmp_path / "b.bin"
    src.write_bytes(raw)
    pixels, labels = read_batch_file(src)
    ds = to_dataset(pixels, labels)
    # planar R, G, B, each row-major 32 x 32
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(20, 3073)
    assert ds.images[0, 0, 1, 0] == rec[0, 1 + 1] / 255
    assert ds.images[0, 2, 0, 1] == rec[0, 1 + 1024 + 64] / 255
    assert ds.images[0, 31, 31, 2] == rec[0, 3072] / 255
    dst = tmp_path / "c.bin"
    write_batch_file(dst, ds)
    assert dst.read_bytes() == raw


def test_cifar_errors(tmp_path, rng):
    short = tmp_path / "short.bin"
    short.write_bytes(bytes(3072))
    with pytest.raises(TruncatedRecord):
        read_batch_file(short)
    bad = bytearray(_cifar_bytes(2, rng))
    bad[3073] = 10
    path = tmp_path / "bad.bin"
    path.write_bytes(bytes(bad))
    with pytest.raises(LabelOutOfRange):
        read_batch_file(path)
    with pytest.raises(MissingFile):
        load_cifar10(tmp_path)


def test_load_cifar10(tmp_path, rng):
    for i in range(1, 6):
        (tmp_path / f"data_batch_{i}.bin").write_bytes(_cifar_bytes(3, rng))
    (tmp_path / "test_batch.bin").write_bytes(_cifar_bytes(2, rng))
    train, test = load_cifar10(tmp_path)
    assert len(train) == 15 and len(test) == 2
    assert train.images.shape == (15, 32, 32, 3) and test.split == "test"


def test_identity_policy_is_normalization(rng):
    img = rng.random((6, 6, 3))
    mean, std = (0.4, 0.5, 0.6), (0.2, 0.25, 0.3)
    policy = AugmentPolicy.identity(mean, std)
    out = augment_view(img, policy, make_rng(0))
    np.testing.assert_array_equal(out, (img - np.array(mean)) / np.array(std))
    v1, v2 = two_views(img, policy, make_rng(0))
    assert np.array_equal(v1, out) and np.array_equal(v2, out)


def test_augment_deterministic_and_views_differ(rng):
    img = rng.random((8, 8, 3))
    a = augment_view(img, AugmentPolicy(), make_rng(9))
    b = augment_view(img, AugmentPolicy(), make_rng(9))
    assert np.array_equal(a, b)
    v1, v2 = two_views(img, AugmentPolicy(), make_rng(4))
    w1, w2 = two_views(img, AugmentPolicy(), make_rng(4))
    assert not np.array_equal(v1, v2)
    assert np.array_equal(v1, w1) and np.array_equal(v2, w2)


def test_grayscale_luma_1x1():
    img = np.array([[[0.2, 0.5, 0.9]]])
    policy = AugmentPolicy(crop_scale_range=(1.0, 1.0), crop_aspect_range=(1.0, 1.0),
                           jitter_prob=0.0, grayscale_prob=1.0, blur_prob=0.0, flip_prob=0.0)
    out = augment_view(img, policy, make_rng(0))
    expected = 0.299 * 0.2 + 0.587 * 0.5 + 0.114 * 0.9  # 0.4559
    np.testing.assert_allclose(out[0, 0], [expected] * 3, atol=1e-15)
    assert expected == pytest.approx(0.4559, abs=1e-12)


def test_augmented_values_stay_in_unit_interval(rng):
    img = rng.random((10, 10, 3))
    policy = AugmentPolicy()
    gen = make_rng(1)
    for _ in range(50):
        draw = sample_augment_params(img.shape, policy, gen)
        out = apply_augment(img, draw, policy)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_branch_frequencies():
    policy = AugmentPolicy()
    gen = make_rng(2024)
    n = 10_000
    draws = [sample_augment_params((32, 32, 3), policy, gen) for _ in range(n)]
    for p, hits in ((policy.flip_prob, sum(d.flip for d in draws)),
                    (policy.grayscale_prob, sum(d.grayscale for d in draws)),
                    (policy.blur_prob, sum(d.blur_sigma is not None for d in draws)),
                    (policy.jitter_prob, sum(d.jitter is not None for d in draws))):
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(hits - n * p) <= 3 * sigma
    sigmas = [d.blur_sigma for d in draws if d.blur_sigma is not None]
    assert 0.1 <= min(sigmas) and max(sigmas) <= 2.0
    jit = np.array([d.jitter for d in draws if d.jitter is not None])
    assert jit[:, :3].min() >= 0.6 and jit[:, :3].max() <= 1.4
    assert np.abs(jit[:, 3]).max() <= 0.1
    areas = np.array([d.crop[2] * d.crop[3] for d in draws]) / 1024
    assert areas.min() >= 0.15 and areas.max() <= 1.0


def test_invalid_image():
    with pytest.raises(InvalidImage):
        augment_view(np.full((4, 4, 3), 1.5), AugmentPolicy(), make_rng(0))
    with pytest.raises(InvalidImage):
        augment_view(np.zeros((4, 4)), AugmentPolicy(), make_rng(0))


def test_blur_kernel_and_resize():
    k = gaussian_kernel(1.0)
    assert len(k) == 5 and k.sum() == pytest.approx(1.0)
    assert len(gaussian_kernel(0.1)) == 3
    img = np.arange(12.0).reshape(2, 2, 3)
    assert np.array_equal(resize_bilinear(img, 2, 2), img)
    up = resize_bilinear(np.ones((3, 3, 1)), 7, 5)
    np.testing.assert_allclose(up, 1.0)


def test_vector_augmentation():
    x = np.full((4, 16), 0.5)
    pol = VectorAugmentPolicy.for_spread(0.1, mean=0.5, std=0.25)
    a = augment_vector(x, pol, make_rng(0))
    b = augment_vector(x, pol, make_rng(0))
    assert np.array_equal(a, b)
    assert pol.noise_sigma == 0.05
    zero_frac = np.mean(augment_vector(np.full((200, 50), 0.5), pol, make_rng(1)) == 0)
    assert 0.07 < zero_frac < 0.13
