import math

import numpy as np
import pytest

from summin import InvalidInputError
from summin.datagen import dump_dataset, gen_gpca, gen_mlr, gen_mnr, load_dataset
from summin.models import is_orthonormal, mlp_forward


def uniform_within_3sigma(labels, k):
    n = labels.size
    counts = np.bincount(labels, minlength=k)
    sigma = math.sqrt(n * (1 / k) * (1 - 1 / k))
    return np.all(np.abs(counts - n / k) <= 3 * sigma)


def test_gpca_points_on_subspaces():
    ds = gen_gpca(3, 5, 3, 500, seed=1)
    for i in range(ds.n):
        assert np.linalg.norm(ds.inputs[i] @ ds.truth[ds.labels[i]]) <= 1e-10
    for B in ds.meta["bases"]:
        assert np.max(np.abs(B.T @ B - np.eye(2))) <= 1e-12
    assert all(is_orthonormal(A) for A in ds.truth)


def test_gpca_validation_and_labels():
    with pytest.raises(InvalidInputError):
        gen_gpca(2, 2, 1, 10, 0)
    ds = gen_gpca(4, 4, 2, 10_000, seed=3)
    assert uniform_within_3sigma(ds.labels, 4)


def test_seed_determinism():
    a, b = gen_gpca(2, 4, 2, 50, 9), gen_gpca(2, 4, 2, 50, 9)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.labels, b.labels)
    a, b = gen_mlr(3, 4, 50, 0.01, 9), gen_mlr(3, 4, 50, 0.01, 9)
    assert np.array_equal(a.targets, b.targets)
    assert not np.array_equal(a.targets, gen_mlr(3, 4, 50, 0.01, 10).targets)


def test_changing_n_keeps_truth():
    assert np.array_equal(gen_mlr(3, 4, 50, 0.01, 5).truth, gen_mlr(3, 4, 500, 0.01, 5).truth)


def test_mlr_noise():
    ds = gen_mlr(3, 4, 200, 0.0, 2)
    res = ds.targets - np.einsum("nd,nd->n", ds.inputs, ds.truth[ds.labels])
    assert np.array_equal(res, np.zeros(200))
    ds = gen_mlr(3, 4, 10_000, 0.01, 2)
    res = ds.targets - np.einsum("nd,nd->n", ds.inputs, ds.truth[ds.labels])
    assert abs(res.std() - 0.01) <= 0.001
    with pytest.raises(InvalidInputError):
        gen_mlr(2, 2, 10, -1.0, 0)


def test_mnr_targets_and_test_split():
    ds = gen_mnr(3, 4, 3, 300, sigma=0.0, seed=6, n_test=40)
    for j in range(3):
        sel = ds.labels == j
        assert np.array_equal(ds.targets[sel], mlp_forward(ds.truth[j], ds.inputs[sel], 4, 3))
    assert ds.test.n == 40
    again = gen_mnr(3, 4, 3, 300, sigma=0.0, seed=6, n_test=40)
    assert np.array_equal(ds.test.inputs, again.test.inputs)
    assert not np.array_equal(ds.test.inputs, ds.inputs[:40])
    big = gen_mnr(5, 2, 2, 10_000, seed=1, n_test=0)
    assert big.test is None and uniform_within_3sigma(big.labels, 5)


@pytest.mark.parametrize("make", [
    lambda: gen_gpca(2, 4, 2, 20, 1),
    lambda: gen_mlr(2, 3, 20, 0.01, 1),
    lambda: gen_mnr(2, 3, 2, 20, 0.01, 1, n_test=5),
])
def test_dump_load_roundtrip(tmp_path, make):
    ds = make()
    path = tmp_path / "ds.jsonl"
    dump_dataset(ds, path)
    back = load_dataset(path)
    assert back.kind == ds.kind and back.k == ds.k
    assert np.array_equal(back.inputs, ds.inputs)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.truth, ds.truth)
    if ds.targets is not None:
        assert np.array_equal(back.targets, ds.targets)
    if ds.test is not None:
        assert np.array_equal(back.test.targets, ds.test.targets)
    first = path.read_text().splitlines()[1]
    assert first.startswith('{"i": 0, "label": ')
    dump_dataset(back, tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()
