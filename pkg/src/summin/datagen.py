"""Seeded synthetic datasets with ground truth.

Each generator splits its seed into role substreams (``params``, ``labels``,
``data``, ``noise``; ``test-*`` for held-out sets) so that, e.g., changing
``N`` never perturbs the ground-truth parameters.

Line-delimited dump format (one JSON object per line):

1. header: ``{"kind", "k", "n", "meta", "truth"}``
2. one record per sample, keys in this order: ``{"i", "label", "x", "b"}``
   where ``x`` is the input/point and ``b`` the target (``null`` for GPCA).
3. optional held-out set: a line ``{"test": n_test}`` followed by its records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import InvalidInputError
from .models import mlp_forward, mlp_size, sym_eig
from .rng import Rng


@dataclass
class LabeledDataset:
    kind: str  # "gpca" | "mlr" | "mnr"
    k: int
    inputs: np.ndarray  # (N, d): GPCA points or regression inputs
    labels: np.ndarray  # (N,) ground-truth cluster ids in [0, k)
    truth: np.ndarray  # ground-truth parameters, leading axis k
    targets: Optional[np.ndarray] = None  # (N,) regression targets
    meta: dict = field(default_factory=dict)
    test: Optional["LabeledDataset"] = None

    @property
    def n(self) -> int:
        return self.inputs.shape[0]


def _orthonormal_pair(rng: Rng, d: int) -> np.ndarray:
    """Gram-Schmidt on two Gaussian vectors; returns a ``d x 2`` basis."""
    while True:
        g = rng.normal((2, d))
        e1 = g[0] / np.linalg.norm(g[0])
        v = g[1] - (g[1] @ e1) * e1
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            e2 = v / nv
            # one re-orthogonalisation pass keeps the pair orthonormal to ~1e-16
            e2 = e2 - (e2 @ e1) * e1
            return np.stack([e1, e2 / np.linalg.norm(e2)], axis=1)


def complement_frame(basis: np.ndarray, r: int) -> np.ndarray:
    """``d x r`` orthonormal frame orthogonal to the columns of ``basis``."""
    P = basis @ basis.T
    return sym_eig(P).eigenvectors[:, :r]


def gen_gpca(k: int, d: int, r: int, n: int, seed: int) -> LabeledDataset:
    """Points on ``k`` random 2-planes in ``R^d``; ``truth`` holds complement frames."""
    if d < 3:
        raise InvalidInputError("GPCA data needs d >= 3")
    if not 1 <= r <= d - 2:
        raise InvalidInputError("co-dimension must satisfy 1 <= r <= d-2")
    root = Rng(seed)
    prng = root.substream("params")
    bases = np.stack([_orthonormal_pair(prng, d) for _ in range(k)])
    labels = root.substream("labels").integers(k, n)
    xi = root.substream("data").normal((n, 2))
    Y = np.einsum("nc,ndc->nd", xi, bases[labels])
    frames = np.stack([complement_frame(B, r) for B in bases])
    return LabeledDataset("gpca", k, Y, labels, frames,
                          meta={"d": d, "r": r, "seed": seed, "bases": bases})


def gen_mlr(k: int, d: int, n: int, sigma: float = 0.01, seed: int = 0) -> LabeledDataset:
    """``b_i = a_i^T x+_{c_i} + eps_i`` with Gaussian ``x+``, ``a_i`` and noise."""
    if sigma < 0:
        raise InvalidInputError("sigma must be non-negative")
    root = Rng(seed)
    truth = root.substream("params").normal((k, d))
    labels = root.substream("labels").integers(k, n)
    A = root.substream("data").normal((n, d))
    noise = sigma * root.substream("noise").normal(n) if sigma > 0 else np.zeros(n)
    b = np.einsum("nd,nd->n", A, truth[labels]) + noise
    return LabeledDataset("mlr", k, A, labels, truth, b,
                          meta={"d": d, "sigma": sigma, "seed": seed})


def _mnr_split(root: Rng, prefix: str, truth, k, d_in, d_hidden, n, sigma):
    labels = root.substream(prefix + "labels").integers(k, n)
    A = root.substream(prefix + "data").normal((n, d_in))
    noise = sigma * root.substream(prefix + "noise").normal(n) if sigma > 0 else np.zeros(n)
    b = np.empty(n)
    for j in range(k):
        sel = labels == j
        b[sel] = mlp_forward(truth[j], A[sel], d_in, d_hidden)
    return labels, A, b + noise


def gen_mnr(k: int, d_in: int, d_hidden: int, n: int, sigma: float = 0.01, seed: int = 0,
            n_test: int = 200) -> LabeledDataset:
    """Mixed two-layer-network regression with Gaussian ground-truth weights."""
    if min(k, d_in, d_hidden, n) < 1 or n_test < 0:
        raise InvalidInputError("dimensions must be positive")
    root = Rng(seed)
    truth = root.substream("params").normal((k, mlp_size(d_in, d_hidden)))
    meta = {"d_in": d_in, "d_hidden": d_hidden, "sigma": sigma, "seed": seed}
    labels, A, b = _mnr_split(root, "", truth, k, d_in, d_hidden, n, sigma)
    ds = LabeledDataset("mnr", k, A, labels, truth, b, meta=meta)
    if n_test:
        tl, tA, tb = _mnr_split(root, "test-", truth, k, d_in, d_hidden, n_test, sigma)
        ds.test = LabeledDataset("mnr", k, tA, tl, truth, tb, meta=dict(meta))
    return ds


# ---------------------------------------------------------------------------
# dump / load


def _jsonable_meta(meta: dict) -> dict:
    return {key: (val.tolist() if isinstance(val, np.ndarray) else val) for key, val in meta.items()}


def _records(ds: LabeledDataset):
    for i in range(ds.n):
        b = None if ds.targets is None else float(ds.targets[i])
        yield {"i": i, "label": int(ds.labels[i]), "x": ds.inputs[i].tolist(), "b": b}


def dump_dataset(ds: LabeledDataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        header = {"kind": ds.kind, "k": ds.k, "n": ds.n,
                  "meta": _jsonable_meta(ds.meta), "truth": ds.truth.tolist()}
        fh.write(json.dumps(header) + "\n")
        for rec in _records(ds):
            fh.write(json.dumps(rec) + "\n")
        if ds.test is not None:
            fh.write(json.dumps({"test": ds.test.n}) + "\n")
            for rec in _records(ds.test):
                fh.write(json.dumps(rec) + "\n")


def _build(kind, k, truth, meta, recs):
    X = np.array([r["x"] for r in recs], dtype=float)
    labels = np.array([r["label"] for r in recs], dtype=np.int64)
    b = None
    if recs and recs[0]["b"] is not None:
        b = np.array([r["b"] for r in recs], dtype=float)
    return LabeledDataset(kind, k, X, labels, truth, b, meta=meta)


def load_dataset(path) -> LabeledDataset:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    meta = header["meta"]
    if "bases" in meta:
        meta["bases"] = np.asarray(meta["bases"])
    truth = np.asarray(header["truth"], dtype=float)
    train, test = [], None
    for line in lines[1:]:
        rec = json.loads(line)
        if "test" in rec:
            test = []
            continue
        (train if test is None else test).append(rec)
    ds = _build(header["kind"], header["k"], truth, meta, train)
    if len(train) != header["n"]:
        raise InvalidInputError("record count does not match header")
    if test is not None:
        ds.test = _build(header["kind"], header["k"], truth, dict(meta), test)
    return ds
