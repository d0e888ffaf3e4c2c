"""Synthetic question-answering data with a planted trilinear scoring rule.

Every channel row carries a constant 1 in coordinate 0 (a bias feature) and
the remaining coordinates are an example-level latent vector plus per-channel
noise.  A hidden tensor ``core`` of shape ``(d_v, d_q, d_a)`` scores a triple
through the channel means,

    score(V, Q, A) = core x_1 mean(V) x_2 mean(Q) x_3 mean(A),

and the label is the highest-scoring answer.  ``core`` is zero on every slice
that touches a bias coordinate, so the score has no pairwise part: averaged
over questions it vanishes for every (V, A) pair.

Question types own disjoint blocks of question coordinates.  A question of
type ``t`` is non-zero only in its block, and the block's part of ``core`` has
CP rank ``core_rank * (t + 1)``, so later (and rarer, under a skewed type mix)
types are harder to learn.

Ties between equal scores are broken uniformly at random with the
generator's own stream; they only occur for a degenerate (e.g. zero) core.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..errors import ConfigError, DimensionError

__all__ = [
    "DataSpec",
    "Dataset",
    "planted_core",
    "planted_scores",
    "planted_predict",
    "generate_dataset",
    "generate_splits",
    "write_jsonl",
    "read_jsonl",
]

DATASET_FORMAT = "trifuse-dataset/1"


@dataclass(frozen=True)
class DataSpec:
    task: str = "mc"
    n_train: int = 2000
    n_test: int = 500
    channels: tuple = (4, 4, 4)
    dims: tuple = (8, 8, 8)
    n_answers: int = 4
    n_classes: int = 8
    type_mix: tuple = (0.5, 0.3, 0.2)
    core_rank: int = 1
    channel_noise: float = 0.5
    zero_core: bool = False

    def __post_init__(self):
        if self.task not in ("mc", "ffoe"):
            raise ConfigError(f"task must be 'mc' or 'ffoe', got {self.task!r}")
        if len(self.channels) != 3 or len(self.dims) != 3:
            raise ConfigError("channels and dims need three entries (V, Q, A)")
        if min(self.channels) < 1 or min(self.dims) < 2:
            raise ConfigError("channel counts must be >= 1 and dims >= 2 (coordinate 0 is the bias)")
        if self.n_train < 0 or self.n_test < 0 or self.n_train + self.n_test < 1:
            raise ConfigError("need at least one example")
        n_types = len(self.type_mix)
        if n_types < 1 or any(w <= 0 for w in self.type_mix):
            raise ConfigError("type_mix must hold positive weights")
        if self.dims[1] - 1 < n_types:
            raise ConfigError(f"d_q - 1 = {self.dims[1] - 1} question coordinates cannot host {n_types} types")
        if self.core_rank < 1:
            raise ConfigError("core_rank must be >= 1")
        if self.task == "mc" and self.n_answers < 2:
            raise ConfigError("multiple choice needs at least two answers")
        if self.task == "ffoe" and self.n_classes < 2:
            raise ConfigError("open-ended classification needs at least two classes")

    @property
    def n_types(self) -> int:
        return len(self.type_mix)

    def type_ranks(self) -> list[int]:
        return [self.core_rank * (t + 1) for t in range(self.n_types)]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k in ("channels", "dims", "type_mix"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d) -> "DataSpec":
        d = dict(d)
        for k in ("channels", "dims", "type_mix"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass(eq=False)
class Dataset:
    """Examples stacked into arrays.

    ``answers`` has shape ``(N, n_answers, n_a, d_a)`` for multiple choice and
    ``(N, 1, n_a, d_a)`` (the right answer only) for open-ended data.
    """

    header: dict
    v: np.ndarray
    q: np.ndarray
    answers: np.ndarray
    labels: np.ndarray
    qtypes: np.ndarray = field(default_factory=lambda: np.array([], dtype=object))

    def __len__(self):
        return len(self.labels)

    @property
    def task(self) -> str:
        return self.header["task"]

    @property
    def type_names(self) -> list[str]:
        return list(self.header["type_names"])

    @property
    def n_classes(self) -> int:
        return self.header["n_classes"] if self.task == "ffoe" else self.answers.shape[1]

    @property
    def true_answers(self) -> np.ndarray:
        """Right-answer channels, shape ``(N, n_a, d_a)``."""
        if self.task == "ffoe":
            return self.answers[:, 0]
        return self.answers[np.arange(len(self)), self.labels]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.header, self.v[idx], self.q[idx], self.answers[idx], self.labels[idx],
                       self.qtypes[idx])

    def with_header(self, **updates) -> "Dataset":
        return Dataset({**self.header, **updates}, self.v, self.q, self.answers, self.labels, self.qtypes)


def _question_blocks(d_q: int, n_types: int) -> list[np.ndarray]:
    return [b + 1 for b in np.array_split(np.arange(d_q - 1), n_types)]


def planted_core(spec: DataSpec, rng: np.random.Generator) -> np.ndarray:
    d_v, d_q, d_a = spec.dims
    core = np.zeros((d_v, d_q, d_a))
    if spec.zero_core:
        return core
    for block, rank in zip(_question_blocks(d_q, spec.n_types), spec.type_ranks()):
        u = rng.normal(size=(d_v - 1, rank))
        w = rng.normal(size=(len(block), rank))
        x = rng.normal(size=(d_a - 1, rank))
        core[1:, block[0]:block[-1] + 1, 1:] += np.einsum("ar,br,cr->abc", u, w, x)
    return core


def planted_scores(core, v, q, answers) -> np.ndarray:
    """Scores of shape ``(N, n_answers)`` for channel arrays ``(N, n, d)`` and ``(N, K, n_a, d_a)``."""
    core = np.asarray(core, dtype=np.float64)
    vbar = np.asarray(v).mean(axis=-2)
    qbar = np.asarray(q).mean(axis=-2)
    abar = np.asarray(answers).mean(axis=-2)
    return np.einsum("abc,na,nb,nkc->nk", core, vbar, qbar, abar)


def planted_predict(ds: Dataset) -> np.ndarray:
    """Replay the planted rule as a classifier (first index wins ties)."""
    core = np.asarray(ds.header["planted_core"], dtype=np.float64)
    if ds.task == "ffoe":
        vocab = np.asarray(ds.header["answer_vocabulary"], dtype=np.float64)
        answers = np.broadcast_to(vocab, (len(ds), *vocab.shape))
    else:
        answers = ds.answers
    return planted_scores(core, ds.v, ds.q, answers).argmax(axis=1)


def _channels(rng, n_examples, n, d, noise, active=None) -> np.ndarray:
    latent = rng.normal(size=(n_examples, 1, d - 1))
    x = latent + noise * rng.normal(size=(n_examples, n, d - 1))
    if active is not None:
        x = x * active[:, None, :]
    return np.concatenate([np.ones((n_examples, n, 1)), x], axis=2)


def _tie_break(scores, rng) -> np.ndarray:
    labels = np.empty(len(scores), dtype=np.int64)
    for e, row in enumerate(scores):
        best = np.flatnonzero(row == row.max())
        labels[e] = best[rng.integers(len(best))]
    return labels


def generate_dataset(spec: DataSpec, seed: int) -> Dataset:
    """All ``n_train + n_test`` examples, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    (n_v, n_q, n_a), (d_v, d_q, d_a) = spec.channels, spec.dims
    N = spec.n_train + spec.n_test
    core = planted_core(spec, rng)
    mix = np.asarray(spec.type_mix, dtype=np.float64)
    types = rng.choice(spec.n_types, size=N, p=mix / mix.sum())
    blocks = _question_blocks(d_q, spec.n_types)
    active = np.zeros((N, d_q - 1))
    for t, block in enumerate(blocks):
        active[types == t, block[0] - 1:block[-1]] = 1.0

    v = _channels(rng, N, n_v, d_v, spec.channel_noise)
    q = _channels(rng, N, n_q, d_q, spec.channel_noise, active)
    header = {
        "format": DATASET_FORMAT,
        "task": spec.task,
        "seed": int(seed),
        "spec": spec.to_dict(),
        "type_names": [f"type{t}" for t in range(spec.n_types)],
        "planted_core": core.tolist(),
    }
    if spec.task == "mc":
        answers = _channels(rng, N * spec.n_answers, n_a, d_a, spec.channel_noise)
        answers = answers.reshape(N, spec.n_answers, n_a, d_a)
        labels = _tie_break(planted_scores(core, v, q, answers), rng)
    else:
        vocab = _channels(rng, spec.n_classes, n_a, d_a, spec.channel_noise)
        scores = planted_scores(core, v, q, np.broadcast_to(vocab, (N, *vocab.shape)))
        labels = _tie_break(scores, rng)
        answers = vocab[labels][:, None]
        header["n_classes"] = spec.n_classes
        header["answer_vocabulary"] = vocab.tolist()
    qtypes = np.array(header["type_names"], dtype=object)[types]
    return Dataset(header, v, q, answers, labels, qtypes)


def generate_splits(spec: DataSpec, seed: int) -> tuple[Dataset, Dataset]:
    ds = generate_dataset(spec, seed)
    train = ds.subset(np.arange(spec.n_train)).with_header(split="train")
    test = ds.subset(np.arange(spec.n_train, len(ds))).with_header(split="test")
    return train, test


def write_jsonl(ds: Dataset, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(ds.header, sort_keys=True) + "\n")
        for e in range(len(ds)):
            row = {"v": ds.v[e].tolist(), "q": ds.q[e].tolist(), "answers": ds.answers[e].tolist(),
                   "label": int(ds.labels[e]), "qtype": str(ds.qtypes[e])}
            fh.write(json.dumps(row) + "\n")
    return path


def read_jsonl(path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    if header.get("format") != DATASET_FORMAT:
        raise ValueError(f"{path}: not a {DATASET_FORMAT} file")
    rows = [json.loads(ln) for ln in lines[1:]]
    if not rows:
        raise ValueError(f"{path}: dataset has a header but no examples")
    try:
        v = np.array([r["v"] for r in rows], dtype=np.float64)
        q = np.array([r["q"] for r in rows], dtype=np.float64)
        answers = np.array([r["answers"] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise DimensionError(f"{path}: ragged example arrays ({exc})") from None
    labels = np.array([r["label"] for r in rows], dtype=np.int64)
    qtypes = np.array([r["qtype"] for r in rows], dtype=object)
    return Dataset(header, v, q, answers, labels, qtypes)
