import filecmp

import numpy as np
import pytest

from trifuse.errors import ConfigError
from trifuse.tasks.data import (DataSpec, generate_dataset, generate_splits, planted_predict, planted_scores,
                                read_jsonl, write_jsonl)


def test_same_seed_gives_identical_files(tmp_path):
    spec = DataSpec(n_train=30, n_test=10)
    write_jsonl(generate_dataset(spec, 3), tmp_path / "a.jsonl")
    write_jsonl(generate_dataset(spec, 3), tmp_path / "b.jsonl")
    write_jsonl(generate_dataset(spec, 4), tmp_path / "c.jsonl")
    assert filecmp.cmp(tmp_path / "a.jsonl", tmp_path / "b.jsonl", shallow=False)
    assert not filecmp.cmp(tmp_path / "a.jsonl", tmp_path / "c.jsonl", shallow=False)


@pytest.mark.parametrize("task", ["mc", "ffoe"])
def test_planted_rule_is_bayes_optimal(task):
    ds = generate_dataset(DataSpec(task=task, n_train=300, n_test=0), 0)
    assert np.mean(planted_predict(ds) == ds.labels) == 1.0


def test_zero_core_labels_are_uniform():
    ds = generate_dataset(DataSpec(n_train=4000, n_test=0, zero_core=True), 1)
    freq = np.bincount(ds.labels, minlength=4) / len(ds)
    assert np.all(np.abs(freq - 0.25) < 0.03)


def test_score_has_no_pairwise_part():
    spec = DataSpec(n_train=10, n_test=0)
    ds = generate_dataset(spec, 0)
    core = np.asarray(ds.header["planted_core"])
    assert not core[0].any() and not core[:, 0].any() and not core[:, :, 0].any()


def test_shapes_and_bias_coordinate():
    ds = generate_dataset(DataSpec(n_train=20, n_test=5, channels=(3, 2, 4), dims=(5, 7, 6)), 0)
    assert ds.v.shape == (25, 3, 5) and ds.q.shape == (25, 2, 7) and ds.answers.shape == (25, 4, 4, 6)
    assert np.all(ds.v[..., 0] == 1.0) and np.all(ds.answers[..., 0] == 1.0)
    assert ds.true_answers.shape == (25, 4, 6)


def test_question_types_use_disjoint_blocks():
    ds = generate_dataset(DataSpec(n_train=200, n_test=0), 0)
    used = {t: np.flatnonzero(np.abs(ds.q[ds.qtypes == t][..., 1:]).sum(axis=(0, 1))) for t in ds.type_names}
    names = ds.type_names
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            assert not set(used[names[i]]) & set(used[names[j]])


def test_ffoe_answers_come_from_vocabulary():
    ds = generate_dataset(DataSpec(task="ffoe", n_train=50, n_test=0, n_classes=5), 2)
    vocab = np.asarray(ds.header["answer_vocabulary"])
    assert ds.n_classes == 5
    np.testing.assert_array_equal(ds.answers[:, 0], vocab[ds.labels])


def test_splits_and_round_trip(tmp_path):
    train, test = generate_splits(DataSpec(task="ffoe", n_train=20, n_test=7), 5)
    assert (len(train), len(test)) == (20, 7)
    assert train.header["split"] == "train"
    back = read_jsonl(write_jsonl(test, tmp_path / "t.jsonl"))
    np.testing.assert_array_equal(back.v, test.v)
    np.testing.assert_array_equal(back.answers, test.answers)
    np.testing.assert_array_equal(back.labels, test.labels)
    assert list(back.qtypes) == list(test.qtypes)


def test_read_rejects_foreign_files(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"format": "other"}\n')
    with pytest.raises(ValueError):
        read_jsonl(p)


@pytest.mark.parametrize("bad", [dict(task="open"), dict(dims=(8, 3, 8), type_mix=(1, 1, 1)),
                                 dict(n_answers=1), dict(core_rank=0), dict(type_mix=(1.0, -1.0))])
def test_spec_validation(bad):
    with pytest.raises(ConfigError):
        DataSpec(**bad)


def test_spec_round_trip():
    spec = DataSpec(task="ffoe", type_mix=(0.6, 0.4))
    assert DataSpec.from_dict(spec.to_dict()) == spec


def test_scores_mean_pool_channels(rng):
    core = rng.normal(size=(2, 3, 2))
    v, q = rng.normal(size=(1, 4, 2)), rng.normal(size=(1, 2, 3))
    ans = rng.normal(size=(1, 3, 5, 2))
    want = [np.einsum("abc,a,b,c->", core, v[0].mean(0), q[0].mean(0), ans[0, k].mean(0)) for k in range(3)]
    np.testing.assert_allclose(planted_scores(core, v, q, ans)[0], want, rtol=1e-13)
