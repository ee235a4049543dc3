import json

import pytest

from trainer_fixtures import separable_dataset
from qptrainer.data import InputTemplate
from qptrainer.errors import InputError
from qptrainer.train import (
    TrainSpec,
    load_trained,
    predict,
    split_ids,
    train,
    write_predictions,
)


class TestTrainSpec:
    def test_defaults(self):
        spec = TrainSpec()
        assert spec.epochs == 10
        assert spec.split == 0.8
        assert spec.input_template is InputTemplate.STUDENT_SEP_TEACHER

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epochs": 0},
            {"split": 0.0},
            {"split": 1.0},
            {"variant": "both"},
            {"input_template": "student_sep_teacher"},
            {"max_len": 4},
            {"batch_size": 0},
            {"learning_rate": 0.0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(InputError):
            TrainSpec(**kwargs)


class TestSplit:
    def test_same_seed_same_membership(self):
        ids = [f"e{i}" for i in range(40)]
        assert split_ids(ids, 0.8, seed=3) == split_ids(list(reversed(ids)), 0.8, seed=3)

    def test_different_seed_differs(self):
        ids = [f"e{i}" for i in range(40)]
        assert split_ids(ids, 0.8, seed=3) != split_ids(ids, 0.8, seed=4)

    def test_partition(self):
        ids = [f"e{i}" for i in range(17)]
        left, right = split_ids(ids, 0.8, seed=0)
        assert sorted(left + right) == sorted(ids)
        assert not set(left) & set(right)

    @pytest.mark.parametrize("split", [0.01, 0.99])
    def test_both_sides_nonempty(self, split):
        left, right = split_ids(["a", "b", "c", "d", "e"], split, seed=1)
        assert left and right


class TestTrainErrors:
    def test_variant_mismatch(self):
        exchanges, scores = separable_dataset(n=60)
        with pytest.raises(InputError, match="variant 'filtered'.*'unfiltered'"):
            train(exchanges, ("filtered", scores), TrainSpec(variant="unfiltered"))

    def test_too_few_examples(self):
        exchanges, scores = separable_dataset(n=49)
        with pytest.raises(InputError, match="49 labeled examples; need at least 50"):
            train(exchanges, ("unfiltered", scores), TrainSpec())

    def test_unlabeled_exchanges_do_not_count(self):
        exchanges, scores = separable_dataset(n=60)
        kept = dict(list(sorted(scores.items()))[:49])
        with pytest.raises(InputError, match="49 labeled examples"):
            train(exchanges, ("unfiltered", kept), TrainSpec())


@pytest.fixture(scope="module")
def trained():
    exchanges, scores = separable_dataset(n=150)
    return train(exchanges, ("unfiltered", scores), TrainSpec(seed=1)), exchanges


class TestTrainSeparable:
    def test_heldout_rho_above_bar(self, trained):
        model, _ = trained
        assert model.metrics["heldout_spearman"] > 0.8

    def test_metrics_shape(self, trained):
        model, _ = trained
        metrics = model.metrics
        assert metrics["n_train"] + metrics["n_heldout"] == metrics["n_examples"] == 150
        assert metrics["n_train"] == 120
        assert 0 <= metrics["heldout_p"] <= 1
        assert metrics["epochs"] == 10
        assert metrics["variant"] == "unfiltered"

    def test_predictions_cover_every_exchange(self, trained):
        model, exchanges = trained
        values = predict(model, exchanges)
        assert set(values) == {ex.exchange_id for ex in exchanges}

    def test_save_load_same_predictions(self, trained, tmp_path):
        model, exchanges = trained
        model.save(tmp_path / "model")
        reloaded = load_trained(tmp_path / "model")
        assert predict(reloaded, exchanges[:20]) == predict(model, exchanges[:20])

    def test_retrain_same_seed_is_identical(self, trained):
        model, exchanges = trained
        exchanges2, scores2 = separable_dataset(n=150)
        again = train(exchanges2, ("unfiltered", scores2), TrainSpec(seed=1))
        assert again.metrics == model.metrics
        assert predict(again, exchanges[:10]) == predict(model, exchanges[:10])


class TestTruncation:
    def test_long_inputs_warn(self):
        exchanges, scores = separable_dataset(n=60)
        spec = TrainSpec(max_len=8, epochs=1)
        with pytest.warns(UserWarning, match="truncated"):
            train(exchanges, ("unfiltered", scores), spec)


class TestWritePredictions:
    def test_file_shape(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_predictions("roberta", {"b": 1.5, "a": -0.25}, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert json.loads(lines[0]) == {"schema": "predictions/1", "name": "roberta"}
        assert json.loads(lines[1]) == {"exchange_id": "a", "score": -0.25}
        assert json.loads(lines[2]) == {"exchange_id": "b", "score": 1.5}

    def test_empty_name_rejected(self, tmp_path):
        with pytest.raises(InputError, match="nonempty series name"):
            write_predictions("", {"a": 1.0}, tmp_path / "p.jsonl")
