"""Smoke test for the rnnem_py extension. Run after `maturin develop` or installing the wheel."""

import math
import pathlib
import tempfile

import rnnem_py as rn

FIXTURE = pathlib.Path(__file__).resolve().parents[2] / "core" / "tests" / "fixtures" / "tiny.conll"


def check_config():
    cfg = rn.TrainConfig(cell="grnn", hidden=12, epochs=2)
    assert cfg.to_dict()["hidden"] == 12
    again = rn.TrainConfig.from_toml(cfg.to_toml())
    assert again.to_dict() == cfg.to_dict()
    for bad in ({"epochs": 0}, {"no_such_field": 1}):
        try:
            rn.TrainConfig(**bad)
        except ValueError:
            pass
        else:
            raise AssertionError(f"accepted {bad}")


def check_tagger_gradients():
    corpus = rn.Corpus.load(str(FIXTURE))
    words, labels = corpus.indices(0)
    tagger = rn.Tagger("rnn_em", len(corpus.words), len(corpus.labels),
                       embed_dim=4, hidden=5, slot_dim=3, slot_count=2, seed=3)
    assert tagger.cell_param_count > 0
    grads = tagger.gradients(words, labels)
    assert list(grads) == tagger.param_names()

    name = "gate_w"
    value = tagger.get_param(name)
    step = 1e-5
    value[0][1] += step
    tagger.set_param(name, value)
    up = tagger.loss(words, labels)
    value[0][1] -= 2 * step
    tagger.set_param(name, value)
    down = tagger.loss(words, labels)
    numeric = (up - down) / (2 * step)
    analytic = grads[name][0][1]
    assert abs(numeric - analytic) <= 1e-4 * max(abs(numeric), abs(analytic), 1e-6), (numeric, analytic)

    probs = tagger.probabilities(words)
    assert all(math.isclose(sum(p), 1.0) for p in probs)
    assert len(tagger.predict(words)) == len(words)


def check_fit_and_score():
    corpus = rn.Corpus.load(str(FIXTURE))
    cfg = rn.TrainConfig(cell="simple_rnn", embed_dim=8, hidden=16, epochs=30)
    tagger, entropy = rn.fit(cfg, corpus)
    assert entropy[-1] < entropy[0]
    report = rn.evaluate(tagger, corpus)
    assert report["scheme"] == "bio"
    perfect = rn.score_f1(corpus.label_strings(), corpus.label_strings())
    assert perfect["overall"]["correct"] == perfect["overall"]["gold"]


def check_run_artifacts():
    with tempfile.TemporaryDirectory() as tmp:
        out = pathlib.Path(tmp) / "run"
        cfg = rn.TrainConfig(train_path=str(FIXTURE), test_path=str(FIXTURE), embed_dim=8,
                             hidden=8, slot_dim=4, slot_count=2, epochs=2, out_dir=str(out))
        manifest = rn.train(cfg)
        assert manifest["best_epoch"] >= 1
        ckpt = rn.Checkpoint.load(str(out / "model.ckpt"))
        assert rn.Checkpoint.from_bytes(ckpt.to_bytes()).to_bytes() == ckpt.to_bytes()
        assert ckpt.tagger.cell == "rnn_em"
        report = rn.evaluate_checkpoint(str(out / "model.ckpt"), str(FIXTURE))
        assert 0.0 <= report["overall"]["gold"]
        try:
            rn.Checkpoint.load(str(out / "missing.ckpt"))
        except OSError:
            pass
        else:
            raise AssertionError("missing checkpoint loaded")


def check_gradcheck_and_sweep():
    report = rn.gradcheck(samples=30)
    assert report["passed"], report
    train, test = rn.synthetic(train_size=40, test_size=10)
    assert len(train) == 40 and len(test) == 10
    with tempfile.TemporaryDirectory() as tmp:
        cfg = rn.TrainConfig(embed_dim=4, hidden=6, slot_dim=3, epochs=1, out_dir=tmp,
                             synth={**rn.TrainConfig().to_dict()["synth"], "train_size": 30, "test_size": 10})
        rows = rn.sweep_slots(cfg, [1, 2])
        assert [r["slot_count"] for r in rows] == [1, 2]


if __name__ == "__main__":
    for check in (check_config, check_tagger_gradients, check_fit_and_score,
                  check_run_artifacts, check_gradcheck_and_sweep):
        check()
        print(f"{check.__name__}: ok")
    print("smoke test passed")
