import math

import numpy as np
import pytest

import churnemb as ce


def small_synth(seed=1):
    cfg = ce.SynthConfig()
    cfg.n_players = 60
    cfg.n_games = 30
    cfg.days = 50
    cfg.window = 7
    cfg.seed = seed
    return cfg


def small_train():
    cfg = ce.TrainConfig()
    cfg.epochs = 2
    cfg.batch_size = 128
    cfg.m = 8
    cfg.pred_hidden = 8
    return cfg


def test_hazard_solver():
    h = ce.solve_daily_hazard(0.05, 40)
    assert math.isclose((1 - h) ** 40, 0.05, rel_tol=1e-9)
    with pytest.raises(ce.ConfigError):
        ce.solve_daily_hazard(2.0, 40)


def test_generate_and_inspect():
    cfg = small_synth()
    result = ce.generate(cfg)
    series = result.series
    plays = series.plays()
    assert plays.shape[1] == 3
    assert plays[:, 2].max() <= series.t_end
    assert result.relationship_count > 0
    age, empirical, expected = result.survival[0]
    assert age == 0 and empirical == 1.0
    schema = ce.synth_schema(cfg)
    assert schema.d == cfg.d
    u, v = series.edges_at(20)[0]
    z = series.edge_vector(schema, u, v, 20)
    assert z.shape == (cfg.d,)


def test_train_predict_roundtrip(tmp_path):
    cfg = small_synth(2)
    result = ce.generate(cfg)
    data = ce.build_examples(result.series, ce.synth_schema(cfg))
    assert len(data) == data.z.shape[0]
    assert data.vocab_size > 1
    model, losses = ce.train(data, small_train())
    assert len(losses) == 2 and all(math.isfinite(x) for x in losses)
    scores = model.predict(data.z)
    assert scores.shape == (len(data),)
    assert np.all((scores >= 0) & (scores <= 1))
    path = tmp_path / "model.txt"
    model.save(str(path))
    again = ce.Model.load(str(path))
    np.testing.assert_array_equal(again.predict(data.z), scores)
    with pytest.raises(ce.DimensionError):
        model.predict(np.zeros((2, cfg.d + 1)))


def test_evaluate_reports_three_models():
    cfg = small_synth(3)
    series = ce.generate(cfg).series
    out = ce.evaluate(series, ce.synth_schema(cfg), small_train())
    for name in ("SS", "RS", "LR"):
        assert 0.0 <= out[name]["auc"] <= 1.0
    assert len(out["labels"]) == len(out["ss_scores"])
    assert math.isclose(ce.auc(list(out["ss_scores"]), list(out["labels"])), out["SS"]["auc"])


def test_auc_and_errors():
    assert ce.auc([0.9, 0.1], [1, 0]) == 1.0
    with pytest.raises(ce.UndefinedMetricError):
        ce.auc([0.9, 0.1], [1, 1])
    assert issubclass(ce.UndefinedMetricError, ce.ChurnembError)


def test_config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[train]\nepochs = 4\nmode = alternate\n[synth]\nplayers = 10\n")
    cfg = ce.load_run_config(str(path))
    assert cfg.train.epochs == 4
    assert cfg.train.mode == "alternate"
    assert cfg.synth.n_players == 10
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nepoch = 4\n")
    with pytest.raises(ce.ConfigError):
        ce.load_run_config(str(bad))
