import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from targetprop.checkpoint import load_checkpoint, save_checkpoint
from targetprop.cli import main
from targetprop.config import RETUNED, TUNED, ExperimentConfig, tuned_config
from targetprop.errors import ConfigError, FormatError
from targetprop.experiment import (
    METRICS_HEADER,
    load_config,
    read_pgm,
    run_autoencode,
    run_experiment,
    run_search,
    write_pgm,
)
from targetprop.layers import build_network
from targetprop.plot import plot_metrics, read_metrics
from targetprop.tensor import SeededRng


def small_config(mnist_path, tmp_path, **kw):
    raw = {
        "dataset": "mnist",
        "architecture": "mnist_fc",
        "rule": {"name": "sdtp", "sigma": 0.2},
        "epochs": 2,
        "train_subset": 600,
        "test_subset": 300,
        "data_paths": {"mnist": str(mnist_path)},
        "output_dir": str(tmp_path / "run"),
        "forward_adam": {"lr": 0.0004, "beta1": 0.99, "beta2": 0.999, "eps": 1e-8},
        "inverse_adam": {"lr": 0.001, "beta1": 0.99, "beta2": 0.95, "eps": 1e-6},
        "record_wall_time": False,
    }
    raw.update(kw)
    return raw


def write_config(path, raw):
    path.write_text(json.dumps(raw))
    return path


# ---------------------------------------------------------------- config


def test_config_round_trip():
    cfg = tuned_config("mnist", "fc", "dtp", "alternating")
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert ExperimentConfig.from_dict(again.to_dict()).to_json() == cfg.to_json()


def test_config_unknown_fields_are_errors():
    with pytest.raises(ConfigError, match="learning_rate"):
        ExperimentConfig.from_dict({"learning_rate": 0.1})
    with pytest.raises(ConfigError, match="rule.alpah"):
        ExperimentConfig.from_dict({"rule": {"name": "dtp", "alpah": 0.1}})
    with pytest.raises(ConfigError, match="forward_adam"):
        ExperimentConfig.from_dict({"forward_adam": {"lr": -1.0}})


@pytest.mark.parametrize(
    "raw,field",
    [
        ({"dataset": "svhn"}, "dataset"),
        ({"schedule": "sometimes"}, "schedule"),
        ({"epochs": -1}, "epochs"),
        ({"batch_size": 0}, "batch_size"),
        ({"rule": {"name": "ao_sdtp", "z_size": 0}}, "z_size"),
        ({"architecture": "autoencoder_mnist", "rule": {"name": "ao_sdtp", "z_size": 4}}, "architecture"),
        ({"dataset": "cifar10", "architecture": "mnist_fc"}, "architecture"),
        ({"architecture": "nope"}, "architecture"),
        ({"rule": {"name": "dtp", "alpha": 0}}, "rule"),
        ({"augment": {"enabled": True}}, "augment"),
        ({"data_paths": {"svhn": "/x"}}, "data_paths"),
    ],
)
def test_config_validation(raw, field):
    with pytest.raises(ConfigError, match=field):
        ExperimentConfig.from_dict(raw)


def test_config_bad_json():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")


def test_explicit_architecture():
    arch = {"input_shape": [28, 28, 1], "layers": [{"type": "dense", "units": 32}, {"type": "dense", "units": 10, "activation": "softmax"}]}
    cfg = ExperimentConfig.from_dict({"architecture": arch, "rule": {"name": "dfa"}})
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_tuned_values_from_search_table():
    t = TUNED[("mnist", "fc", "bp")]
    assert t["model"] == (0.000152, 0.9, 0.999, 1e-8)
    t = TUNED[("mnist", "fc", "dtp_alternating")]
    assert t["model"] == (0.000308, 0.99, 0.99, 1e-4) and t["inverse"] == (0.004593, 0.99, 0.999, 1e-4)
    assert t["alpha"] == 0.231758 and t["sigma"] == 0.220444
    t = TUNED[("mnist", "fc", "sdtp_parallel")]
    assert t["model"][0] == 0.000402 and t["inverse"] == (0.001101, 0.99, 0.95, 1e-6) and t["sigma"] == 0.213995
    assert TUNED[("mnist", "lc", "dtp_alternating")]["alpha"] == 0.310892
    assert TUNED[("cifar10", "lc", "sdtp_alternating")]["sigma"] == 0.023804
    cfg = tuned_config("cifar10", "fc", "ao_sdtp")
    assert cfg.rule.z_size == 512 and cfg.forward_adam.lr == 0.000129
    assert len(TUNED) == 30


def test_tuned_config_prefers_retuned_row():
    assert tuned_config("mnist", "fc", "sdtp", "parallel").forward_adam.lr == RETUNED[("mnist", "fc", "sdtp_parallel")]["model"][0]
    assert tuned_config("mnist", "fc", "sdtp", "parallel", reported=True).inverse_adam.beta2 == 0.95
    assert tuned_config("mnist", "lc", "sdtp", "parallel").rule.sigma == 0.061555


# ---------------------------------------------------------------- checkpoint


def test_checkpoint_round_trip(tmp_path):
    net = build_network("mnist_lc", SeededRng(0), inverses=True)
    save_checkpoint(tmp_path / "w.ckpt", net.state_dict(), {"rule": "sdtp"})
    state, meta = load_checkpoint(tmp_path / "w.ckpt")
    assert meta == {"rule": "sdtp"}
    other = build_network("mnist_lc", SeededRng(1), inverses=True)
    other.load_state_dict(state)
    for k, v in net.state_dict().items():
        assert np.array_equal(other.state_dict()[k], v)


def test_checkpoint_format_errors(tmp_path):
    (tmp_path / "bad").write_bytes(b"NOTACKPT" + bytes(20))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(tmp_path / "bad")
    save_checkpoint(tmp_path / "ok", {"a": np.arange(10.0)})
    data = (tmp_path / "ok").read_bytes()
    (tmp_path / "short").write_bytes(data[:-16])
    with pytest.raises(FormatError, match="past end"):
        load_checkpoint(tmp_path / "short")
    (tmp_path / "ragged").write_bytes(data[:-3])
    with pytest.raises(FormatError, match="payload"):
        load_checkpoint(tmp_path / "ragged")
    (tmp_path / "v2").write_bytes(data[:8] + b"\x02" + data[9:])
    with pytest.raises(FormatError, match="version"):
        load_checkpoint(tmp_path / "v2")


def test_checkpoint_is_little_endian_f64(tmp_path):
    save_checkpoint(tmp_path / "c", {"x": np.array([1.5, -2.0])})
    assert (tmp_path / "c").read_bytes()[-16:] == np.array([1.5, -2.0], dtype="<f8").tobytes()


# ---------------------------------------------------------------- runs


def test_run_writes_outputs(mnist_path, tmp_path):
    cfg = ExperimentConfig.from_dict(small_config(mnist_path, tmp_path))
    result = run_experiment(cfg)
    out = tmp_path / "run"
    rows = list(csv.reader(open(out / "metrics.csv")))
    assert rows[0] == METRICS_HEADER and len(rows) == 3
    assert all(0.0 <= float(r[1]) <= 100.0 and 0.0 <= float(r[2]) <= 100.0 for r in rows[1:])
    assert all(r[6] == "" for r in rows[1:])
    summary = json.loads((out / "final_summary.json").read_text())
    assert summary["best_epoch"] in (1, 2)
    assert summary["best_test_err"] == min(float(r[2]) for r in rows[1:])
    state, _ = load_checkpoint(out / "weights.ckpt")
    assert set(state) == set(result.net.state_dict())
    assert ExperimentConfig.load(out / "config.json") == cfg


def test_zero_epochs_header_only(mnist_path, tmp_path):
    cfg = ExperimentConfig.from_dict(small_config(mnist_path, tmp_path, epochs=0))
    run_experiment(cfg)
    assert (tmp_path / "run" / "metrics.csv").read_text().splitlines() == [",".join(METRICS_HEADER)]
    summary = json.loads((tmp_path / "run" / "final_summary.json").read_text())
    assert summary["best_epoch"] == 0 and summary["best_test_err"] == summary["initial"]["test_err"]
    assert 80.0 <= summary["initial"]["test_err"] <= 95.0


def test_gradient_rule_inverse_column_empty(mnist_path, tmp_path):
    cfg = ExperimentConfig.from_dict(small_config(mnist_path, tmp_path, rule={"name": "fa"}, epochs=1))
    run_experiment(cfg)
    rows = list(csv.reader(open(tmp_path / "run" / "metrics.csv")))
    assert rows[1][5] == ""


def test_cli_run_twice_is_bitwise_identical(mnist_path, tmp_path):
    cfg = write_config(tmp_path / "c.json", small_config(mnist_path, tmp_path))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--quiet"]) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()
    assert (tmp_path / "a" / "weights.ckpt").read_bytes() == (tmp_path / "b" / "weights.ckpt").read_bytes()


def test_cli_overrides(mnist_path, tmp_path):
    cfg = write_config(tmp_path / "c.json", small_config(mnist_path, tmp_path))
    loaded = load_config(cfg, seed=7, epochs=1, out=tmp_path / "z")
    assert (loaded.seed, loaded.epochs, loaded.output_dir) == (7, 1, str(tmp_path / "z"))


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "targetprop", *args], capture_output=True, text=True, env=env)


def test_cli_error_lines(tmp_path):
    (tmp_path / "bad.json").write_text('{"epochs": 1, "bogus": true}')
    r = run_cli("run", "--config", str(tmp_path / "bad.json"))
    assert r.returncode != 0
    assert r.stderr.strip().splitlines() == ["E_CONFIG: bogus: unknown field"]
    r = run_cli("run", "--config", str(tmp_path / "missing.json"))
    assert r.returncode != 0 and r.stderr.startswith("E_DATA:") and len(r.stderr.strip().splitlines()) == 1
    (tmp_path / "nodata.json").write_text(json.dumps({"data_paths": {"mnist": str(tmp_path / "nowhere")}, "epochs": 1}))
    r = run_cli("run", "--config", str(tmp_path / "nodata.json"), "--out", str(tmp_path / "nodata"))
    assert r.returncode != 0 and r.stderr.startswith("E_DATA:")
    assert not (tmp_path / "nodata").exists()
    r = run_cli("frobnicate")
    assert r.returncode != 0 and r.stderr.startswith("E_USAGE:") and len(r.stderr.strip().splitlines()) == 1
    (tmp_path / "bad.csv").write_text("epoch,train_err\n1,2\n")
    r = run_cli("plot", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "x.svg"))
    assert r.returncode != 0 and r.stderr.startswith("E_FORMAT:")


def test_cli_gradcheck():
    r = run_cli("gradcheck", "--rule", "bp", "--seeds", "2")
    assert r.returncode == 0 and "bp: max relative error" in r.stdout
    assert main(["gradcheck", "--rule", "hybrid", "--seeds", "1"]) == 0


# ---------------------------------------------------------------- search


def test_search_outputs_and_jobs_determinism(mnist_path, tmp_path):
    raw = small_config(mnist_path, tmp_path, train_subset=300, test_subset=200)
    cfg = ExperimentConfig.from_dict(raw)
    res = run_search(cfg, 3, 1, tmp_path / "s1", jobs=1)
    run_search(cfg, 3, 1, tmp_path / "s2", jobs=2)
    a = (tmp_path / "s1" / "trials.csv").read_bytes()
    assert a == (tmp_path / "s2" / "trials.csv").read_bytes()
    rows = list(csv.reader(open(tmp_path / "s1" / "trials.csv")))
    assert len(rows) == 1 + 3 and rows[0][0] == "trial" and rows[0][-3:] == ["best_train_err", "best_test_err", "best_epoch"]
    errs = [float(r[12]) for r in rows[1:]]
    assert errs == sorted(errs) and [r.best_test_err for r in res] == errs
    hist = list(csv.reader(open(tmp_path / "s1" / "histogram.csv")))
    assert sum(int(r[2]) for r in hist[1:]) == 3


def test_search_rejects_autoencoder(tmp_path):
    cfg = ExperimentConfig.from_dict({"architecture": "autoencoder_mnist", "rule": {"name": "bp"}})
    with pytest.raises(ConfigError, match="classifier"):
        run_search(cfg, 2, 1, tmp_path)


def test_cli_search(mnist_path, tmp_path):
    cfg = write_config(tmp_path / "c.json", small_config(mnist_path, tmp_path, train_subset=200, test_subset=100))
    assert main(["search", "--config", str(cfg), "--n", "2", "--epochs", "1", "--out", str(tmp_path / "s")]) == 0
    assert len((tmp_path / "s" / "trials.csv").read_text().splitlines()) == 3


# ---------------------------------------------------------------- autoencoder


def test_pgm_round_trip(tmp_path):
    img = np.linspace(0, 1, 12).reshape(3, 4)
    write_pgm(tmp_path / "a.pgm", img)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n4 3\n255\n")
    assert np.allclose(read_pgm(tmp_path / "a.pgm"), img, atol=0.5 / 255)


def test_autoencode_small(mnist_path, tmp_path):
    raw = small_config(mnist_path, tmp_path, train_subset=500, test_subset=200, epochs=2)
    raw["forward_adam"] = {"lr": 0.001}
    raw["inverse_adam"] = {"lr": 0.001}
    cfg = ExperimentConfig.from_dict(raw)
    summaries = run_autoencode(cfg, tmp_path / "ae")
    assert set(summaries) == {"bp", "dtp", "sdtp"}
    for rule, s in summaries.items():
        assert s["final_test_loss"] < s["initial_test_loss"]
        rows = list(csv.reader(open(tmp_path / "ae" / rule / "metrics.csv")))
        assert len(rows) == 3 and rows[1][1] == "" and rows[1][2] == ""
        grid = read_pgm(tmp_path / "ae" / rule / "reconstructions.pgm")
        assert grid.shape == (2 * 28 + 6, 10 * 28 + 22)


def test_autoencoder_initial_error_matches_direct_computation(mnist):
    _, test = mnist
    from targetprop.config import RuleConfig
    from targetprop.experiment import autoencoder_config, build_for
    from targetprop.optim import evaluate

    cfg = autoencoder_config(ExperimentConfig(rule=RuleConfig("bp")), "bp")
    net = build_for(cfg, SeededRng(cfg.seed).child(0))
    x = test.images[:2000]
    _, loss = evaluate(net, test.subset(2000))
    direct = np.mean(np.sum((x.reshape(2000, -1) - net.predict(x)) ** 2, axis=1))
    assert loss == pytest.approx(direct, rel=1e-12)
    # near-zero outputs at init: error is close to E||x||^2
    ref = np.mean(np.sum(x.reshape(2000, -1) ** 2, axis=1))
    assert abs(loss - ref) / ref < 0.5


# ---------------------------------------------------------------- plot


def write_metrics(path, n, seed=0):
    rng = SeededRng(seed)
    with open(path, "w") as fh:
        fh.write(",".join(METRICS_HEADER) + "\n")
        for e in range(1, n + 1):
            tr, te = (float(v) for v in rng.uniform(2) * 50)
            fh.write(f"{e},{tr!r},{te!r},0.5,0.6,,\n")


def test_plot_single_file(tmp_path):
    write_metrics(tmp_path / "bp.csv", 10)
    text = plot_metrics([tmp_path / "bp.csv"], tmp_path / "out.svg")
    root = ET.fromstring(text)
    ns = "{http://www.w3.org/2000/svg}"
    lines = root.findall(f"{ns}polyline")
    assert len(lines) == 2
    train = [l for l in lines if l.get("class") == "train"][0]
    test = [l for l in lines if l.get("class") == "test"][0]
    assert train.get("stroke-dasharray") and test.get("stroke-dasharray") is None
    assert train.get("stroke") == test.get("stroke")
    m = read_metrics(tmp_path / "bp.csv")
    ys = m["train"] + m["test"]
    assert float(root.get("data-ymin")) <= min(ys) and float(root.get("data-ymax")) >= max(ys)
    assert float(root.get("data-xmin")) <= 1 and float(root.get("data-xmax")) >= 10
    assert "bp" in text


def test_plot_colours_per_file(tmp_path):
    write_metrics(tmp_path / "a.csv", 5, 0)
    write_metrics(tmp_path / "b.csv", 5, 1)
    root = ET.fromstring(plot_metrics([tmp_path / "a.csv", tmp_path / "b.csv"], tmp_path / "o.svg"))
    lines = root.findall("{http://www.w3.org/2000/svg}polyline")
    assert len(lines) == 4 and len({l.get("stroke") for l in lines}) == 2


def test_plot_malformed_csv_names_line(tmp_path):
    write_metrics(tmp_path / "m.csv", 3)
    with open(tmp_path / "m.csv", "a") as fh:
        fh.write("4,abc,1,1,1,,\n")
    with pytest.raises(FormatError, match="line 5"):
        read_metrics(tmp_path / "m.csv")
    (tmp_path / "n.csv").write_text(",".join(METRICS_HEADER) + "\n1,2,3\n")
    with pytest.raises(FormatError, match="line 2"):
        read_metrics(tmp_path / "n.csv")
