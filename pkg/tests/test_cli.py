import json
import os

import numpy as np
import pytest

from nlkreg.cli import main
from nlkreg.dataset import read_dataset
from nlkreg.kernels import load_model


def write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return str(path)


@pytest.fixture()
def gen_config(tmp_path):
    return write_json(tmp_path / "gen.json", {
        "kind": "manufactured", "kernel": "cosine_sign_changing",
        "corpus": "low", "delta": 0.5, "n_samples": 40, "seed": 7,
    })


@pytest.fixture()
def train_config(tmp_path):
    return write_json(tmp_path / "train.json", {
        "order": 2, "delta": 0.5, "seed": 3, "stage1_max_epochs": 120,
        "al_epochs": 5, "al_step_max": 8,
    })


def read_bytes_tree(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            p = os.path.join(dirpath, name)
            out[os.path.relpath(p, root)] = open(p, "rb").read()
    return out


class TestGenerate:
    def test_dataset_written_and_deterministic(self, tmp_path, gen_config):
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        assert main(["generate", "--config", gen_config, "--out", str(out1)]) == 0
        assert main(["generate", "--config", gen_config, "--out", str(out2)]) == 0
        t1, t2 = read_bytes_tree(out1), read_bytes_tree(out2)
        assert t1.keys() == t2.keys()
        for name in t1:
            assert t1[name] == t2[name], name
        ds = read_dataset(out1)
        assert ds.n_samples == 40

    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_json(tmp_path / "bad.json", {
            "kind": "manufactured", "kernel": "cosine_sign_changing",
            "delta": 0.5, "n_samples": 5, "seed": 1, "bogus": True,
        })
        assert main(["generate", "--config", cfg, "--out",
                     str(tmp_path / "x")]) == 1

    def test_malformed_json_cites_line(self, tmp_path, capsys):
        bad = tmp_path / "broken.json"
        bad.write_text('{"kind": "manufactured",\n  "oops"\n}')
        assert main(["generate", "--config", str(bad), "--out",
                     str(tmp_path / "x")]) == 1
        err = capsys.readouterr().err
        import re
        assert re.search(r"broken\.json:\d+:\d+", err)

    def test_darcy_lambda_min_too_large(self, tmp_path):
        cfg = write_json(tmp_path / "darcy.json", {
            "kind": "darcy", "n_samples": 5, "seed": 0, "lambda_min": 20.0,
        })
        assert main(["generate", "--config", cfg, "--out",
                     str(tmp_path / "x")]) == 1

    def test_biharmonic_meta_echoes_parameters(self, tmp_path):
        cfg = write_json(tmp_path / "bh.json", {
            "kind": "biharmonic", "n_samples": 6, "seed": 2,
            "c": 0.0003, "delta": 0.5,
        })
        out = tmp_path / "bh_ds"
        assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["params"]["c"] == 0.0003
        assert meta["params"]["delta"] == 0.5


class TestTrainEvalSolve:
    def test_train_writes_model_and_is_deterministic(self, tmp_path,
                                                     gen_config, train_config):
        ds_dir = tmp_path / "ds"
        main(["generate", "--config", gen_config, "--out", str(ds_dir)])
        r1, r2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["train", "--config", train_config, "--dataset",
                     str(ds_dir), "--out", str(r1), "--stage", "1"]) == 0
        assert main(["train", "--config", train_config, "--dataset",
                     str(ds_dir), "--out", str(r2), "--stage", "1"]) == 0
        assert (r1 / "model.json").read_bytes() == (r2 / "model.json").read_bytes()
        model = load_model(r1 / "model.json")
        assert model.order == 2
        assert (r1 / "train_report.json").exists()
        assert (r1 / "loss_trace.csv").exists()
        assert (r1 / "resolved_config.json").exists()

    def test_eval_matches_recorded_final_loss(self, tmp_path, gen_config,
                                              train_config):
        ds_dir = tmp_path / "ds"
        main(["generate", "--config", gen_config, "--out", str(ds_dir)])
        run = tmp_path / "run"
        main(["train", "--config", train_config, "--dataset", str(ds_dir),
              "--out", str(run), "--stage", "1"])
        out = tmp_path / "ev"
        assert main(["eval", "--model", str(run / "model.json"),
                     "--dataset", str(ds_dir), "--out", str(out)]) == 0
        ev = json.loads((out / "eval_report.json").read_text())
        report = json.loads((run / "train_report.json").read_text())
        assert ev["forward_loss"] == pytest.approx(report["final_loss"],
                                                   rel=1e-12)

    def test_solve_emits_101_row_csv(self, tmp_path, gen_config, train_config):
        ds_dir = tmp_path / "ds"
        main(["generate", "--config", gen_config, "--out", str(ds_dir)])
        run = tmp_path / "run"
        main(["train", "--config", train_config, "--dataset", str(ds_dir),
              "--out", str(run), "--stage", "1"])
        out = tmp_path / "sol"
        cfg = write_json(tmp_path / "solve.json", {
            "forcing": {"kind": "biharmonic_test", "c": 0.0003}})
        assert main(["solve", "--model", str(run / "model.json"),
                     "--config", cfg, "--out", str(out)]) == 0
        rows = (out / "solution.csv").read_text().strip().splitlines()
        assert rows[0].split(",") == ["x", "u_pred", "f", "u_ref"]
        assert len(rows) == 102   # header + 101 points

    def test_solve_warns_on_nonzero_mean(self, tmp_path, gen_config,
                                         train_config, capsys):
        ds_dir = tmp_path / "ds"
        main(["generate", "--config", gen_config, "--out", str(ds_dir)])
        run = tmp_path / "run"
        main(["train", "--config", train_config, "--dataset", str(ds_dir),
              "--out", str(run), "--stage", "1"])
        out = tmp_path / "sol2"
        cfg = write_json(tmp_path / "solve2.json", {
            "forcing": {"kind": "harmonic", "harmonic": 0, "amplitude": 1.0}})
        assert main(["solve", "--model", str(run / "model.json"),
                     "--config", cfg, "--out", str(out)]) == 0
        err = capsys.readouterr().err
        assert "mean" in err
        meta = json.loads((out / "resolved_config.json").read_text())
        assert meta["notes"]

    def test_stage2_resume_from_stage1_model(self, tmp_path, gen_config,
                                             train_config):
        ds_dir = tmp_path / "ds"
        main(["generate", "--config", gen_config, "--out", str(ds_dir)])
        run1 = tmp_path / "s1"
        main(["train", "--config", train_config, "--dataset", str(ds_dir),
              "--out", str(run1), "--stage", "1"])
        run2 = tmp_path / "s2"
        assert main(["train", "--config", train_config, "--dataset",
                     str(ds_dir), "--out", str(run2), "--stage", "2",
                     "--model", str(run1 / "model.json")]) == 0
        m1 = load_model(run1 / "model.json")
        m2 = load_model(run2 / "model.json")
        np.testing.assert_array_equal(m2.C, m1.C)
        report = json.loads((run2 / "train_report.json").read_text())
        assert report["al_log"]

    def test_indefinite_model_solve_exits_numerical(self, tmp_path):
        from nlkreg.kernels import KernelModel, save_model
        bad = KernelModel(delta=0.2, order=0, C=[1.0], D=[-8.0])
        mpath = tmp_path / "bad.json"
        save_model(bad, mpath)
        cfg = write_json(tmp_path / "solve_bad.json", {
            "forcing": {"kind": "harmonic", "harmonic": 1}})
        assert main(["solve", "--model", str(mpath), "--config", cfg,
                     "--out", str(tmp_path / "o")]) == 2

    def test_csv_round_trips(self, tmp_path, gen_config, train_config):
        ds_dir = tmp_path / "ds"
        main(["generate", "--config", gen_config, "--out", str(ds_dir)])
        run = tmp_path / "run"
        main(["train", "--config", train_config, "--dataset", str(ds_dir),
              "--out", str(run), "--stage", "1"])
        out = tmp_path / "sol3"
        cfg = write_json(tmp_path / "solve3.json", {
            "forcing": {"kind": "harmonic", "harmonic": 2}})
        main(["solve", "--model", str(run / "model.json"), "--config", cfg,
              "--out", str(out)])
        text = (out / "solution.csv").read_text()
        lines = text.strip().splitlines()
        parsed = [[float(v) for v in line.split(",")] for line in lines[1:]]
        re_emitted = lines[0] + "\n" + "\n".join(
            ",".join(format(v, ".17g") for v in row) for row in parsed) + "\n"
        assert re_emitted == text


class TestReproduce:
    def test_unknown_experiment_rejected(self, tmp_path):
        assert main(["reproduce", "spectral", "--out",
                     str(tmp_path / "x")]) == 1

    def test_tiny_manufactured_run_writes_artifacts(self, tmp_path):
        out = tmp_path / "rep"
        code = main(["reproduce", "manufactured", "--out", str(out),
                     "--scale", "0.004", "--seed", "1"])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["experiment"] == "manufactured"
        assert (out / "loss_vs_order.csv").exists()
        assert (out / "kernel_profile_mixed.csv").exists()


class TestUsage:
    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1

    def test_version_flag(self, capsys):
        assert main(["--version"]) == 0
