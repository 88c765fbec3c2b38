"""Structural smoke tests of the benchmark drivers at tiny corpus sizes.

Threshold checks live in the acceptance suite; here the drivers only have
to produce complete, well-formed artifacts.
"""

import json

import numpy as np
import pytest

from nlkreg.experiments import (run_biharmonic, run_darcy, run_fractional,
                                run_manufactured)


def load_summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


def csv_rows(path):
    lines = path.read_text().strip().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


class TestDarcyDriver:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "darcy"
        summary = run_darcy(out, seed=3, n_train=40, order=3,
                            delta_factors=(4,), lambda_mins=(1.0,),
                            test_harmonics=(1, 5, 40))
        assert summary["experiment"] == "darcy"
        assert "low_freq_rel_error" in summary["checks"]
        header, rows = csv_rows(out / "error_vs_test_frequency.csv")
        assert header[0] == "delta"
        assert len(rows) == 3
        assert (out / "kernels.csv").exists()
        assert load_summary(out) == summary


class TestBiharmonicDriver:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "bihar"
        summary = run_biharmonic(out, seed=4, n_train=300, cs=(3e-4,))
        assert "c=0.0003" in summary["checks"]
        header, rows = csv_rows(out / "test_case_errors.csv")
        assert header == ["c", "delta", "train_loss_C", "train_loss_CD",
                          "rel_error_C", "rel_error_CD", "ratio",
                          "lambda_min"]
        assert len(rows) == 1
        assert (out / "kernel_profile.csv").exists()

    def test_deterministic_given_seed(self, tmp_path):
        a = run_biharmonic(tmp_path / "a", seed=4, n_train=200, cs=(3e-4,))
        b = run_biharmonic(tmp_path / "b", seed=4, n_train=200, cs=(3e-4,))
        assert a == b
        ta = (tmp_path / "a" / "test_case_errors.csv").read_bytes()
        tb = (tmp_path / "b" / "test_case_errors.csv").read_bytes()
        assert ta == tb


class TestFractionalDriver:
    def test_artifacts(self, tmp_path):
        out = tmp_path / "frac"
        summary = run_fractional(out, seed=5, n_train=60,
                                 validate_oracle=False)
        checks = summary["checks"]
        assert "learned_rel_diff" in checks
        assert "baseline_rel_diff" in checks
        assert 0.20 <= checks["baseline_rel_diff"] <= 0.26
        header, rows = csv_rows(out / "table_relative_difference.csv")
        assert header == ["delta", "order", "alpha", "rel_diff_learned",
                          "rel_diff_truncated"]
        assert (out / "model.json").exists()


class TestManufacturedDriver:
    def test_single_order_artifacts(self, tmp_path):
        out = tmp_path / "manu"
        summary = run_manufactured(out, seed=6, n_train=200, n_val=100,
                                   orders=(3,), ratio_order=3)
        assert "stage2_val_over_stage1_val" in summary["checks"]
        header, rows = csv_rows(out / "loss_vs_order.csv")
        assert len(rows) == 2   # low and mixed corpora, one order each
        assert (out / "kernel_profile_low.csv").exists()
        assert (out / "kernel_profile_mixed.csv").exists()
