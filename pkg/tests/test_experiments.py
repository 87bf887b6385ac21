import json
from pathlib import Path

import numpy as np
import pytest

from isoci.errors import ConfigError
from isoci.experiments import (
    ExperimentConfig,
    run_bw_comparison,
    run_coverage,
    run_estimator_comparison,
    run_length_study,
)

GOLDEN = Path(__file__).parent / "data" / "golden_coverage.csv"


def _golden_cfg():
    return ExperimentConfig(
        model="regression", grid=[4, 4], truth="x1 + x2", sigma=1.0,
        B=8, delta=0.05, methods=["pivotal", "max_min_only"],
        variance_modes=["known"], seed=20240817, inner=[[2, 3], [2, 3]],
    )


def test_schema_golden_file(tmp_path):
    rep = run_coverage(_golden_cfg())
    out = tmp_path / "report.csv"
    rep.to_csv(out)
    assert out.read_text() == GOLDEN.read_text()


def test_worker_count_gives_identical_csv(tmp_path):
    cfg1 = _golden_cfg()
    rep1 = run_coverage(cfg1)
    cfg2 = _golden_cfg()
    cfg2.workers = 3
    rep2 = run_coverage(cfg2)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    rep1.to_csv(p1)
    rep2.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_single_replication_coverage_is_binary():
    cfg = ExperimentConfig(
        model="regression", grid=[10], truth="x1", sigma=1.0, B=1,
        methods=["pivotal"], variance_modes=["known"], seed=5,
    )
    rep = run_coverage(cfg)
    assert set(np.unique(rep.coverage["pivotal[known]"])) <= {0.0, 1.0}


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="unknown config fields"):
        ExperimentConfig.from_json('{"modle": "regression"}')
    with pytest.raises(ConfigError, match="delta"):
        ExperimentConfig.from_json('{"delta": 1.5}')
    with pytest.raises(ConfigError, match="methods"):
        ExperimentConfig.from_json('{"methods": ["bogus"]}')
    with pytest.raises(ConfigError, match="not valid JSON"):
        ExperimentConfig.from_json('{"delta": }')


def test_config_from_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"model": "regression", "grid": [5], "truth": "x1", "B": 2, "seed": 1}))
    cfg = ExperimentConfig.from_json(path)
    assert cfg.grid == [5]


def test_inner_outskirt_summaries():
    rep = run_coverage(_golden_cfg())
    assert any(k.startswith("summary_inner::") for k in rep.meta)
    assert any(k.startswith("summary_outskirt::") for k in rep.meta)
    assert rep.inner_mask.sum() == 4  # the inner 2x2 of a 4x4 lattice


def test_inner_preset_regions():
    from isoci.experiments import _preset_inner

    assert _preset_inner((25, 25)) == [[5, 21], [5, 21]]   # inner 17x17
    assert _preset_inner((9, 9, 9)) == [[3, 7], [3, 7], [3, 7]]  # inner 5^3
    cfg = ExperimentConfig(
        model="regression", grid=[25, 25], truth="x1 + x2", B=1, seed=1,
        inner="preset", points=[0, 12 * 25 + 12],
    )
    rep = run_coverage(cfg)
    assert rep.inner_mask.tolist() == [False, True]


def test_estimator_comparison_requires_2d_or_3d():
    cfg = ExperimentConfig(model="regression", grid=[10], truth="x1", B=2, seed=1)
    with pytest.raises(ConfigError):
        run_estimator_comparison(cfg)


def test_estimator_comparison_paired_keys():
    cfg = ExperimentConfig(
        model="regression", grid=[5, 5], truth="exp(x1 + x2)", B=30, seed=2,
        variance_modes=["known"],
    )
    rep = run_estimator_comparison(cfg)
    assert "pivotal[known]" in rep.keys and "max_min_only[known]" in rep.keys
    assert "mean_coverage_gap::known" in rep.meta


def test_bw_comparison_smoke_schema(tmp_path):
    cfg = ExperimentConfig(
        model="regression", grid=[15], truth="10*pow(x1,5)", B=1, seed=3,
        region=[0.1, 0.5], lengths=True,
    )
    rep = run_bw_comparison(cfg)
    out = tmp_path / "bw.csv"
    rep.to_csv(out)
    header = out.read_text().splitlines()[0]
    assert header == (
        "point_index,x1,x2,x3,method,variance,coverage,"
        "len_mean,len_median,len_q1,len_q3,failures"
    )
    assert {"undercover_count_pivotal", "undercover_count_lrt"} <= set(rep.meta)


def test_length_study_zero_noise_degenerate():
    cfg = ExperimentConfig(
        model="regression", grid=[1], truth="exp(x1)", sigma=0.0, B=50, seed=4, x0=[0.5],
    )
    rep = run_length_study(cfg, [100, 400])
    assert rep.quartiles[100]["median"] == 0.0
    assert rep.quartiles[400]["mean"] == 0.0


def test_length_study_oracle_closed_form():
    cfg = ExperimentConfig(
        model="regression", grid=[1], truth="exp(x1)", sigma=1.0, B=20, seed=4, x0=[0.5],
    )
    rep = run_length_study(cfg, [100])
    partial = np.exp(0.5)
    want = 2 * 1.9964 * 100 ** (-1 / 3) * (partial / 2) ** (1 / 3)
    assert rep.oracle_lengths[100] == pytest.approx(want, rel=1e-6)


def test_oracle_method_in_coverage():
    cfg = ExperimentConfig(
        model="regression", grid=[400], truth="exp(x1)", sigma=1.0, B=300,
        seed=21, methods=["pivotal", "oracle"], variance_modes=["known"],
        points=[199],
    )
    rep = run_coverage(cfg)
    cov = float(rep.coverage["oracle[known]"][0])
    # the oracle interval is calibrated by construction
    assert 0.9 <= cov <= 0.99
    assert rep.length_q1["oracle[known]"][0] == rep.length_q3["oracle[known]"][0]


def test_length_study_rejects_bad_n():
    cfg = ExperimentConfig(model="regression", grid=[1, 1], truth="x1 + x2", B=5, seed=0)
    with pytest.raises(ConfigError, match="d-th power"):
        run_length_study(cfg, [30])


def test_meta_json_written(tmp_path):
    cfg = _golden_cfg()
    rep = run_coverage(cfg)
    meta_path = tmp_path / "r.meta.json"
    rep.write_meta(meta_path, cfg, 0.5)
    doc = json.loads(meta_path.read_text())
    assert doc["schema_version"] == 1
    assert doc["seed"] == cfg.seed
    assert "pivotal[known]" in doc["summary"]
