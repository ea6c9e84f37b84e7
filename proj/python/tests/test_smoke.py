import json
import os
import pathlib

import pytest

import safecons

CONFIGS = pathlib.Path(os.environ.get("SAFECONS_SOURCE_DIR", pathlib.Path(__file__).parents[2])) / "configs"


def test_math_helpers():
    assert safecons.normal_quantile(0.5) == 0.0
    assert safecons.normal_cdf(0.0) == pytest.approx(0.5)
    assert safecons.certified_radius(0.9, 0.1, 1.0) == pytest.approx(1.2815516, abs=1e-6)
    assert safecons.certified_radius(0.5, 0.5, 1.0) is None
    lower, upper = safecons.clopper_pearson(950, 1000, 0.01)
    assert lower == pytest.approx(0.931595106, abs=1e-9)
    assert lower < 0.95 < upper
    assert safecons.path_attenuation(1.0, [0.0, 0.0, 0.0], 0.05) == 0.125
    assert safecons.adaptive_sample_count(0.0, 10, 0.01, 20) == 0
    assert safecons.adaptive_sample_count(0.5, 10, 0.01, 20) == 20
    assert safecons.trim_mean([[0.0], [0.1], [0.2], [0.3], [1e9]], 0.2) == pytest.approx([0.2])
    assert safecons.improvement_pct(0.1251, 0.0129) == pytest.approx(89.69, abs=0.005)


def test_errors_are_raised():
    with pytest.raises(safecons.SafeconsError):
        safecons.normal_quantile(1.0)
    with pytest.raises(safecons.SafeconsError):
        safecons.parse_config({"schema_version": 1, "rounds": -1})


def test_parse_config_round_trip():
    cfg = safecons.load_config(CONFIGS / "triplet.json")
    assert cfg["attack"]["malicious"] == [2, 7]
    assert safecons.parse_config(cfg) == cfg
    assert "api_key" not in json.dumps(cfg)


def test_simulate_is_deterministic():
    cfg = CONFIGS / "triplet.json"
    a = safecons.simulate(cfg, "attack_defense", seed=3)
    b = safecons.simulate(cfg, "attack_defense", seed=3, parallel=True, reverse_order=True)
    assert a["csv"] == b["csv"]
    assert len(a["states"]) == 51
    assert all(0.0 <= s[0] <= 1.0 for row in a["states"] for s in row)


def test_honest_ring_reaches_consensus():
    traj = safecons.simulate(CONFIGS / "honest_ring.json")
    assert safecons.consensus_error(traj["states"][-1]) < 1e-3


def test_run_writes_outputs(tmp_path):
    code, summary = safecons.run(CONFIGS / "triplet.json", tmp_path / "out", seeds=[0, 1])
    assert code == 0
    assert summary["complete"]
    assert (tmp_path / "out" / "seed_1" / "attack_defense.csv").exists()
    assert summary["aggregate"]["improvement_pct"] > 0
    with pytest.raises(safecons.SafeconsError):
        safecons.run(CONFIGS / "triplet.json", tmp_path / "out", seeds=[0])


def test_certify_writes_certificates(tmp_path):
    code, summary = safecons.certify(CONFIGS / "certify.json", tmp_path)
    assert code == 0
    assert (tmp_path / "certify.json").exists()
    assert len(summary["agents"]) == 10


def test_no_network_traffic():
    assert safecons.network_call_count() == 0
