import json

import pytest

from celloffload.cli import main
from celloffload.scenarios import (
    BUILTIN_SCENARIOS,
    ConfigError,
    ScenarioConfig,
    default_replications,
    dump_config,
    get_scenario,
    load_config,
)
from celloffload.mobility import SECONDS_PER_DAY


# --- scenarios -----------------------------------------------------------------------

def test_builtin_values():
    s = get_scenario("streaming")
    assert (s.n, s.mu_beta, s.sigma, s.mean_contact_duration, s.deadline, s.chunk_bytes) == \
        (100, 13.0, 0.58, 66.46, 120.0, 1e6)
    r = get_scenario("road_traffic")
    assert (r.n, r.mu_beta, r.deadline) == (1000, 1.2, 600.0)
    assert get_scenario("social_data").chunk_bytes == 4e3
    assert get_scenario("news_feed").deadline == 3600.0
    assert set(BUILTIN_SCENARIOS) == {"streaming", "road_traffic", "news_feed", "social_data"}


def test_units_and_sigma_modes():
    s = get_scenario("news_feed")
    assert s.mean_rate == pytest.approx(0.69 / SECONDS_PER_DAY)
    assert s.rate_stddev == pytest.approx(2.0 * 0.69 / SECONDS_PER_DAY)
    a = s.with_(sigma=0.04, sigma_mode="absolute")
    assert a.rate_stddev == pytest.approx(0.04 / SECONDS_PER_DAY)
    assert s.with_(sparsity=0.5).chain_params().mean_rate == pytest.approx(0.5 * s.mean_rate)


def test_scaled_keeps_total_rate():
    r = get_scenario("road_traffic").scaled_to(300)
    assert r.n == 300 and r.n * r.mu_beta == pytest.approx(1200.0)


def test_default_replications():
    assert default_replications(200) == 1000 and default_replications(201) == 100
    assert get_scenario("road_traffic").n_replications == 100


@pytest.mark.parametrize("change", [{"n": 1}, {"deadline": 0.0}, {"sigma": -1.0}, {"sparsity": 1.0},
                                    {"sigma_mode": "log"}, {"n_rounds": 0}, {"mu_beta": float("nan")}])
def test_config_validation(change):
    with pytest.raises(ConfigError):
        get_scenario("streaming").with_(**change)


def test_config_round_trip(tmp_path):
    s = get_scenario("social_data").with_(seed=9, sparsity=0.2)
    dump_config(s, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == s


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(tmp_path / "bad.json")
    d = get_scenario("streaming").to_dict()
    with pytest.raises(ConfigError, match="unknown"):
        ScenarioConfig.from_dict({**d, "speed": 1})
    del d["deadline"]
    with pytest.raises(ConfigError, match="missing"):
        ScenarioConfig.from_dict(d)
    with pytest.raises(ConfigError):
        get_scenario("marathon")


def test_seed_streams_reproducible():
    s = get_scenario("streaming")
    assert s.seed_streams() == s.seed_streams()
    assert s.seed_streams() != s.with_(seed=1).seed_streams()
    assert len(set(s.seed_streams())) == 3


# --- command line ---------------------------------------------------------------------

SMALL = ["--n", "20", "--n-rounds", "8"]


def test_cli_unknown_scenario_exit_code(capsys):
    assert main(["scenario", "marathon"]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_cli_bad_config_exit_code(tmp_path):
    (tmp_path / "c.json").write_text('{"n": 5}')
    assert main(["scenario", "--config", str(tmp_path / "c.json")]) == 2
    assert main(["scenario"]) == 2


def test_cli_scenario_writes_metadata(tmp_path):
    out, series = tmp_path / "s.csv", tmp_path / "h.json"
    rc = main(["scenario", "social_data", *SMALL, "--seed", "4", "--out", str(out), "--series", str(series)])
    assert rc == 0
    first = out.read_text().splitlines()[0]
    meta = json.loads(first[len("# metadata: "):])
    assert meta["config"]["seed"] == 4 and meta["config"]["n"] == 20
    doc = json.loads(series.read_text())
    assert len(doc["rows"]) == 8


def test_cli_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["scenario", "social_data", *SMALL, "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_validate_tolerance_exit_code(tmp_path):
    args = ["validate", "--n", "20", "--setting", "60:17", "--d", "1", "5", "--replications", "20"]
    assert main(args + ["--tolerance", "1.0"]) == 0
    assert main(args + ["--tolerance", "0.0"]) == 3
    assert main(["validate", "--n", "20", "--d", "30"]) == 2
    assert main(["validate", "--setting", "60"]) == 2


def test_cli_sweep_and_controller(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["sweep", "n_users", "--values", "10", "15", "--n-rounds", "5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4 and "pt_linear_D" in lines[1]
    assert main(["sweep", "sigma"]) == 2
    assert main(["controller", "--n", "20", "--n-rounds", "30", "--step-round", "10"]) == 0
    assert main(["controller", "--n-rounds", "30", "--step-round", "40"]) == 2


def test_cli_trace(tmp_path, capsys):
    path = tmp_path / "t.csv"
    path.write_text("".join(f"{i % 4},{(i + 1) % 4},{10.0 * i},1.0\n" for i in range(40)))
    assert main(["trace", str(path), "--deadline", "50", "--out", str(tmp_path / "o.csv")]) == 0
    assert "4 nodes" in capsys.readouterr().out
    assert main(["trace", str(path), "--deadline", "50", "--n-rounds", "99"]) == 2
    assert main(["trace", str(tmp_path / "missing.csv"), "--deadline", "5"]) == 2


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
