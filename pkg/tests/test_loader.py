import os
from unittest.mock import patch

import pytest
import yaml

from src import deps
from src.errors import ConfigError, UsageError
from src.loader import load_difficulty_table, load_samples, load_sim_config, load_structured

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_samples_plain_column(tmp_path):
    """
    One value per line, no header, blank lines ignored.
    """
    samples = load_samples(write(tmp_path / "bgt.csv", "10.5\n\n3\n7.25\n"))
    assert samples.values == [10.5, 3.0, 7.25]
    assert samples.name == "bgt.csv"


def test_load_samples_header_and_column(tmp_path):
    path = write(tmp_path / "bench.csv", "height,attempts,bgt_ms\n1,40,812\n2,3,55\n")
    assert load_samples(path).values == [1.0, 2.0]
    assert load_samples(path, column="attempts").values == [40.0, 3.0]
    assert load_samples(path, column="bgt_ms", name="bgt").name == "bgt"
    with pytest.raises(UsageError):
        load_samples(path, column="missing")


def test_load_samples_single_column_header(tmp_path):
    path = write(tmp_path / "one.csv", "bgt_ms\n5\n6\n")
    assert load_samples(path, column="bgt_ms").values == [5.0, 6.0]


def test_load_samples_reports_line_number(tmp_path):
    path = write(tmp_path / "bad.csv", "1.0\n2.0\n\nabc\n")
    with pytest.raises(UsageError) as e:
        load_samples(path)
    assert "bad.csv:4" in str(e.value)


def test_load_samples_empty_or_missing(tmp_path):
    with pytest.raises(UsageError):
        load_samples(write(tmp_path / "empty.csv", ""))
    with pytest.raises(UsageError):
        load_samples(write(tmp_path / "blank.csv", "\n\n"))
    with pytest.raises(UsageError):
        load_samples(write(tmp_path / "header.csv", "bgt_ms\n"))
    with pytest.raises(UsageError):
        load_samples(str(tmp_path / "nowhere.csv"))


def test_load_structured_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_structured(str(tmp_path / "missing.yaml"))
    with pytest.raises(ConfigError):
        load_structured(write(tmp_path / "broken.yaml", "nodes: [unclosed"))
    with pytest.raises(ConfigError):
        load_structured(write(tmp_path / "list.yaml", "- 1\n- 2\n"))


def test_bundled_configs_parse():
    fig2 = load_sim_config(os.path.join(REPO_ROOT, "config", "fig2-like.yaml"))
    assert len(fig2.nodes) == 12
    assert sum(node.role == "bootnode" for node in fig2.nodes) == 2
    assert fig2.latency.lookup("us-east", "seoul") == (180.0, 60.0)

    step = load_sim_config(os.path.join(REPO_ROOT, "config", "controller-step.yaml"))
    assert step.hashrate_steps[0].at_height == 200
    assert len(step.difficulty.levels) == 40


def test_sim_config_key_path(tmp_path):
    path = write(tmp_path / "sim.yaml", "duration_s: 10\nnodes:\n  - {id: a, hashrate: 1}\n  - {id: b, hashrate: 0}\n")
    with pytest.raises(ConfigError) as e:
        load_sim_config(path)
    assert e.value.key_path == "nodes.1.hashrate"
    assert str(e.value).startswith("nodes.1.hashrate: ")


def test_difficulty_table_file(tmp_path, stand_in_table):
    path = tmp_path / "table.yaml"
    path.write_text(yaml.safe_dump(stand_in_table.model_dump(mode="json")), encoding="utf-8")
    assert load_difficulty_table(str(path)) == stand_in_table

    path.write_text(
        yaml.safe_dump({"levels": [{"params": {"n": 16, "wc": 3, "wr": 4}, "success_prob": 0.1}] * 2}),
        encoding="utf-8",
    )
    with pytest.raises(ConfigError):
        load_difficulty_table(str(path))


def test_table_from_environment(tmp_path, stand_in_table):
    path = tmp_path / "table.json"
    path.write_text(stand_in_table.model_dump_json(), encoding="utf-8")
    deps.reset_difficulty_table()
    try:
        with patch.dict(os.environ, {"ECCPOW_TABLE": str(path)}):
            table = deps.get_difficulty_table()
            assert table == stand_in_table
            assert deps.get_difficulty_table() is table
    finally:
        deps.reset_difficulty_table()
