import json

import yaml

from main import main
from models.experiment import ExperimentConfig
from utils.storage import ConfigStorage, read_csv_header

LYAPUNOV_ARGS = ["lyapunov", "--energy-grid", "0:1:0.5", "--steps", "200", "--realizations", "2"]


def write_config(path, data) -> str:
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


class TestMain:
    def test_lyapunov_run(self, tmp_path):
        out = tmp_path / "out"
        assert main(["--output", str(out), "--seed", "3"] + LYAPUNOV_ARGS) == 0
        path = out / "lyapunov.csv"
        assert read_csv_header(path)["command"] == "lyapunov"
        assert len(path.read_text(encoding="utf-8").splitlines()) == 4 + 1 + 3

    def test_reruns_are_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["--output", str(first), "--workers", "2"] + LYAPUNOV_ARGS) == 0
        assert main(["--output", str(second), "--workers", "1"] + LYAPUNOV_ARGS) == 0
        assert (first / "lyapunov.csv").read_bytes() == (second / "lyapunov.csv").read_bytes()

    def test_missing_subcommand(self):
        assert main([]) == 2

    def test_unknown_config_key(self, tmp_path):
        path = write_config(tmp_path / "bad.yaml", {"lyapunov": {"stepz": 10}})
        assert main(["--config", path] + LYAPUNOV_ARGS) == 2

    def test_out_of_range_override(self, tmp_path):
        assert main(["--output", str(tmp_path), "lyapunov", "--realizations", "0"]) == 2

    def test_unconverged_measure(self, tmp_path):
        path = write_config(tmp_path / "f.yaml", {
            "furstenberg": {"grid": 128, "max_iter": 1, "concentration_steps": 10, "trials": 2},
            "output": {"directory": str(tmp_path / "out")},
        })
        assert main(["--config", path, "furstenberg"]) == 3
        report = json.loads((tmp_path / "out" / "furstenberg.json").read_text(encoding="utf-8"))
        assert report["converged"] is False
        assert report["iterations"] == 1

    def test_dump_config(self, tmp_path):
        target = tmp_path / "dumped.yaml"
        assert main(["--seed", "7", "--dump-config", str(target)]) == 0
        assert ConfigStorage(target).load().seed == 7

    def test_dump_config_includes_subcommand_flags(self, tmp_path):
        target = tmp_path / "dumped.yaml"
        assert main(["--dump-config", str(target)] + LYAPUNOV_ARGS) == 0
        dumped = ConfigStorage(target).load()
        assert dumped.lyapunov.steps == 200
        assert dumped.lyapunov.energy_grid == "0:1:0.5"

    def test_header_hash_matches_run_config(self, tmp_path):
        assert main(["--output", str(tmp_path), "--seed", "3"] + LYAPUNOV_ARGS) == 0
        expected = ExperimentConfig(seed=3).with_overrides(
            "lyapunov", energy_grid="0:1:0.5", steps=200, realizations=2
        )
        assert read_csv_header(tmp_path / "lyapunov.csv")["config_hash"] == expected.config_hash()

    def test_ks_reports_route_agreement(self, tmp_path):
        out = tmp_path / "out"
        path = write_config(tmp_path / "ks.yaml", {
            "distribution": {"kind": "uniform", "support": [0.0, 1.0]},
            "ks": {
                "L": 3, "m_max": 3, "grid_n": 2048, "grid_x": 16.0, "e_points": 33,
                "mc_realizations": 2000, "certify": False, "jacobian_instances": 0,
            },
            "output": {"directory": str(out)},
        })
        assert main(["--config", path, "ks"]) == 0
        assert read_csv_header(out / "ks.csv")["columns"].endswith(",agrees")
        rows = [line.split(",") for line in (out / "ks.csv").read_text(encoding="utf-8").splitlines()[5:]]
        assert [row[-1] for row in rows] == ["1", "1", "1"]
        report = json.loads((out / "ks_report.json").read_text(encoding="utf-8"))
        assert report["routes_agree"] is True
