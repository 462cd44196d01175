import json

import numpy as np
import pytest

from constants.commands import CSV_COLUMNS, CSV_MAGIC, FORMAT_VERSION, Command
from models.experiment import ExperimentConfig
from utils.errors import ConfigValidationError
from utils.storage import ArtifactStorage, ConfigStorage, read_csv_header


@pytest.fixture
def storage(tmp_path):
    return ArtifactStorage(tmp_path / "out", "abc123")


class TestArtifactStorage:
    def test_csv_header(self, storage):
        path = storage.write_csv(
            Command.LYAPUNOV, [(0.5, 0.1, 0.01, 100, 4)], CSV_COLUMNS[Command.LYAPUNOV]
        )
        header = read_csv_header(path)
        assert header["magic"] == CSV_MAGIC
        assert header["command"] == "lyapunov"
        assert header["config_hash"] == "abc123"
        assert header["columns"] == "E,gamma,stderr,n,R"

    def test_csv_keeps_full_precision(self, storage):
        value = 1.0 / 3.0
        path = storage.write_csv(Command.DYNLOCAL, [(1, value, np.float64(0.0), True)], ("m", "a", "b", "c"))
        last = path.read_text(encoding="utf-8").splitlines()[-1]
        assert last == f"1,{value!r},0.0,1"

    def test_row_width_checked(self, storage):
        with pytest.raises(ValueError):
            storage.write_csv(Command.KS, [(1, 2)], CSV_COLUMNS[Command.KS])

    def test_json_sorted_with_version(self, storage):
        path = storage.write_json(Command.SPECTRAL_AVG, {"integral": 2j, "values": np.arange(3)})
        text = path.read_text(encoding="utf-8")
        document = json.loads(text)
        assert document["format_version"] == FORMAT_VERSION
        assert document["integral"] == {"re": 0.0, "im": 2.0}
        assert document["values"] == [0, 1, 2]
        assert list(document) == sorted(document)
        assert path.name == "spectral_avg.json"

    def test_named_artifact(self, storage):
        assert storage.path_for(Command.KS, "json", "norms").name == "ks_norms.json"


class TestConfigStorage:
    def test_round_trip(self, tmp_path):
        experiment = ExperimentConfig().with_overrides("lyapunov", steps=500)
        storage = ConfigStorage(tmp_path / "experiment.yaml")
        storage.save(experiment)
        loaded = storage.load()
        assert loaded == experiment
        assert loaded.config_hash() == experiment.config_hash()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert ConfigStorage(path).load() == ExperimentConfig()

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigValidationError):
            ConfigStorage(path).load()
