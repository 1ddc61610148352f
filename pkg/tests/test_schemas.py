import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from metric_estimands import schemas
from metric_estimands.config import settings
from metric_estimands.exceptions import ConfigurationError, DomainError
from metric_estimands.exposure import Exponential, TwoPoint
from metric_estimands.models import VarianceMode

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"


@pytest.fixture
def dgp1_document():
    return schemas.builtin_document("dgp1")


@pytest.mark.unit
class TestGrid:
    """Test start:stop:step grids"""

    def test_half_day_grid(self):
        """0:21:0.5 has 43 points including both ends"""
        grid = schemas.parse_grid("0:21:0.5")
        assert len(grid) == 43
        assert grid[0] == 0.0 and grid[-1] == 21.0

    def test_daily_grid(self):
        """1:21:1 is days 1 through 21"""
        assert np.array_equal(schemas.parse_grid("1:21:1"), np.arange(1.0, 22.0))

    def test_tenth_steps_are_clean(self):
        """Accumulated float error is rounded away"""
        grid = schemas.parse_grid("0:21:0.1")
        assert len(grid) == 211
        assert 0.3 in grid

    @pytest.mark.parametrize("text", ["0:21", "a:b:c", "0:21:0", "5:1:1", "0:21:-1"])
    def test_invalid_grids(self, text):
        """Malformed grids are domain errors"""
        with pytest.raises(DomainError):
            schemas.parse_grid(text)


@pytest.mark.unit
class TestOverrides:
    """Test dotted-path overrides"""

    def test_scalar_override(self, dgp1_document):
        """Numbers are parsed as JSON"""
        result = schemas.apply_overrides(dgp1_document, ["exposure.lambda=0.1", "n_users=100"])
        assert result["exposure"]["lambda"] == 0.1
        assert result["n_users"] == 100
        assert dgp1_document["n_users"] == 700

    def test_list_index(self, dgp1_document):
        """Integer path segments index into lists"""
        result = schemas.apply_overrides(dgp1_document, ["strategies.1.nu=14"])
        assert result["strategies"][1]["nu"] == 14

    def test_object_value(self, dgp1_document):
        """Whole objects can be replaced"""
        result = schemas.apply_overrides(dgp1_document, ['curve={"kind": "zero"}'])
        assert result["curve"] == {"kind": "zero"}

    def test_plain_string(self, dgp1_document):
        """Values that are not JSON stay strings"""
        result = schemas.apply_overrides(dgp1_document, ["sidedness=one"])
        assert result["sidedness"] == "one"

    @pytest.mark.parametrize("override", ["n_users", "=3", "strategies.9.nu=1", "n_users.x=1"])
    def test_bad_overrides(self, dgp1_document, override):
        """Malformed overrides are configuration errors"""
        with pytest.raises(ConfigurationError):
            schemas.apply_overrides(dgp1_document, [override])


@pytest.mark.unit
class TestLoadConfig:
    """Test scenario documents"""

    def test_builtin_uses_desk_replications(self):
        """Built-ins default to the quick replication count"""
        config = schemas.load_config(builtin="dgp1")
        assert config.name == "dgp1"
        assert config.replications == settings.desk_replications
        full = schemas.load_config(builtin="dgp1", full_fidelity=True)
        assert full.replications == settings.full_replications

    def test_builtin_round_trip(self):
        """A built-in survives dumping to JSON and validating again"""
        config = schemas.load_config(builtin="example2")
        assert isinstance(config.exposure, TwoPoint)
        assert config.variance_mode == VarianceMode.KNOWN

    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_scenarios_validate(self, path):
        """Every scenario file in the repository loads"""
        config = schemas.load_config(path=path)
        assert config.name == path.stem
        assert len(config.grid()) > 0

    def test_lambda_key(self):
        """Exponential rates use the 'lambda' key in documents"""
        config = schemas.load_config(path=SCENARIO_DIR / "dgp1.json")
        assert isinstance(config.exposure, Exponential)
        assert config.exposure.rate == 0.4
        assert list(config.grid()) == list(np.arange(1.0, 22.0))

    def test_overrides_applied_before_validation(self):
        """Overrides reach the validated model"""
        config = schemas.load_config(builtin="dgp1", overrides=["seed=7", "replications=10"])
        assert config.seed == 7
        assert config.replications == 10

    def test_unknown_key_rejected(self, tmp_path, dgp1_document):
        """Unknown keys fail validation"""
        dgp1_document["colour"] = "blue"
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(dgp1_document))
        with pytest.raises(ValidationError):
            schemas.load_config(path=path)

    def test_invalid_value_rejected(self):
        """Values outside their range fail validation"""
        with pytest.raises(ValidationError):
            schemas.load_config(builtin="dgp1", overrides=["alpha=1.5"])

    def test_broken_json(self, tmp_path):
        """Unparseable files are configuration errors"""
        path = tmp_path / "broken.json"
        path.write_text('{"n_users": ')
        with pytest.raises(ConfigurationError):
            schemas.load_config(path=path)

    def test_needs_a_source(self):
        """Either a file or a built-in is required"""
        with pytest.raises(ConfigurationError):
            schemas.load_config()
        with pytest.raises(ConfigurationError):
            schemas.load_config(path=SCENARIO_DIR / "dgp1.json", builtin="dgp1")

    def test_default_grid(self):
        """Without an output grid, analysis runs on every day"""
        config = schemas.load_config(builtin="dgp1")
        assert list(config.grid()) == list(np.arange(0.0, 22.0))
