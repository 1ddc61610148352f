import numpy as np
import pandas as pd
import pytest

from metric_estimands.cli import main


@pytest.fixture
def run(tmp_path):
    """Run a subcommand writing to a file under tmp_path and return that path"""

    def _run(command, name, *extra):
        out = tmp_path / name
        assert main([command, *extra, "--out", str(out)]) == 0
        return out

    return _run


@pytest.mark.integration
class TestEstimandsCommand:
    """Test the estimands subcommand"""

    def test_windowed_is_flat(self, run):
        """Windowed estimands are the same number at every time"""
        out = run(
            "estimands", "windowed.csv",
            "--builtin", "dgp1", "--grid", "8:21:1", "--strategies", "windowed_7",
        )
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["t", "strategy", "nu", "value", "defined"]
        assert frame["value"].nunique() == 1
        assert frame["defined"].all()

    def test_zero_curve(self, run):
        """A zero effect gives zero estimands, blank before anyone is exposed"""
        out = run("estimands", "zero.csv", "--builtin", "dgp1", "--set", 'curve={"kind": "zero"}')
        frame = pd.read_csv(out)
        defined = frame[frame["defined"]]
        assert (defined["value"] == 0.0).all()
        first = frame[(frame["t"] == 0.0) & (frame["strategy"] == "cumulative")]
        assert first["value"].isna().all()

    def test_exposure_rate_matters(self, run):
        """Changing the exposure rate changes the cumulative estimand"""
        frames = []
        for rate in ("0.1", "1.0"):
            out = run(
                "estimands", f"rate_{rate}.csv",
                "--builtin", "dgp1", "--grid", "1:21:1", "--strategies", "cumulative",
                "--set", f"exposure.lambda={rate}",
            )
            frames.append(pd.read_csv(out))
        assert not np.allclose(frames[0]["value"], frames[1]["value"])


@pytest.mark.integration
class TestAnalyticCommands:
    """Test expected-z, power-analytic and decompose"""

    @pytest.mark.parametrize("command", ["expected-z", "power-analytic"])
    def test_power_table_header(self, run, command):
        """Both power tables share one header and record the Z convention"""
        out = run(command, "table.csv", "--builtin", "example2", "--grid", "1:3:1")
        assert out.read_text().splitlines()[0] == "t,expected_z,power,convention"
        frame = pd.read_csv(out)
        assert (frame["convention"] == "variance").all()
        assert frame["power"].between(0.0, 1.0).all()

    def test_convention_follows_config(self, run):
        """The convention column follows the scenario's z_convention"""
        out = run(
            "expected-z", "sd.csv",
            "--builtin", "dgp1", "--grid", "7:7:1", "--set", "z_convention=standard_deviation",
        )
        frame = pd.read_csv(out)
        assert frame.loc[0, "convention"] == "standard_deviation"

    def test_two_batch_expected_z(self, run):
        """E(Z_3) = 3.125 for the two-batch example"""
        out = run(
            "expected-z", "z.csv", "--builtin", "example2", "--grid", "3:3:1", "--with-variance"
        )
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["t", "expected_z", "power", "convention", "variance", "n_t"]
        assert frame.loc[0, "expected_z"] == pytest.approx(3.125, abs=1e-9)
        assert frame.loc[0, "n_t"] == 500

    def test_undefined_rows_are_blank(self, run):
        """No variance at t = 0 leaves E(Z) and power blank"""
        out = run("expected-z", "z0.csv", "--builtin", "example2", "--grid", "0:1:1")
        frame = pd.read_csv(out)
        assert np.isnan(frame.loc[0, "expected_z"])
        assert np.isnan(frame.loc[0, "power"])
        assert frame.loc[1, "expected_z"] == pytest.approx(3.125, abs=1e-9)

    def test_power_with_critical_value(self, run):
        """Power is one half where E(Z) equals the critical value"""
        out = run(
            "power-analytic", "power.csv",
            "--builtin", "example2", "--grid", "3:3:1", "--critical", "3.125",
            "--set", "sidedness=one",
        )
        frame = pd.read_csv(out)
        assert frame.loc[0, "power"] == pytest.approx(0.5, abs=1e-9)

    def test_decompose_zero_curve(self, run):
        """Every term vanishes without an effect"""
        out = run(
            "decompose", "terms.csv",
            "--builtin", "dgp1", "--set", 'curve={"kind": "zero"}',
            "--t", "7", "14", "--t-prime", "14", "21",
        )
        header = out.read_text().splitlines()[0]
        assert header == "t,t_prime,term1,term2,term3,total,direct,gap"
        frame = pd.read_csv(out)
        assert len(frame) == 2
        terms = ["term1", "term2", "term3", "total"]
        assert (frame[terms] == 0.0).all().all()

    def test_decompose_terms_add_up(self, run):
        """total is the sum of the three terms and matches the direct difference"""
        out = run("decompose", "sum.csv", "--builtin", "dgp1", "--t", "7", "--t-prime", "14")
        frame = pd.read_csv(out)
        row = frame.iloc[0]
        assert row["total"] == pytest.approx(row["term1"] + row["term2"] + row["term3"], abs=1e-9)
        assert abs(row["gap"]) < 1e-6

    def test_decompose_needs_pairs(self, tmp_path):
        """Unequal --t and --t-prime lists fail"""
        code = main(
            ["decompose", "--builtin", "dgp1", "--t", "7", "--t-prime", "14", "21",
             "--out", str(tmp_path / "x.csv")]
        )
        assert code == 1


@pytest.mark.integration
class TestSimulateCommands:
    """Test simulate, analyze and figures"""

    def test_simulation_is_reproducible(self, run):
        """Same seed, byte-identical file"""
        args = ("--builtin", "dgp1", "--reps", "30", "--seed", "11")
        first = run("simulate", "first.csv", *args)
        second = run("simulate", "second.csv", *args)
        assert first.read_bytes() == second.read_bytes()
        frame = pd.read_csv(first)
        assert list(frame.columns) == ["day", "strategy", "rejection_rate", "se", "defined"]
        assert len(frame) == 63

    def test_mean_z_columns(self, run):
        """--with-mean-z appends the mean Z columns"""
        out = run("simulate", "mean_z.csv", "--builtin", "dgp1", "--reps", "10", "--with-mean-z")
        frame = pd.read_csv(out)
        assert list(frame.columns)[-3:] == ["replications_defined", "mean_z", "mean_z_se"]

    def test_export_and_analyze(self, run, tmp_path):
        """An exported panel can be analysed on its own"""
        panel = tmp_path / "panel.csv"
        run("simulate", "sim.csv", "--builtin", "dgp1", "--reps", "5", "--export-panel", str(panel))
        assert panel.exists()
        out = run("analyze", "analysis.csv", "--panel", str(panel))
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["t", "strategy", "diff", "variance", "z", "n1", "n0"]
        assert len(frame) == 63

        known = run(
            "analyze", "known.csv",
            "--panel", str(panel), "--builtin", "dgp1", "--variance-mode", "known",
        )
        frame = pd.read_csv(known)
        assert frame[frame["t"] == 21]["z"].notna().all()

    def test_figures_bundle(self, tmp_path):
        """Six figure files with exposure curves; the expected-Z file matches the closed form"""
        out_dir = tmp_path / "figures"
        assert main(["figures", "--reps", "20", "--out", str(out_dir)]) == 0
        names = sorted(path.name for path in out_dir.glob("*.csv"))
        assert names == [
            "fig1_effects.csv",
            "fig2_curves.csv",
            "fig3_estimands.csv",
            "fig4_power_dgp1.csv",
            "fig5_power_dgp2.csv",
            "fig6_expected_z.csv",
        ]
        fig2 = pd.read_csv(out_dir / "fig2_curves.csv")
        assert list(fig2.columns) == ["t", "family", "curve", "density", "cumulative"]
        assert set(fig2["curve"]) == {
            "exponential_0.1", "exponential_0.4", "exponential_1", "fast", "slow",
        }
        exposure_rows = fig2[fig2["curve"] == "exponential_0.4"]
        assert (exposure_rows["family"] == "exposure").all()
        at_seven = exposure_rows[np.isclose(exposure_rows["t"], 7.0)].iloc[0]
        assert at_seven["cumulative"] == pytest.approx(1 - np.exp(-2.8), abs=1e-12)
        assert at_seven["density"] == pytest.approx(0.4 * np.exp(-2.8), abs=1e-12)
        for _, rows in fig2[fig2["family"] == "exposure"].groupby("curve"):
            assert np.all(np.diff(rows["cumulative"].to_numpy()) >= 0)

        fig6 = pd.read_csv(out_dir / "fig6_expected_z.csv")
        row = fig6[np.isclose(fig6["t"], 3.0)].iloc[0]
        assert row["expected_z"] == pytest.approx(3.125, abs=1e-9)
        assert row["closed_form"] == pytest.approx(3.125, abs=1e-12)


@pytest.mark.integration
class TestExitCodes:
    """Test failures map to exit codes"""

    def test_no_command(self):
        """Missing subcommand prints help and exits 2"""
        assert main([]) == 2

    def test_invalid_config_key(self, tmp_path):
        """Unknown keys are validation errors"""
        code = main(
            ["estimands", "--builtin", "dgp1", "--set", "colour=1", "--out", str(tmp_path / "x.csv")]
        )
        assert code == 2

    def test_missing_config_file(self, tmp_path):
        """Missing files are runtime errors"""
        code = main(
            ["estimands", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x.csv")]
        )
        assert code == 1

    def test_unknown_builtin(self, tmp_path):
        """Unknown built-ins are configuration errors"""
        code = main(["estimands", "--builtin", "dgp9", "--out", str(tmp_path / "x.csv")])
        assert code == 1

    @pytest.mark.parametrize("command", ["simulate", "figures"])
    def test_grid_rejected_by_simulations(self, tmp_path, command):
        """Simulations run on whole days and refuse a custom grid"""
        code = main(
            [command, "--builtin", "dgp1", "--reps", "2", "--grid", "1:5:1",
             "--out", str(tmp_path / "x")]
        )
        assert code == 1
        assert not (tmp_path / "x").exists()
