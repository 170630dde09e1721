import re
from pathlib import Path

import pytest
import numpy as np

from src.SPDC_g2 import __version__
from src.SPDC_g2.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_USAGE, OUTPUT_DIR_ENV, main
from src.SPDC_g2.manifest import MANIFEST_SUFFIX, RunManifest, manifest_path, read_csv
from src.SPDC_g2.oracle import CountModel, exact_expected_g2
from src.SPDC_g2.pipelines import NS, PROTOCOLS, resolve_protocol, run_census
from src.SPDC_g2.tag_io import read_record, write_record
from src.SPDC_g2.timetag_model import BIN_COLUMNS, TagRecord

HEADER = re.compile(r"^# SPDC_g2 (\S+) manifest=([0-9a-f]{16})$")


def run(*argv) -> int:
    return main([str(arg) for arg in argv])


@pytest.fixture
def tags(tmp_path) -> Path:
    path = tmp_path / "tags.bg2t"
    assert run("simulate", "--pair-rate", 2e7, "--duration-s", 0.0005, "--seed", 5, "-o", path) == EXIT_OK
    return path


def test_census_ratio():
    """
    Test that at 10 ns, with eta_c = 0.25, the unheralded single-photon bin fraction is four
    times the heralded one within 25%, while multi-photon bins stay below 1%.
    """

    result = run_census(seed=0)
    ratios = result.frames["census_ratio.csv"].set_index("tau_ps")
    censuses = result.frames["census.csv"]

    assert result.config.eta_c == 0.25
    assert 3.0 <= ratios.loc[10 * NS, "single_ratio"] <= 5.0

    short = censuses[censuses["tau_ps"] == 10 * NS]
    assert (short["multi"] < 0.01).all()

    # Every census partitions its bins
    totals = censuses["no_photon"] + censuses["single"] + censuses["multi"]
    np.testing.assert_allclose(totals, 1.0, rtol=0, atol=1e-12)


def test_reproduce_is_deterministic(tmp_path):
    """
    Test that `reproduce fig2` twice with the same seed writes byte-identical CSV files.
    """

    first, second = tmp_path / "first", tmp_path / "second"

    assert run("reproduce", "fig2", "--seed", 3, "--outdir", first) == EXIT_OK
    assert run("reproduce", "bidirectional", "--seed", 3, "--outdir", second) == EXIT_OK

    assert (first / "bidirectional.csv").read_bytes() == (second / "bidirectional.csv").read_bytes()

    manifests = [RunManifest.read(manifest_path(d / "bidirectional.csv")) for d in (first, second)]
    assert manifests[0].digest() == manifests[1].digest()
    assert manifests[0].argv != manifests[1].argv


def test_protocol_lookup():
    """
    Test that protocols are found by name or alias and that unknown targets are refused.
    """

    assert resolve_protocol("fig5") is PROTOCOLS["census"]
    assert resolve_protocol("power").alias == "fig6"

    with pytest.raises(ValueError):
        resolve_protocol("fig7")


def test_simulate_writes_record_and_manifest(tags):
    """
    Test that simulate writes a readable record with its manifest next to it.
    """

    record = read_record(tags)
    manifest = RunManifest.read(manifest_path(tags))

    assert len(record) > 0
    assert record.duration == 500_000_000
    assert manifest.subcommand == "simulate"
    assert manifest.seed == 5
    assert manifest.config["pair_rate"] == repr(2e7)


def test_analyze_csv_and_replay(tags, tmp_path):
    """
    Test the analysis output (header line, columns) and that replaying its manifest rewrites
    a byte-identical file.
    """

    assert run("analyze", tags, "--tau-ns", 30, 100, "--samples", 200, "--seed", 1, "--outdir", tmp_path) == EXIT_OK

    output = tmp_path / "tags_g2.csv"
    content = output.read_bytes()
    header = content.decode().splitlines()[0]
    manifest = RunManifest.read(manifest_path(output))

    assert HEADER.match(header).groups() == (__version__, manifest.digest())
    assert manifest.inputs == (str(tags),)

    frame = read_csv(output)
    assert list(frame.columns) == ["tau_ps", "g2", "n_w", "n_total", "std"]
    assert frame["tau_ps"].tolist() == [30_000, 100_000]

    output.unlink()
    assert run("replay", manifest_path(output)) == EXIT_OK
    assert output.read_bytes() == content


def test_analyze_variants(tags, tmp_path):
    """
    Test the full-record, bidirectional and bin dump variants of analyze.
    """

    pairwise = tmp_path / "pairwise.csv"
    assert run("analyze", tags, "--mode", "two-detector", "--window-ps", 500, "-o", pairwise) == EXIT_OK
    assert read_csv(pairwise)["kind"].tolist() == ["two_detector"]

    both_ways = tmp_path / "both_ways.csv"
    assert run("analyze", tags, "--mode", "heralded", "--bidirectional", 3, "--samples", 100, "-o", both_ways) == EXIT_OK
    assert read_csv(both_ways)["tau_ps"].tolist() == [-90_000, -60_000, -30_000, 30_000, 60_000, 90_000]

    bins = tmp_path / "bins.csv"
    assert run("analyze", tags, "--samples", 50, "--dump-bins", bins, "-o", tmp_path / "g2.csv") == EXIT_OK
    dump = read_csv(bins)
    assert list(dump.columns) == BIN_COLUMNS
    assert len(dump) == 50
    assert (tmp_path / ("bins.csv" + MANIFEST_SUFFIX)).exists()


def test_undefined_estimates_are_written_as_undefined(tmp_path):
    """
    Test that estimates without contributing bins are written as 'undefined'.
    """

    path = tmp_path / "empty.bg2t"
    write_record(TagRecord.empty(1_000_000_000), path)

    assert run("analyze", path, "--outdir", tmp_path) == EXIT_OK

    lines = (tmp_path / "empty_g2.csv").read_text().splitlines()
    assert lines[2] == "30000,undefined,0,200,undefined"
    assert np.isnan(read_csv(tmp_path / "empty_g2.csv")["g2"].iloc[0])


def test_census_and_sweep_commands(tags, tmp_path):
    """
    Test the census, sweep-tau and sweep-power subcommands.
    """

    assert run("census", tags, "--tau-ns", 10, 30, "--samples", 500, "--outdir", tmp_path) == EXIT_OK
    censuses = read_csv(tmp_path / "tags_census.csv")
    assert censuses["mode"].tolist() == ["unheralded", "heralded"] * 2

    assert run("sweep-tau", tags, "--tau-min-ns", 10, "--tau-max-ns", 50, "--tau-step-ns", 20, "--outdir", tmp_path) == EXIT_OK
    assert read_csv(tmp_path / "tags_sweep_tau.csv")["tau_ps"].tolist() == [10_000, 30_000, 50_000]

    assert (
        run("sweep-power", "--pair-rates", 5e6, 2e7, "--tau-ns", 10, "--samples", 100, "--repeats", 3, "--outdir", tmp_path)
        == EXIT_OK
    )
    power = read_csv(tmp_path / "sweep_power.csv")
    assert power["pair_rate"].tolist() == [5e6, 2e7]


def test_sweep_power_duration_precedence(tmp_path):
    """
    Test that a duration from the configuration file is kept by sweep-power, and that the
    automatic duration applies only when neither the file nor the flags set one.
    """

    config = tmp_path / "source.cfg"
    config.write_text("# two milliseconds\nduration=2000000000\n")
    common = ["--pair-rates", 5e6, "--tau-ns", 10, "--samples", 100, "--repeats", 2]

    assert run("sweep-power", "--config", config, *common, "--outdir", tmp_path / "file") == EXIT_OK
    manifest = RunManifest.read(manifest_path(tmp_path / "file" / "sweep_power.csv"))
    assert manifest.config["duration"] == "2000000000"

    assert run("sweep-power", "--config", config, "--duration-s", 0.001, *common, "--outdir", tmp_path / "flag") == EXIT_OK
    manifest = RunManifest.read(manifest_path(tmp_path / "flag" / "sweep_power.csv"))
    assert manifest.config["duration"] == "1000000000"

    assert run("sweep-power", *common, "--outdir", tmp_path / "auto") == EXIT_OK
    manifest = RunManifest.read(manifest_path(tmp_path / "auto" / "sweep_power.csv"))
    assert manifest.config["duration"] == str(4 * 100 * 10_000)


def test_output_directory_from_environment(tmp_path, monkeypatch):
    """
    Test that the output directory defaults to the environment variable.
    """

    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))

    assert run("simulate", "--duration-s", 0.0001) == EXIT_OK
    assert (tmp_path / "tags.bg2t").exists()
    assert (tmp_path / ("tags.bg2t" + MANIFEST_SUFFIX)).exists()


def test_oracle_command(capsys):
    """
    Test that the oracle prints one key=value line per estimator and census class.
    """

    assert run("oracle", "--lambda-a", 0.2, "--lambda-b", 0.3, "--census") == EXIT_OK

    values = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    expected = exact_expected_g2(CountModel(lambda_a=0.2, lambda_b=0.3), "unheralded_binned")

    assert float(values["unheralded_binned"]) == expected
    assert "heralded_binned" in values
    assert sum(float(values[f"census.heralded.{name}"]) for name in ("no_photon", "single", "multi")) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["analyze"],
        ["analyze", "tags.bg2t", "--samples", "ten"],
        ["analyze", "tags.bg2t", "--mode", "four-detector"],
        ["sweep-power", "--tau-ns", "10"],
        ["-v", "-q", "oracle"],
    ],
)
def test_usage_errors(argv):
    """
    Test that malformed arguments exit with code 1.
    """
    assert run(*argv) == EXIT_USAGE


def test_help_and_version(capsys):
    """
    Test that --help and --version exit successfully.
    """

    assert run("--version") == EXIT_OK
    assert __version__ in capsys.readouterr().out
    assert run("analyze", "--help") == EXIT_OK


def test_io_errors(tmp_path, caplog):
    """
    Test that missing and undecodable tag files exit with code 2.
    """

    assert run("analyze", tmp_path / "missing.bg2t") == EXIT_IO
    assert "I/O error" in caplog.text

    garbage = tmp_path / "garbage.bg2t"
    garbage.write_bytes(b"not a tag file at all")
    assert run("census", garbage) == EXIT_IO


def test_config_errors(tags, tmp_path):
    """
    Test that invalid configurations and parameters exit with code 3.
    """

    assert run("simulate", "--eta-a", 1.5, "--outdir", tmp_path) == EXIT_CONFIG
    assert run("oracle", "--lambda-a", 50) == EXIT_CONFIG
    assert run("analyze", tags, "--tau-ns", 1_000_000, "--outdir", tmp_path) == EXIT_CONFIG
    assert run("sweep-tau", tags, "--tau-step-ns", 0, "--outdir", tmp_path) == EXIT_CONFIG
    assert run("analyze", tags, "--tau-ns", 30, 30, "--outdir", tmp_path) == EXIT_CONFIG

    bad = tmp_path / "bad.cfg"
    bad.write_text("eta_z=0.1\n")
    assert run("simulate", "--config", bad, "--outdir", tmp_path) == EXIT_CONFIG


def test_tampered_manifest_is_refused(tags, tmp_path):
    """
    Test that replay refuses a manifest whose digest does not match its content.
    """

    path = manifest_path(tags)
    path.write_text(path.read_text().replace("seed=5", "seed=6"))

    assert run("replay", path) == EXIT_CONFIG
