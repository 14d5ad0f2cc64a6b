import numpy as np
import pytest

from errors import ConfigError, ReportIOError
from experiments import (
    HEADER,
    ExperimentKind,
    Ordering,
    ReportRow,
    apply_ordering,
    default_config,
    emit_csv,
    parse_ordering,
    parse_orderings,
    permute,
    read_report,
    run_experiment,
    sort_ascending,
    sum_file,
)
from json_utils import read_json_lines
from streaming_moments import MomentAlgorithm


class TestOrderings:
    @pytest.mark.parametrize("text", ["permuted:7", "permuted=7", "permuted(7)", " Permuted:7 "])
    def test_permuted_spellings(self, text):
        assert parse_ordering(text) == Ordering("permuted", 7)
        assert parse_ordering(text).label == "permuted(7)"

    def test_raw_sorted_and_duplicates(self):
        assert parse_orderings(["raw", "sorted", "RAW"]) == (Ordering("raw"), Ordering("sorted"))

    def test_bad_orderings(self):
        for bad in (["shuffled"], ["permuted:"], []):
            with pytest.raises(ConfigError):
                parse_orderings(bad)

    def test_orderings_keep_the_multiset(self):
        xs = np.array([3.0, -1.0, 2.0, 2.0, 0.5])
        assert np.array_equal(sort_ascending(xs), [-1.0, 0.5, 2.0, 2.0, 3.0])
        assert np.array_equal(np.sort(permute(xs, 4)), np.sort(xs))
        assert np.array_equal(apply_ordering(xs, Ordering("raw")), xs)
        assert np.array_equal(apply_ordering(xs, Ordering("permuted", 4)), permute(xs, 4))


class TestConfig:
    def test_defaults_per_experiment(self):
        normal = default_config("normal")
        assert (normal.n, normal.runs, normal.statistics) == (100_000, 100, ("M", "V"))
        uniform = default_config("uniform32")
        assert uniform.precision == "binary32" and uniform.statistics == ("S", "M", "V")
        assert MomentAlgorithm.NAIVE_KNUTH in uniform.algorithms
        cash = default_config("cash-or-nothing")
        assert cash.runs == 1 and cash.statistics == ("M", "V", "Γ")

    def test_overrides_and_none(self):
        config = default_config("normal", n=10, runs=None, algorithms=["chanlewis"], seed=5)
        assert config.n == 10 and config.runs == 100 and config.seed == 5
        assert config.algorithms == (MomentAlgorithm.CHAN_LEWIS_KAHAN,)
        assert config.plan(3).seed == 8

    @pytest.mark.parametrize("kind, overrides", [
        ("asset-or-nothing", {"rebate": 1.0}),
        ("cash-or-nothing", {"epsilon": 0.0}),
        ("normal", {"runs": 0}),
        ("normal", {"n": 0}),
        ("normal", {"seed": 2 ** 64}),
        ("normal", {"algorithms": ["welford"]}),
        ("normal", {"precision": "binary16"}),
        ("lognormal", {}),
    ])
    def test_invalid(self, kind, overrides):
        with pytest.raises(ConfigError):
            default_config(kind, **overrides)


@pytest.fixture(scope="module")
def normal_report():
    config = default_config(
        "normal", n=2000, runs=2, seed=101,
        orderings=["raw", "sorted", "permuted:5"],
        algorithms=["Naive", "ChanLewisKahan"],
    )
    return run_experiment(config)


class TestNormalExperiment:
    def test_row_counts(self, normal_report):
        assert len(normal_report.run_rows) == 2 * 3 * 2 * 2
        assert len(normal_report.aggregate_rows) == 3 * 2 * 2
        assert {r.ordering for r in normal_report.rows} == {"raw", "sorted", "permuted(5)"}

    def test_values_and_errors(self, normal_report):
        for row in normal_report.select(algorithm="ChanLewisKahan", statistic="M"):
            if row.run is None:
                continue
            assert len(row.bits_hex) == 16
            assert row.rel_error < 1e-15
            assert abs(float(row.value) - row.exact) == pytest.approx(row.abs_error, abs=1e-11)

    def test_aggregate_is_the_mean_over_runs(self, normal_report):
        runs = normal_report.select(algorithm="Naive", ordering="raw", statistic="V")
        per_run = [r.rel_error for r in runs if r.run is not None]
        (aggregate,) = [r for r in runs if r.run is None]
        assert aggregate.rel_error == pytest.approx(sum(per_run) / len(per_run))

    def test_csv_round_trip_and_determinism(self, normal_report, tmp_path):
        path = emit_csv(normal_report, tmp_path / "normal.csv")
        assert path.read_text(encoding="utf-8").splitlines()[0] == ",".join(HEADER)
        assert read_report(path).rows == normal_report.rows
        again = run_experiment(default_config(
            "normal", n=2000, runs=2, seed=101,
            orderings=["raw", "sorted", "permuted:5"],
            algorithms=["Naive", "ChanLewisKahan"],
            output=tmp_path / "again.csv",
        ))
        assert again.rows == normal_report.rows
        assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_uniform32_reports_binary32_bits():
    report = run_experiment(default_config("uniform32", n=5000, runs=1, seed=3))
    rows = report.run_rows
    assert len(rows) == 2 * 8 * 3
    assert all(len(r.bits_hex) == 8 for r in rows)
    assert all(r.precision == "binary32" for r in rows)
    for row in report.select(algorithm="NaiveKahan", statistic="S"):
        assert row.ulps <= 2
    assert not report.aggregate_rows


def test_asset_experiment_writes_records(tmp_path):
    records = tmp_path / "records.jsonl"
    config = default_config(
        "asset-or-nothing", n=2000, runs=1, seed=17, block_size=256, workers=2,
        orderings=["raw", "sorted", "permuted:3"], records_path=records, audit=True,
    )
    report = run_experiment(config)
    assert len(report.rows) == 3 * len(config.algorithms) * 3
    lines = read_json_lines(records)
    assert len(lines) == 3 * len(config.algorithms)
    assert {line["ordering"] for line in lines} == {"raw", "sorted", "permuted(3)"}
    assert all(len(line["gamma_hex"]) == 16 for line in lines)


def test_cash_experiment_means_and_gamma_are_exact():
    config = default_config(
        "cash-or-nothing", n=3000, seed=23, block_size=200, workers=3,
        orderings=["raw", "sorted", "permuted:4"], algorithms=["Naive", "LingKahan", "ChanLewisKahan"],
    )
    report = run_experiment(config)
    for row in report.rows:
        # sorted LingKahan folds its mean increments sequentially and can land one ulp off
        if row.algorithm == "LingKahan" and row.ordering == "sorted":
            continue
        if row.statistic in ("M", "Γ"):
            assert row.abs_error == 0.0, row


class TestSumFile:
    def test_values(self):
        stats, exact = sum_file(["1", "2", "3"], "chanlewis")
        assert stats.algorithm is MomentAlgorithm.CHAN_LEWIS_KAHAN
        assert stats.mean == 2.0 and exact.mean == 2

    @pytest.mark.parametrize("values, precision", [(["1", "x"], "binary64"), ([], "binary64"),
                                                   (["1e39"], "binary32")])
    def test_rejects_bad_input(self, values, precision):
        with pytest.raises(ConfigError):
            sum_file(values, "naive", precision)


def test_read_report_checks_the_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(ReportIOError):
        read_report(bad)
    with pytest.raises(ReportIOError):
        read_report(tmp_path / "missing.csv")


def test_report_row_parses_aggregate_rows():
    row = ReportRow.from_csv_row(["normal", "mean", "Ling", "raw", "M", "", "", "1e-15", "2e-20", "0.5"])
    assert row.run is None and row.exact is None and row.value is None
    assert ExperimentKind(row.experiment) is ExperimentKind.NORMAL
