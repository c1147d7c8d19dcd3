import math

import pytest

from abag_bench.dataset import (
    Antibody,
    Antigen,
    Assay,
    AssayRecord,
    Dataset,
    Epitope,
    HeavyIsotype,
    Host,
    LightIsotype,
    Origin,
    Subtype,
    YearCategory,
    binarize_elisa,
    binarize_hai,
    load_dataset,
    summarize,
    summary_to_csv,
    summary_to_json,
    write_dataset,
)
from abag_bench.errors import DomainError, IntegrityError, ParseError


class TestBinarization:
    def test_elisa_boundaries(self):
        assert binarize_elisa(0.5) is False   # range minimum, negative
        assert binarize_elisa(1.0) is False   # threshold itself is negative
        assert binarize_elisa(1.0000001) is True
        assert binarize_elisa(20.0) is True   # range maximum, positive

    def test_hai_boundaries(self):
        assert binarize_hai(0.005) is True    # most potent, positive
        assert binarize_hai(10.0) is False    # threshold itself is negative
        assert binarize_hai(9.999999) is True
        assert binarize_hai(20.0) is False    # range maximum, negative

    @pytest.mark.parametrize("value", [0.4999, 20.001, -1.0, 0.0])
    def test_elisa_out_of_range(self, value):
        with pytest.raises(DomainError):
            binarize_elisa(value)

    @pytest.mark.parametrize("value", [0.004, 20.01, -5.0])
    def test_hai_out_of_range(self, value):
        with pytest.raises(DomainError):
            binarize_hai(value)

    def test_elisa_monotone(self):
        values = [0.5 + 19.5 * i / 200 for i in range(201)]
        labels = [binarize_elisa(v) for v in values]
        first_true = labels.index(True)
        assert all(labels[first_true:])

    def test_hai_monotone(self):
        values = [0.005 + (20 - 0.005) * i / 200 for i in range(201)]
        labels = [binarize_hai(v) for v in values]
        last_true = max(i for i, flag in enumerate(labels) if flag)
        assert all(labels[: last_true + 1])


class TestValidation:
    def test_bad_residue_rejected(self):
        with pytest.raises(ParseError, match="'B'"):
            Antibody("x", "ACB", "ACD", Host.HUMAN, LightIsotype.KAPPA,
                     HeavyIsotype.IGG, Epitope.CONFORMATIONAL)

    def test_x_is_allowed(self):
        ab = Antibody("x", "ACX", "XCD", Host.HUMAN, LightIsotype.KAPPA,
                      HeavyIsotype.IGG, Epitope.CONFORMATIONAL)
        assert ab.heavy_var == "ACX"

    def test_dangling_antigen_reference(self, tiny_dataset):
        records = tiny_dataset.records + (
            AssayRecord("ab0", "nope", Assay.BINDING, 5.0),
        )
        with pytest.raises(IntegrityError, match="nope"):
            Dataset(tiny_dataset.antibodies, tiny_dataset.antigens, records)

    def test_duplicate_triple_rejected(self, tiny_dataset):
        records = tiny_dataset.records + (tiny_dataset.records[0],)
        with pytest.raises(IntegrityError, match="duplicate"):
            Dataset(tiny_dataset.antibodies, tiny_dataset.antigens, records)

    def test_out_of_range_value_rejected(self):
        with pytest.raises(DomainError):
            AssayRecord("a", "g", Assay.BINDING, 25.0)


class TestRoundTrip:
    def test_write_load_identity(self, tiny_dataset, tmp_path):
        write_dataset(tiny_dataset, tmp_path / "ds")
        loaded = load_dataset(tmp_path / "ds")
        assert loaded.antibodies == tiny_dataset.antibodies
        assert loaded.antigens == tiny_dataset.antigens
        assert loaded.records == tiny_dataset.records
        assert loaded.pairs_by_task == tiny_dataset.pairs_by_task

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError, match="missing"):
            load_dataset(tmp_path)

    def test_bad_csv_row(self, tiny_dataset, tmp_path):
        write_dataset(tiny_dataset, tmp_path / "ds")
        assays = tmp_path / "ds" / "assays.csv"
        content = assays.read_text().splitlines()
        content.append("ab0,ag0,binding,not-a-number")
        assays.write_text("\n".join(content) + "\n")
        with pytest.raises(ParseError, match="row"):
            load_dataset(tmp_path / "ds")

    def test_unpaired_chain(self, tiny_dataset, tmp_path):
        write_dataset(tiny_dataset, tmp_path / "ds")
        fasta = tmp_path / "ds" / "antibodies.fasta"
        lines = fasta.read_text().splitlines()
        fasta.write_text("\n".join(lines[:-2]) + "\n")  # drop last LC record
        with pytest.raises(ParseError, match="unpaired"):
            load_dataset(tmp_path / "ds")


class TestSummarize:
    def test_counts_sum_to_dataset_size(self, tiny_dataset):
        summary = summarize(tiny_dataset, Assay.BINDING)
        for char in {r.characteristic for r in summary.rows}:
            total = sum(r.count for r in summary.rows if r.characteristic == char)
            assert total == summary.total

    def test_single_category_has_no_p_value(self, tiny_dataset):
        summary = summarize(tiny_dataset, Assay.BINDING)
        # every tiny-dataset antibody is IgG, so hc_isotype is degenerate
        assert summary.p_values["hc_isotype"] is None
        rows = [r for r in summary.rows if r.characteristic == "hc_isotype"]
        assert len(rows) == 1 and rows[0].count == summary.total

    def test_identical_rates_give_p_near_one(self):
        # Two hosts with exactly equal positive rates: chi-square statistic 0.
        antibodies = {}
        for i in range(4):
            antibodies[f"ab{i}"] = Antibody(
                f"ab{i}", "ACDEF" * 22, "ACDEF" * 24,
                Host.HUMAN if i < 2 else Host.MOUSE,
                LightIsotype.KAPPA, HeavyIsotype.IGG, Epitope.CONFORMATIONAL,
            )
        antigens = {"g": Antigen("g", "ACDEF" * 112, Subtype.H1,
                                 YearCategory.POST2010, Origin.PUBLIC)}
        values = [5.0, 0.8, 5.0, 0.8]  # one positive, one negative per host
        records = tuple(
            AssayRecord(f"ab{i}", "g", Assay.BINDING, values[i]) for i in range(4)
        )
        summary = summarize(Dataset(antibodies, antigens, records), Assay.BINDING)
        assert summary.p_values["host"] == pytest.approx(1.0, abs=1e-12)

    def test_assay_count_stats(self, tiny_dataset):
        summary = summarize(tiny_dataset, Assay.BINDING)
        mean, std = summary.antibody_assays_mean_std
        assert mean == pytest.approx(3.0)
        assert std == pytest.approx(0.0)

    def test_outputs_written(self, tiny_dataset, tmp_path):
        summary = summarize(tiny_dataset, Assay.HAI)
        summary_to_csv(summary, tmp_path / "s.csv")
        summary_to_json(summary, tmp_path / "s.json")
        text = (tmp_path / "s.csv").read_text()
        assert text.startswith("characteristic,category,n,positive_n,positive_rate,p_value")
        assert (tmp_path / "s.json").stat().st_size > 0

    def test_positivity(self, tiny_dataset):
        summary = summarize(tiny_dataset, Assay.BINDING)
        labels = [binarize_elisa(r.raw_value) for r in tiny_dataset.records
                  if r.assay is Assay.BINDING]
        assert summary.positivity == pytest.approx(sum(labels) / len(labels))
        assert not math.isnan(summary.positivity)
