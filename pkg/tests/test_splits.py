import itertools

import pytest

from abag_bench.dataset import (
    Antibody, Antigen, Assay, AssayRecord, Dataset, Epitope, HeavyIsotype,
    Host, LightIsotype, Origin, Subtype, YearCategory,
)
from abag_bench.errors import ConfigError, InfeasibleSplitError, IntegrityError
from abag_bench.identity import greedy_cluster
from abag_bench.splits import (
    FoldAssignment,
    SplitConfig,
    SplitStrategy,
    make_folds,
    validate_folds,
    write_assignment_csv,
    write_validation_json,
)
from abag_bench.synth import SyntheticConfig, generate


def grid_dataset(n_ab=10, n_ag=10, positive_every=3):
    antibodies = {
        f"a{i:02d}": Antibody(f"a{i:02d}", "ACDEF" * 22, "ACDEF" * 24, Host.HUMAN,
                              LightIsotype.KAPPA, HeavyIsotype.IGG, Epitope.CONFORMATIONAL)
        for i in range(n_ab)
    }
    antigens = {
        f"g{j:02d}": Antigen(f"g{j:02d}", "ACDEF" * 112, Subtype.H1,
                             YearCategory.POST2010, Origin.PUBLIC)
        for j in range(n_ag)
    }
    vals = itertools.cycle([5.0] + [0.8] * (positive_every - 1))
    records = tuple(
        AssayRecord(a, g, Assay.BINDING, next(vals))
        for a in sorted(antibodies) for g in sorted(antigens)
    )
    return Dataset(antibodies, antigens, records)


@pytest.fixture(scope="module")
def synth_pair():
    cfg = SyntheticConfig(seed=5, n_families=6, antibodies_per_family=5, n_antigens=12,
                          hc_len=60, lc_len=66, ag_len=90, antigen_motif_copies=2)
    dataset, _ = generate(cfg)
    clusters = greedy_cluster(dataset.antibodies)
    return dataset, clusters


class TestMakeFolds:
    def test_lenient_balanced_partition(self):
        ds = grid_dataset()
        assignment = make_folds(ds, Assay.BINDING,
                                SplitConfig(strategy=SplitStrategy.LENIENT, k=5, seed=9))
        report = validate_folds(ds, assignment)
        assert [f.size for f in report.fold_stats] == [20] * 5

    def test_infeasible_when_fewer_groups_than_folds(self):
        ds = grid_dataset(n_ab=3, n_ag=10)
        with pytest.raises(InfeasibleSplitError, match="mab_exclusive"):
            make_folds(ds, Assay.BINDING,
                       SplitConfig(strategy=SplitStrategy.MAB_EXCLUSIVE, k=5, seed=0))

    def test_cluster_split_requires_clusters(self):
        ds = grid_dataset()
        with pytest.raises(ConfigError):
            make_folds(ds, Assay.BINDING,
                       SplitConfig(strategy=SplitStrategy.MAB_CLUSTER_EXCLUSIVE, k=5, seed=0))

    def test_folds_partition_pairs(self, synth_pair):
        dataset, clusters = synth_pair
        for strategy in SplitStrategy:
            assignment = make_folds(dataset, Assay.BINDING,
                                    SplitConfig(strategy=strategy, k=5, seed=1), clusters)
            pair_ids = {p.pair_id for p in dataset.pairs(Assay.BINDING)}
            assert set(assignment.fold_of) == pair_ids
            assert set(assignment.fold_of.values()) <= set(range(5))

    @pytest.mark.parametrize("strategy,unit", [
        (SplitStrategy.HA_EXCLUSIVE, "antigen"),
        (SplitStrategy.MAB_EXCLUSIVE, "antibody"),
    ])
    def test_exclusivity(self, synth_pair, strategy, unit):
        dataset, clusters = synth_pair
        assignment = make_folds(dataset, Assay.BINDING,
                                SplitConfig(strategy=strategy, k=5, seed=3), clusters)
        folds_of_unit = {}
        for pair in dataset.pairs(Assay.BINDING):
            key = pair.antigen_id if unit == "antigen" else pair.antibody_id
            folds_of_unit.setdefault(key, set()).add(assignment.fold_of[pair.pair_id])
        assert all(len(folds) == 1 for folds in folds_of_unit.values())

    def test_cluster_exclusivity(self, synth_pair):
        dataset, clusters = synth_pair
        assignment = make_folds(
            dataset, Assay.BINDING,
            SplitConfig(strategy=SplitStrategy.MAB_CLUSTER_EXCLUSIVE, k=5, seed=3),
            clusters,
        )
        rep_of = clusters.representative_of()
        folds_of_cluster = {}
        for pair in dataset.pairs(Assay.BINDING):
            folds_of_cluster.setdefault(rep_of[pair.antibody_id], set()).add(
                assignment.fold_of[pair.pair_id]
            )
        assert all(len(folds) == 1 for folds in folds_of_cluster.values())

    def test_deterministic_assignments(self, synth_pair):
        dataset, clusters = synth_pair
        for strategy in SplitStrategy:
            cfg = SplitConfig(strategy=strategy, k=5, seed=77)
            a = make_folds(dataset, Assay.BINDING, cfg, clusters)
            b = make_folds(dataset, Assay.BINDING, cfg, clusters)
            assert a == b

    def test_seed_changes_assignment(self, synth_pair):
        dataset, clusters = synth_pair
        a = make_folds(dataset, Assay.BINDING,
                       SplitConfig(strategy=SplitStrategy.LENIENT, k=5, seed=0))
        b = make_folds(dataset, Assay.BINDING,
                       SplitConfig(strategy=SplitStrategy.LENIENT, k=5, seed=1))
        assert a.fold_of != b.fold_of

    def test_fold_sizes_within_largest_group(self, synth_pair):
        dataset, clusters = synth_pair
        for strategy in SplitStrategy:
            assignment = make_folds(dataset, Assay.BINDING,
                                    SplitConfig(strategy=strategy, k=5, seed=2), clusters)
            report = validate_folds(dataset, assignment, clusters=clusters)
            sizes = [f.size for f in report.fold_stats]
            groups = {}
            from abag_bench.splits import group_key
            rep_of = clusters.representative_of()
            for pair in dataset.pairs(Assay.BINDING):
                key = group_key(pair, strategy, rep_of)
                groups[key] = groups.get(key, 0) + 1
            assert max(sizes) - min(sizes) <= max(groups.values())

    def test_k_must_be_at_least_two(self):
        with pytest.raises(ConfigError):
            SplitConfig(strategy=SplitStrategy.LENIENT, k=1, seed=0)


class TestValidateFolds:
    def test_clean_assignment_passes(self, synth_pair):
        dataset, clusters = synth_pair
        assignment = make_folds(dataset, Assay.BINDING,
                                SplitConfig(strategy=SplitStrategy.MAB_EXCLUSIVE, k=5, seed=4))
        report = validate_folds(dataset, assignment)
        assert report.passed
        assert report.violations == ()

    def test_corrupted_assignment_names_antibody(self, synth_pair):
        dataset, _ = synth_pair
        assignment = make_folds(dataset, Assay.BINDING,
                                SplitConfig(strategy=SplitStrategy.MAB_EXCLUSIVE, k=5, seed=4))
        pairs = dataset.pairs(Assay.BINDING)
        shared_ab = pairs[0].antibody_id
        victim = next(p for p in pairs if p.antibody_id == shared_ab)
        corrupted = dict(assignment.fold_of)
        corrupted[victim.pair_id] = (corrupted[victim.pair_id] + 1) % 5
        bad = FoldAssignment(task=Assay.BINDING, strategy=SplitStrategy.MAB_EXCLUSIVE,
                             k=5, fold_of=corrupted)
        report = validate_folds(dataset, bad)
        assert report.violations == (shared_ab,)

    def test_incomplete_assignment_rejected(self, synth_pair):
        dataset, _ = synth_pair
        assignment = make_folds(dataset, Assay.BINDING,
                                SplitConfig(strategy=SplitStrategy.LENIENT, k=5, seed=4))
        partial = dict(assignment.fold_of)
        partial.pop(next(iter(partial)))
        bad = FoldAssignment(task=Assay.BINDING, strategy=SplitStrategy.LENIENT,
                             k=5, fold_of=partial)
        with pytest.raises(IntegrityError):
            validate_folds(dataset, bad)

    def test_outputs_written(self, synth_pair, tmp_path):
        dataset, _ = synth_pair
        assignment = make_folds(dataset, Assay.BINDING,
                                SplitConfig(strategy=SplitStrategy.LENIENT, k=5, seed=4))
        report = validate_folds(dataset, assignment)
        write_assignment_csv(assignment, tmp_path / "folds.csv")
        write_validation_json(report, tmp_path / "val.json")
        lines = (tmp_path / "folds.csv").read_text().splitlines()
        assert lines[0] == "pair_id,fold"
        assert len(lines) == len(assignment.fold_of) + 1
        assert (tmp_path / "val.json").stat().st_size > 0
