from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abag_bench.dataset import Antibody, Epitope, HeavyIsotype, Host, LightIsotype
from abag_bench.errors import ConfigError
from abag_bench.identity import (
    AlignParams,
    ClusterConfig,
    global_align,
    greedy_cluster,
    percent_identity,
    read_cluster_tsv,
    write_cluster_tsv,
)
from abag_bench.synth import SyntheticConfig, generate

P = AlignParams(match_score=1, mismatch_score=-1, gap_penalty=-2)


def brute_force_score(a: str, b: str, p: AlignParams = P) -> int:
    """Exhaustive enumeration of all global alignments (tiny inputs only)."""

    @lru_cache(maxsize=None)
    def best(i: int, j: int) -> int:
        if i == len(a) and j == len(b):
            return 0
        options = []
        if i < len(a) and j < len(b):
            sub = p.match_score if a[i] == b[j] else p.mismatch_score
            options.append(sub + best(i + 1, j + 1))
        if i < len(a):
            options.append(p.gap_penalty + best(i + 1, j))
        if j < len(b):
            options.append(p.gap_penalty + best(i, j + 1))
        return max(options)

    return best(0, 0)


class TestGlobalAlign:
    def test_identical_sequences(self):
        aln = global_align("ACD", "ACD", P)
        assert aln.score == 3
        assert aln.aligned_a == "ACD"
        assert aln.aligned_b == "ACD"

    def test_substitution_beats_two_gaps(self):
        aln = global_align("A", "C", P)
        assert aln.score == -1
        assert (aln.aligned_a, aln.aligned_b) == ("A", "C")

    def test_single_gap_case(self):
        aln = global_align("ACD", "AD", P)
        assert aln.score == 0
        assert aln.aligned_a == "ACD"
        assert aln.aligned_b == "A-D"

    def test_alignment_invariants(self):
        aln = global_align("ACDKLMNP", "CDKMNP", P)
        assert len(aln.aligned_a) == len(aln.aligned_b)
        assert aln.aligned_a.replace("-", "") == "ACDKLMNP"
        assert aln.aligned_b.replace("-", "") == "CDKMNP"
        assert all(ca != "-" or cb != "-" for ca, cb in zip(aln.aligned_a, aln.aligned_b))

    def test_empty_sequence_rejected(self):
        with pytest.raises(ConfigError):
            global_align("", "ACD", P)

    @settings(max_examples=60, deadline=None)
    @given(
        a=st.text(alphabet="ACDE", min_size=1, max_size=6),
        b=st.text(alphabet="ACDE", min_size=1, max_size=6),
    )
    def test_matches_exhaustive_enumeration(self, a, b):
        assert global_align(a, b, P).score == brute_force_score(a, b)


class TestPercentIdentity:
    def test_identical(self):
        assert percent_identity("ACDKL", "ACDKL", P) == 1.0

    def test_disjoint(self):
        assert percent_identity("AAAA", "CCCC", P) == 0.0

    def test_three_of_four(self):
        assert percent_identity("ACDE", "ACDF", P) == 0.75

    def test_min_length_denominator(self):
        # 'AD' aligns with 2 matches against 'ACD'; denominator is 2.
        assert percent_identity("ACD", "AD", P) == 1.0

    def test_x_never_matches(self):
        assert percent_identity("AXC", "AXC", P) == pytest.approx(2 / 3)

    @settings(max_examples=40, deadline=None)
    @given(
        a=st.text(alphabet="ACDEFG", min_size=1, max_size=12),
        b=st.text(alphabet="ACDEFG", min_size=1, max_size=12),
    )
    def test_symmetry_and_range(self, a, b):
        ab = percent_identity(a, b, P)
        ba = percent_identity(b, a, P)
        assert ab == pytest.approx(ba)
        assert 0.0 <= ab <= 1.0

    @settings(max_examples=30, deadline=None)
    @given(a=st.text(alphabet="ACDEFG", min_size=1, max_size=12))
    def test_identity_one_iff_equal(self, a):
        assert percent_identity(a, a, P) == 1.0


def _antibody(ab_id: str, heavy: str, light: str) -> Antibody:
    return Antibody(ab_id, heavy, light, Host.HUMAN, LightIsotype.KAPPA,
                    HeavyIsotype.IGG, Epitope.CONFORMATIONAL)


class TestGreedyCluster:
    def test_copies_collapse_to_one_cluster(self):
        abs_ = [_antibody(f"a{i}", "ACDKLMNPQR" * 4, "WYVTSRQPNM" * 4) for i in range(6)]
        assignment = greedy_cluster(abs_, ClusterConfig())
        assert len(assignment.clusters) == 1
        assert len(assignment.clusters[0].member_ids) == 6

    def test_dissimilar_sequences_stay_singletons(self):
        seqs = [
            ("AAAAAAAAAA", "CCCCCCCCCC"),
            ("DDDDDDDDDD", "EEEEEEEEEE"),
            ("FFFFFFFFFF", "GGGGGGGGGG"),
            ("HHHHHHHHHH", "IIIIIIIIII"),
        ]
        abs_ = [_antibody(f"a{i}", h, l) for i, (h, l) in enumerate(seqs)]
        assignment = greedy_cluster(abs_, ClusterConfig())
        assert len(assignment.clusters) == 4
        assert all(len(c.member_ids) == 1 for c in assignment.clusters)

    def test_synthetic_families_recovered(self):
        cfg = SyntheticConfig(n_families=4, antibodies_per_family=5, n_antigens=6,
                              hc_len=60, lc_len=66, ag_len=80,
                              antigen_motif_copies=2, seed=21)
        dataset, rule = generate(cfg)
        assignment = greedy_cluster(dataset.antibodies, ClusterConfig())
        assert len(assignment.clusters) == 4
        rep_of = assignment.representative_of()
        for ab_id, fam in rule.family_of.items():
            assert rule.family_of[rep_of[ab_id]] == fam

    def test_members_reach_threshold_to_representative(self):
        cfg = SyntheticConfig(n_families=4, antibodies_per_family=5, n_antigens=6,
                              hc_len=60, lc_len=66, ag_len=80,
                              antigen_motif_copies=2, seed=22)
        dataset, _ = generate(cfg)
        config = ClusterConfig()
        assignment = greedy_cluster(dataset.antibodies, config)
        from abag_bench.identity import clustering_sequence

        seqs = {ab.id: clustering_sequence(ab) for ab in dataset.antibodies.values()}
        for cluster in assignment.clusters:
            for member in cluster.member_ids:
                ident = percent_identity(seqs[member], seqs[cluster.representative_id],
                                         config.align)
                assert ident >= config.min_identity

    def test_clusters_partition_input(self):
        cfg = SyntheticConfig(n_families=3, antibodies_per_family=4, n_antigens=6,
                              hc_len=60, lc_len=66, ag_len=80,
                              antigen_motif_copies=2, seed=23)
        dataset, _ = generate(cfg)
        assignment = greedy_cluster(dataset.antibodies)
        members = [m for c in assignment.clusters for m in c.member_ids]
        assert sorted(members) == sorted(dataset.antibodies)
        for cluster in assignment.clusters:
            assert cluster.representative_id in cluster.member_ids

    def test_deterministic(self):
        cfg = SyntheticConfig(n_families=3, antibodies_per_family=4, n_antigens=6,
                              hc_len=60, lc_len=66, ag_len=80,
                              antigen_motif_copies=2, seed=24)
        dataset, _ = generate(cfg)
        a = greedy_cluster(dataset.antibodies)
        b = greedy_cluster(dataset.antibodies)
        assert a == b

    def test_tsv_round_trip(self, tmp_path):
        abs_ = [_antibody(f"a{i}", "ACDKLMNPQR" * 4, "WYVTSRQPNM" * 4) for i in range(3)]
        assignment = greedy_cluster(abs_)
        write_cluster_tsv(assignment, tmp_path / "c.tsv")
        assert read_cluster_tsv(tmp_path / "c.tsv") == assignment
