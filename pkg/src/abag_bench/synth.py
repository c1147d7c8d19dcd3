"""Oracle-labeled synthetic antibody/antigen datasets with a planted rule.

The rule: one shared epitope motif is planted, plus decoy motifs pairwise
far from it in Hamming distance. Every antibody family seed carries the
paratope image of the epitope motif in its heavy chain; members are
point-mutated copies of the seed, where a fixed per-family quota keeps the
paratope intact (zero or one mismatch) and the rest carry exactly two
paratope mismatches. Each antigen embeds one motif, several copies of it so
the antigen side is the easier channel to read: either the epitope motif or
a decoy. A pair is positive when the antibody's realized paratope maps onto
the antigen's embedded motif with at most one mismatch, i.e. when the
antibody is paratope-intact and the antigen carries the real motif.

The typed-antigen fraction is derived from the positivity target, the
intact quota, and the label noise, so the emitted positivity lands on the
target; family marginals are identical by construction, which keeps
group-exclusive folds stratifiable. HAI labels are a per-pair thinning of
binding positives, giving the lower HAI positivity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .dataset import (
    CANONICAL_RESIDUES,
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
)
from .errors import ConfigError
from .rng import SplitMix64

# Fixed residue bijection between epitope and paratope motifs. The identity
# map is used: it satisfies the rule and keeps the planted task learnable by
# a desk-scale encoder through token-matching attention.
PARATOPE_BIJECTION = {a: a for a in CANONICAL_RESIDUES}

_MOTIF_MIN_SEPARATION = 4
ORACLE_MAX_MISMATCH = 1


@dataclass(frozen=True)
class SyntheticConfig:
    n_families: int = 8
    antibodies_per_family: int = 6
    n_antigens: int = 40
    motif_len: int = 6
    mutation_rate: float = 0.05
    label_noise: float = 0.05
    positivity_target: float = 0.35
    seed: int = 0
    # Generator shape knobs (defaults follow the real data's length scales).
    hc_len: int = 108
    lc_len: int = 122
    ag_len: int = 559
    antigen_motif_copies: int = 4
    paratope_intact_fraction: float = 0.5
    paratope_placement: str = "center"  # "center" mimics CDR positional conservation
    hai_positive_fraction: float = 0.315
    positivity_tolerance: float = 0.05

    def __post_init__(self):
        for name in ("mutation_rate", "label_noise", "positivity_target",
                     "hai_positive_fraction"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ConfigError(f"{name} must be in [0, 1)")
        if not (0.0 < self.paratope_intact_fraction <= 1.0):
            raise ConfigError("paratope_intact_fraction must be in (0, 1]")
        if self.positivity_target <= 0.0:
            raise ConfigError("positivity_target must be positive")
        if min(self.n_families, self.antibodies_per_family, self.n_antigens, self.motif_len) < 1:
            raise ConfigError("sizes must be at least 1")
        if self.motif_len > min(self.hc_len - 4, self.ag_len - 4):
            raise ConfigError("motif_len too large for the sequence lengths")
        if self.motif_len < 3:
            raise ConfigError("motif_len below 3 cannot separate motifs from decoys")
        if self.paratope_placement not in ("center", "random"):
            raise ConfigError("paratope_placement must be 'center' or 'random'")
        self.typed_antigen_fraction()  # validates feasibility

    def typed_antigen_fraction(self) -> float:
        """Antigen fraction carrying the real motif that hits the target.

        Solves target = q * s * (1 - noise) + (1 - q * s) * noise for q,
        where s is the intact quota.
        """
        noise = self.label_noise
        denom = self.paratope_intact_fraction * (1.0 - 2.0 * noise)
        q = (self.positivity_target - noise) / denom
        if not (0.0 < q <= 0.95):
            raise ConfigError(
                f"positivity_target {self.positivity_target} infeasible with intact "
                f"fraction {self.paratope_intact_fraction} and noise {noise}"
            )
        return q

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @staticmethod
    def from_dict(d: dict) -> "SyntheticConfig":
        return SyntheticConfig(**d)


def map_paratope(epitope_motif: str) -> str:
    return "".join(PARATOPE_BIJECTION[c] for c in epitope_motif)


_INVERSE_BIJECTION = {v: k for k, v in PARATOPE_BIJECTION.items()}


def unmap_paratope(paratope: str) -> str:
    return "".join(_INVERSE_BIJECTION[c] for c in paratope)


def hamming(a: str, b: str) -> int:
    if len(a) != len(b):
        raise ConfigError("hamming distance needs equal lengths")
    return sum(1 for x, y in zip(a, b) if x != y)


def _random_sequence(rng: SplitMix64, length: int) -> list[str]:
    return [CANONICAL_RESIDUES[rng.randrange(20)] for _ in range(length)]


def _distinct_motifs(rng: SplitMix64, count: int, length: int) -> list[str]:
    motifs: list[str] = []
    attempts = 0
    while len(motifs) < count:
        attempts += 1
        if attempts > 10000:
            raise ConfigError("could not plant enough well-separated motifs")
        cand = "".join(_random_sequence(rng, length))
        if all(hamming(cand, m) >= _MOTIF_MIN_SEPARATION for m in motifs):
            motifs.append(cand)
    return motifs


def _mutate_outside(seq: list[str], rng: SplitMix64, rate: float,
                    protected: range) -> list[str]:
    """Point mutations at the given rate everywhere except the protected span."""
    out = list(seq)
    for i, original in enumerate(out):
        if i in protected:
            continue
        if rate > 0.0 and rng.bernoulli(rate):
            repl = original
            while repl == original:
                repl = CANONICAL_RESIDUES[rng.randrange(20)]
            out[i] = repl
    return out


def _mutate_span(seq: list[str], rng: SplitMix64, span: range, n_mutations: int) -> None:
    positions = [span.start + i for i in rng.sample_indices(len(span), n_mutations)]
    for pos in positions:
        repl = seq[pos]
        while repl == seq[pos]:
            repl = CANONICAL_RESIDUES[rng.randrange(20)]
        seq[pos] = repl


def _embed(backbone: list[str], motif: str, positions: list[int]) -> None:
    for pos in positions:
        backbone[pos : pos + len(motif)] = motif


def _non_overlapping_positions(rng: SplitMix64, seq_len: int, motif_len: int,
                               copies: int) -> list[int]:
    """One random position per equal-width stripe of the sequence.

    Striping spreads the copies along the whole length, so a prefix
    truncation (the tokenizer cuts antigen tails) still retains copies.
    """
    stripe = seq_len // copies
    if stripe < motif_len:
        raise ConfigError("sequence too short for requested motif copies")
    positions: list[int] = []
    for c in range(copies):
        start = c * stripe
        width = stripe - motif_len + 1
        positions.append(start + rng.randrange(width))
    return positions


@dataclass(frozen=True)
class PlantedRule:
    """Everything needed to score pairs independently of the emitted labels."""

    motif_len: int
    epitope_motif: str                    # the one real epitope motif
    antigen_motif: dict[str, str]         # antigen id -> embedded motif
    antigen_typed: dict[str, bool]        # carries the real motif?
    member_paratope: dict[str, str]       # antibody id -> realized paratope
    family_of: dict[str, int]             # antibody id -> family index
    hai_potent: dict[str, bool] = field(default_factory=dict)  # pair id -> thinning draw

    def oracle_label(self, antibody_id: str, antigen_id: str,
                     task: Assay = Assay.BINDING) -> bool:
        if antibody_id not in self.member_paratope:
            raise KeyError(f"antibody {antibody_id!r} was not produced by this generator")
        if antigen_id not in self.antigen_motif:
            raise KeyError(f"antigen {antigen_id!r} was not produced by this generator")
        paratope = self.member_paratope[antibody_id]
        target = map_paratope(self.antigen_motif[antigen_id])
        bound = hamming(paratope, target) <= ORACLE_MAX_MISMATCH
        if task is Assay.BINDING:
            return bound
        return bound and self.hai_potent[f"{antibody_id}|{antigen_id}"]

    def to_json(self) -> dict:
        return {
            "motif_len": self.motif_len,
            "epitope_motif": self.epitope_motif,
            "antigen_motif": self.antigen_motif,
            "antigen_typed": self.antigen_typed,
            "member_paratope": self.member_paratope,
            "family_of": self.family_of,
            "hai_potent": self.hai_potent,
            "bijection": PARATOPE_BIJECTION,
        }


def _build_rule(cfg: SyntheticConfig, rng: SplitMix64, attempt: int):
    """One full dataset draw; returns entities, records, and the rule."""
    r = rng.derive(f"attempt/{attempt}")
    q = cfg.typed_antigen_fraction()
    n_typed = round(q * cfg.n_antigens)
    n_typed = max(1, min(n_typed, cfg.n_antigens))
    n_decoy_types = max(1, min(4, cfg.n_antigens - n_typed)) if cfg.n_antigens > n_typed else 1
    motifs = _distinct_motifs(r.derive("motifs"), 1 + n_decoy_types, cfg.motif_len)
    epitope_motif = motifs[0]
    decoy_motifs = motifs[1:]

    # Antigen motif assignment: exact typed count, shuffled across slots.
    slots = [True] * n_typed + [False] * (cfg.n_antigens - n_typed)
    r.derive("slots").shuffle(slots)

    ag_rng = r.derive("antigens")
    antigens: dict[str, Antigen] = {}
    antigen_motif: dict[str, str] = {}
    antigen_typed: dict[str, bool] = {}
    year_choices = list(YearCategory)
    for i, typed in enumerate(slots):
        ag_id = f"ag{i:03d}"
        length = cfg.ag_len + ag_rng.randrange(41) - 20
        backbone = _random_sequence(ag_rng, length)
        motif = epitope_motif if typed else decoy_motifs[i % len(decoy_motifs)]
        _embed(backbone, motif,
               _non_overlapping_positions(ag_rng, length, cfg.motif_len,
                                          cfg.antigen_motif_copies))
        antigens[ag_id] = Antigen(
            id=ag_id,
            sequence="".join(backbone),
            subtype=Subtype.H1 if i % 2 == 0 else Subtype.H3,
            year_category=year_choices[ag_rng.randrange(len(year_choices))],
            origin=Origin.PUBLIC if ag_rng.random() < 0.79 else Origin.COBRA,
        )
        antigen_motif[ag_id] = motif
        antigen_typed[ag_id] = typed

    fam_rng = r.derive("families")
    paratope_seed = map_paratope(epitope_motif)
    antibodies: dict[str, Antibody] = {}
    member_paratope: dict[str, str] = {}
    family_of: dict[str, int] = {}
    per_family = cfg.antibodies_per_family
    n_intact = max(1, round(cfg.paratope_intact_fraction * per_family))
    for f in range(cfg.n_families):
        hc_len = cfg.hc_len + fam_rng.randrange(9) - 4
        lc_len = cfg.lc_len + fam_rng.randrange(17) - 8
        seed_hc = _random_sequence(fam_rng, hc_len)
        seed_lc = _random_sequence(fam_rng, lc_len)
        if cfg.paratope_placement == "center":
            paratope_pos = (hc_len - cfg.motif_len) // 2
        else:
            paratope_pos = fam_rng.randrange(hc_len - cfg.motif_len + 1)
        span = range(paratope_pos, paratope_pos + cfg.motif_len)
        _embed(seed_hc, paratope_seed, [paratope_pos])
        # Exact intact quota per family keeps family marginals identical,
        # which group-exclusive stratification depends on. Intact members
        # alternate zero and one paratope mismatches (both within the oracle
        # threshold); broken members have the whole paratope scrambled, so
        # losing the motif is what flips the label.
        intact_flags = [k < n_intact for k in range(per_family)]
        fam_rng.shuffle(intact_flags)
        for k in range(per_family):
            ab_id = f"ab{f:02d}_{k:02d}"
            hc = _mutate_outside(seed_hc, fam_rng, cfg.mutation_rate, span)
            lc = _mutate_outside(seed_lc, fam_rng, cfg.mutation_rate, range(0))
            if intact_flags[k]:
                # paratope drift only when mutations are on; keeps the
                # mutation_rate=0 family exactly homogeneous
                if k % 2 == 1 and cfg.mutation_rate > 0.0:
                    _mutate_span(hc, fam_rng, span, 1)
            else:
                _mutate_span(hc, fam_rng, span, cfg.motif_len)
            antibodies[ab_id] = Antibody(
                id=ab_id,
                heavy_var="".join(hc),
                light_var="".join(lc),
                host=Host.HUMAN if fam_rng.random() < 0.85 else Host.MOUSE,
                lc_isotype=LightIsotype.KAPPA if fam_rng.random() < 0.57 else LightIsotype.LAMBDA,
                hc_isotype=HeavyIsotype.IGA if fam_rng.random() < 0.10 else HeavyIsotype.IGG,
                epitope=Epitope.CONFORMATIONAL if fam_rng.random() < 0.5 else Epitope.OTHER_UNKNOWN,
            )
            member_paratope[ab_id] = "".join(hc[span.start : span.stop])
            family_of[ab_id] = f

    label_rng = r.derive("labels")
    rule = PlantedRule(
        motif_len=cfg.motif_len,
        epitope_motif=epitope_motif,
        antigen_motif=antigen_motif,
        antigen_typed=antigen_typed,
        member_paratope=member_paratope,
        family_of=family_of,
    )
    records: list[AssayRecord] = []
    for ab_id in sorted(antibodies):
        for ag_id in sorted(antigens):
            pair_key = f"{ab_id}|{ag_id}"
            bound = rule.oracle_label(ab_id, ag_id, Assay.BINDING)
            rule.hai_potent[pair_key] = label_rng.bernoulli(cfg.hai_positive_fraction)
            hai = bound and rule.hai_potent[pair_key]
            for assay, oracle in ((Assay.BINDING, bound), (Assay.HAI, hai)):
                label = oracle != label_rng.bernoulli(cfg.label_noise)
                records.append(AssayRecord(ab_id, ag_id, assay,
                                           _raw_value(assay, label, label_rng)))
    return antibodies, antigens, records, rule


def _raw_value(assay: Assay, label: bool, rng: SplitMix64) -> float:
    """Assay scalar consistent with the binarization thresholds."""
    u = rng.random()
    if assay is Assay.BINDING:
        return 20.0 - u * 19.0 if label else 0.5 + u * 0.5
    return 0.005 + u * 9.99 if label else 10.0 + u * 10.0


def generate(cfg: SyntheticConfig) -> tuple[Dataset, PlantedRule]:
    """Deterministic dataset draw; resamples the antigen motif mix until the
    binding positivity lands within the configured tolerance of the target."""
    rng = SplitMix64(cfg.seed).derive("synth")
    last_rate = None
    for attempt in range(20):
        antibodies, antigens, records, rule = _build_rule(cfg, rng, attempt)
        dataset = Dataset(antibodies=antibodies, antigens=antigens, records=tuple(records))
        last_rate = dataset.positivity(Assay.BINDING)
        if abs(last_rate - cfg.positivity_target) <= cfg.positivity_tolerance:
            return dataset, rule
    raise ConfigError(
        f"generator could not reach positivity {cfg.positivity_target} "
        f"(last attempt: {last_rate:.3f}); widen the tolerance or resize the config"
    )


def generate_corpus(cfg: SyntheticConfig, dataset: Dataset, rule: PlantedRule,
                    n_extra_antibody: int = 0, n_extra_antigen: int = 0,
                    corpus_seed: int = 0) -> list[tuple[str, str]]:
    """Self-supervised pretraining corpus for a generated dataset.

    Contains every dataset chain and antigen sequence (labels are never seen
    by pretraining) plus, optionally, fresh mutated chain variants and fresh
    antigens carrying the same motif vocabulary. Items are (kind, seq) with
    kind in {"hc", "lc", "ag"}, in a deterministic order.
    """
    corpus: list[tuple[str, str]] = []
    for ab_id in sorted(dataset.antibodies):
        ab = dataset.antibodies[ab_id]
        corpus.append(("hc", ab.heavy_var))
        corpus.append(("lc", ab.light_var))
    for ag_id in sorted(dataset.antigens):
        corpus.append(("ag", dataset.antigens[ag_id].sequence))

    c = SplitMix64(cfg.seed).derive(f"corpus/{corpus_seed}")
    ab_ids = sorted(dataset.antibodies)
    for i in range(n_extra_antibody):
        src = dataset.antibodies[ab_ids[i % len(ab_ids)]]
        corpus.append(("hc", "".join(_mutate_outside(list(src.heavy_var), c,
                                                     cfg.mutation_rate, range(0)))))
        corpus.append(("lc", "".join(_mutate_outside(list(src.light_var), c,
                                                     cfg.mutation_rate, range(0)))))
    for i in range(n_extra_antigen):
        length = cfg.ag_len + c.randrange(41) - 20
        backbone = _random_sequence(c, length)
        _embed(backbone, rule.epitope_motif,
               _non_overlapping_positions(c, length, cfg.motif_len, cfg.antigen_motif_copies))
        corpus.append(("ag", "".join(backbone)))
    return corpus


def write_truth_json(rule: PlantedRule, cfg: SyntheticConfig, path) -> None:
    payload = {"config": cfg.to_dict(), "rule": rule.to_json()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
