"""Global alignment, percent identity, and greedy star clustering of antibodies.

Identity between two sequences is defined as the number of exactly matching
alignment columns (columns containing 'X' or the chain separator never count)
divided by the length of the shorter input. Clustering mirrors the CD-HIT
convention: descending-length greedy pass, each sequence joins the first
cluster whose representative reaches the identity threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dataset import CANONICAL_RESIDUES, Antibody
from .errors import ConfigError

# Chain separator for antibody clustering sequences; outside the residue
# alphabet so it can never score as a match.
CHAIN_SEPARATOR = "*"

GAP = "-"

_DIAG, _UP, _LEFT = 0, 1, 2


@dataclass(frozen=True)
class AlignParams:
    match_score: int = 1
    mismatch_score: int = -1
    gap_penalty: int = -2

    def __post_init__(self):
        if self.match_score <= self.mismatch_score:
            raise ConfigError("match_score must exceed mismatch_score")
        if self.gap_penalty >= 0:
            raise ConfigError("gap_penalty must be negative")


@dataclass(frozen=True)
class Alignment:
    aligned_a: str
    aligned_b: str
    score: int


@dataclass(frozen=True)
class ClusterConfig:
    min_identity: float = 0.50
    align: AlignParams = field(default_factory=AlignParams)

    def __post_init__(self):
        if not (0.0 < self.min_identity <= 1.0):
            raise ConfigError("min_identity must be in (0, 1]")


@dataclass(frozen=True)
class Cluster:
    representative_id: str
    member_ids: tuple[str, ...]


@dataclass(frozen=True)
class ClusterAssignment:
    clusters: tuple[Cluster, ...]

    def representative_of(self) -> dict[str, str]:
        return {m: c.representative_id for c in self.clusters for m in c.member_ids}

    def sizes(self) -> list[int]:
        return [len(c.member_ids) for c in self.clusters]


@njit(cache=True)
def _nw_fill(a: np.ndarray, b: np.ndarray, match: int, mismatch: int, gap: int):
    """Score and pointer matrices; ties resolved diagonal > up > left."""
    n, m = a.shape[0], b.shape[0]
    score = np.empty((n + 1, m + 1), dtype=np.int64)
    ptr = np.empty((n + 1, m + 1), dtype=np.uint8)
    score[0, 0] = 0
    for i in range(1, n + 1):
        score[i, 0] = gap * i
        ptr[i, 0] = _UP
    for j in range(1, m + 1):
        score[0, j] = gap * j
        ptr[0, j] = _LEFT
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = match if ai == b[j - 1] else mismatch
            best = score[i - 1, j - 1] + sub
            direction = _DIAG
            up = score[i - 1, j] + gap
            if up > best:
                best = up
                direction = _UP
            left = score[i, j - 1] + gap
            if left > best:
                best = left
                direction = _LEFT
            score[i, j] = best
            ptr[i, j] = direction
    return score[n, m], ptr


def _encode(seq: str) -> np.ndarray:
    return np.frombuffer(seq.encode("ascii"), dtype=np.uint8)


def global_align(a: str, b: str, params: AlignParams | None = None) -> Alignment:
    """Optimal Needleman-Wunsch alignment with linear gap penalty."""
    if not a or not b:
        raise ConfigError("global_align requires non-empty sequences")
    p = params or AlignParams()
    score, ptr = _nw_fill(_encode(a), _encode(b), p.match_score, p.mismatch_score, p.gap_penalty)
    out_a: list[str] = []
    out_b: list[str] = []
    i, j = len(a), len(b)
    while i > 0 or j > 0:
        d = ptr[i, j]
        if d == _DIAG:
            i -= 1
            j -= 1
            out_a.append(a[i])
            out_b.append(b[j])
        elif d == _UP:
            i -= 1
            out_a.append(a[i])
            out_b.append(GAP)
        else:
            j -= 1
            out_a.append(GAP)
            out_b.append(b[j])
    return Alignment("".join(reversed(out_a)), "".join(reversed(out_b)), int(score))


_MATCHABLE = frozenset(CANONICAL_RESIDUES)


def percent_identity(a: str, b: str, params: AlignParams | None = None) -> float:
    """Matching alignment columns over min(len(a), len(b)), in [0, 1]."""
    aln = global_align(a, b, params)
    matches = sum(
        1
        for ca, cb in zip(aln.aligned_a, aln.aligned_b)
        if ca == cb and ca in _MATCHABLE
    )
    return matches / min(len(a), len(b))


def clustering_sequence(antibody: Antibody) -> str:
    """Heavy chain, separator, light chain; the unit the 50% threshold applies to."""
    return antibody.heavy_var + CHAIN_SEPARATOR + antibody.light_var


def greedy_cluster(
    antibodies: dict[str, Antibody] | list[Antibody],
    config: ClusterConfig | None = None,
) -> ClusterAssignment:
    """Deterministic greedy incremental clustering at ``config.min_identity``.

    Antibodies are visited in descending clustering-sequence length (ties by
    id); each joins the first existing cluster whose representative reaches
    the threshold, otherwise founds a new cluster.
    """
    cfg = config or ClusterConfig()
    items = list(antibodies.values()) if isinstance(antibodies, dict) else list(antibodies)
    if not items:
        raise ConfigError("greedy_cluster requires at least one antibody")
    seqs = {ab.id: clustering_sequence(ab) for ab in items}
    order = sorted(items, key=lambda ab: (-len(seqs[ab.id]), ab.id))

    rep_ids: list[str] = []
    members: dict[str, list[str]] = {}
    for ab in order:
        seq = seqs[ab.id]
        for rep in rep_ids:
            if percent_identity(seq, seqs[rep], cfg.align) >= cfg.min_identity:
                members[rep].append(ab.id)
                break
        else:
            rep_ids.append(ab.id)
            members[ab.id] = [ab.id]
    return ClusterAssignment(
        clusters=tuple(Cluster(rep, tuple(members[rep])) for rep in rep_ids)
    )


def write_cluster_tsv(assignment: ClusterAssignment, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cluster in assignment.clusters:
            for member in cluster.member_ids:
                fh.write(f"{member}\t{cluster.representative_id}\n")


def read_cluster_tsv(path) -> ClusterAssignment:
    members: dict[str, list[str]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            member, rep = line.split("\t")
            if rep not in members:
                members[rep] = []
                order.append(rep)
            members[rep].append(member)
    return ClusterAssignment(
        clusters=tuple(Cluster(rep, tuple(members[rep])) for rep in order)
    )
