"""Command-line interface.

Exit codes: 0 success, 2 validation failure, 3 partial cell failure,
4 I/O failure. ``ABAG_BENCH_SEED`` overrides any configured seed, which CI
uses to pin reproducibility.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .breadth import write_breadth_csv
from .dataset import Assay, Dataset, load_dataset, summarize, summary_to_csv, summary_to_json, write_dataset
from .errors import (
    AbagBenchError,
    ConfigError,
    DomainError,
    InfeasibleSplitError,
    IntegrityError,
    ParseError,
    ProtocolError,
)
from .harness import ExperimentSpec, ReportBundle, full_matrix, run_matrix
from .identity import ClusterConfig, greedy_cluster, write_cluster_tsv
from .model import ModelConfig, TrainingConfig, pretrain_mlm, save_checkpoint, train
from .report import FORMATS, emit_report, load_report
from .rng import SplitMix64
from .splits import (
    SplitConfig,
    SplitStrategy,
    make_folds,
    validate_folds,
    write_assignment_csv,
    write_validation_json,
)
from .synth import SyntheticConfig, generate, generate_corpus, write_truth_json

_VALIDATION_ERRORS = (
    ParseError, IntegrityError, DomainError, ConfigError,
    InfeasibleSplitError, ProtocolError,
)

EXIT_VALIDATION = 2
EXIT_PARTIAL = 3
EXIT_IO = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _VALIDATION_ERRORS as exc:
            _fail(EXIT_VALIDATION, str(exc))
        except OSError as exc:
            _fail(EXIT_IO, str(exc))
        except AbagBenchError as exc:
            _fail(EXIT_VALIDATION, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    raw = p.read_bytes()
    if p.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


def _effective_seed(seed: int | None, config: dict) -> int:
    env = os.environ.get("ABAG_BENCH_SEED")
    if env is not None:
        return int(env)
    if seed is not None:
        return seed
    return int(config.get("seed", 0))


def _model_config(config: dict) -> ModelConfig:
    return ModelConfig(**config.get("model", {}))


def _training_config(config: dict, seed: int) -> TrainingConfig:
    return replace(TrainingConfig(**config.get("training", {})), seed=seed)


def _synth_config(config: dict, seed: int) -> SyntheticConfig:
    return replace(SyntheticConfig(**config.get("synth", {})), seed=seed)


_TASKS = {t.value: t for t in Assay}
_STRATEGIES = {s.value: s for s in SplitStrategy}


task_option = click.option("--task", type=click.Choice(sorted(_TASKS)), default="binding")
strategy_option = click.option(
    "--strategy", type=click.Choice(sorted(_STRATEGIES)), default="lenient"
)
seed_option = click.option("--seed", type=int, default=None, help="overridden by ABAG_BENCH_SEED")
config_option = click.option("--config", "config_path", type=click.Path(exists=True), default=None)
out_option = click.option("--out", "out_dir", type=click.Path(), required=True)


@click.group()
@click.version_option(__version__, prog_name="abag-bench")
def main():
    """Benchmark harness for antibody-antigen activity prediction."""


@main.command("load")
@click.argument("data_dir", type=click.Path(exists=True))
@task_option
@out_option
@_guarded
def load_cmd(data_dir, task, out_dir):
    """Validate a dataset directory and write its summary tables."""
    dataset = load_dataset(data_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(dataset, _TASKS[task])
    summary_to_csv(summary, out / f"summary_{task}.csv")
    summary_to_json(summary, out / f"summary_{task}.json")
    click.echo(
        f"{task}: {summary.total} pairs, positivity {summary.positivity:.3f}, "
        f"{len(dataset.antibodies)} antibodies, {len(dataset.antigens)} antigens"
    )


@main.command("cluster")
@click.argument("data_dir", type=click.Path(exists=True))
@click.option("--min-identity", type=float, default=0.5, show_default=True)
@out_option
@_guarded
def cluster_cmd(data_dir, min_identity, out_dir):
    """Cluster a dataset's antibodies; writes member/representative TSV."""
    dataset = load_dataset(data_dir)
    assignment = greedy_cluster(dataset.antibodies, ClusterConfig(min_identity=min_identity))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cluster_tsv(assignment, out / "clusters.tsv")
    sizes = assignment.sizes()
    click.echo(
        f"{len(dataset.antibodies)} antibodies -> {len(sizes)} clusters, "
        f"sizes {min(sizes)}..{max(sizes)}"
    )


@main.command("split")
@click.argument("data_dir", type=click.Path(exists=True))
@task_option
@strategy_option
@click.option("--k", type=int, default=5, show_default=True)
@seed_option
@config_option
@out_option
@_guarded
def split_cmd(data_dir, task, strategy, k, seed, config_path, out_dir):
    """Build one fold assignment and its leakage report."""
    config = _read_config(config_path)
    seed = _effective_seed(seed, config)
    dataset = load_dataset(data_dir)
    strat = _STRATEGIES[strategy]
    clusters = None
    if strat is SplitStrategy.MAB_CLUSTER_EXCLUSIVE:
        clusters = greedy_cluster(dataset.antibodies)
    assignment = make_folds(dataset, _TASKS[task], SplitConfig(strategy=strat, k=k, seed=seed), clusters)
    report = validate_folds(dataset, assignment, clusters=clusters)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_assignment_csv(assignment, out / f"folds_{task}_{strategy}.csv")
    write_validation_json(report, out / f"validation_{task}_{strategy}.json")
    click.echo(
        f"{strategy}: {k} folds, spread {report.positivity_spread:.3f}, "
        f"violations {len(report.violations)}"
    )
    if not report.passed:
        _fail(EXIT_VALIDATION, f"leakage violations: {report.violations[:5]}")


@main.command("synth")
@seed_option
@config_option
@out_option
@_guarded
def synth_cmd(seed, config_path, out_dir):
    """Generate an oracle-labeled synthetic dataset."""
    config = _read_config(config_path)
    seed = _effective_seed(seed, config)
    cfg = _synth_config(config, seed)
    dataset, rule = generate(cfg)
    out = Path(out_dir)
    write_dataset(dataset, out)
    write_truth_json(rule, cfg, out / "truth.json")
    click.echo(
        f"synthetic dataset: {len(dataset.antibodies)} antibodies x "
        f"{len(dataset.antigens)} antigens, binding positivity "
        f"{dataset.positivity(Assay.BINDING):.3f}, HAI positivity "
        f"{dataset.positivity(Assay.HAI):.3f}"
    )


@main.command("train")
@click.argument("data_dir", type=click.Path(exists=True))
@task_option
@strategy_option
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--init", type=click.Choice(["random", "pretrained"]), default="random")
@click.option("--k", type=int, default=5, show_default=True)
@seed_option
@config_option
@out_option
@_guarded
def train_cmd(data_dir, task, strategy, fold, init, k, seed, config_path, out_dir):
    """Train one fold of one cell; writes a checkpoint and training log."""
    config = _read_config(config_path)
    seed = _effective_seed(seed, config)
    dataset = load_dataset(data_dir)
    strat = _STRATEGIES[strategy]
    clusters = None
    if strat is SplitStrategy.MAB_CLUSTER_EXCLUSIVE:
        clusters = greedy_cluster(dataset.antibodies)
    folds = make_folds(dataset, _TASKS[task], SplitConfig(strategy=strat, k=k, seed=seed), clusters)
    model_cfg = _model_config(config)
    train_cfg = _training_config(config, seed)
    pretrained = None
    if init == "pretrained":
        pre_cfg = replace(train_cfg, total_steps=int(config.get("pretrain_steps", 500)))
        corpus = _dataset_corpus(dataset)
        pretrained, _ = pretrain_mlm(corpus, model_cfg, pre_cfg)
    model, log = train(dataset, folds, fold, model_cfg, train_cfg,
                       init=init, pretrained=pretrained)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / f"model_{task}_{strategy}_f{fold}_{init}.npz")
    log.to_csv(out / f"log_{task}_{strategy}_f{fold}_{init}.csv")
    click.echo(f"trained fold {fold}; final loss {log.final_loss}")


def _dataset_corpus(dataset: Dataset) -> list[tuple[str, str]]:
    corpus = []
    for ab_id in sorted(dataset.antibodies):
        ab = dataset.antibodies[ab_id]
        corpus.append(("hc", ab.heavy_var))
        corpus.append(("lc", ab.light_var))
    for ag_id in sorted(dataset.antigens):
        corpus.append(("ag", dataset.antigens[ag_id].sequence))
    return corpus


@main.command("run-matrix")
@click.option("--data", "data_dir", type=click.Path(exists=True), default=None,
              help="dataset directory; omitted -> synthetic from config")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--jobs", type=int, default=None, help="cell workers; default = cores")
@click.option("--task", "tasks", type=click.Choice(sorted(_TASKS)), multiple=True)
@click.option("--strategy", "strategies", type=click.Choice(sorted(_STRATEGIES)), multiple=True)
@click.option("--init", "inits", type=click.Choice(["random", "pretrained"]), multiple=True)
@seed_option
@config_option
@out_option
@_guarded
def run_matrix_cmd(data_dir, k, jobs, tasks, strategies, inits, seed, config_path, out_dir):
    """Run the experiment matrix and emit the full report."""
    config = _read_config(config_path)
    seed = _effective_seed(seed, config)
    if data_dir is not None:
        dataset = load_dataset(data_dir)
        synth_rule = None
        synth_cfg = None
    else:
        synth_cfg = _synth_config(config, seed)
        dataset, synth_rule = generate(synth_cfg)

    chosen_tasks = tuple(_TASKS[t] for t in (tasks or sorted(_TASKS)))
    chosen_strategies = tuple(_STRATEGIES[s] for s in (strategies or sorted(_STRATEGIES)))
    chosen_inits = tuple(inits or ("random", "pretrained"))
    specs = full_matrix(k=k, seed=seed, tasks=chosen_tasks,
                        strategies=chosen_strategies, inits=chosen_inits)

    clusters_by_task = {}
    if SplitStrategy.MAB_CLUSTER_EXCLUSIVE in chosen_strategies:
        assignment = greedy_cluster(dataset.antibodies)
        clusters_by_task = {t: assignment for t in chosen_tasks}

    model_cfg = _model_config(config)
    train_cfg = _training_config(config, seed)
    pretrained = None
    if "pretrained" in chosen_inits:
        pre_seed = SplitMix64(seed).derive("pretrain").seed
        pre_cfg = replace(train_cfg, total_steps=int(config.get("pretrain_steps", 500)),
                          seed=pre_seed)
        if synth_rule is not None:
            corpus = generate_corpus(synth_cfg, dataset, synth_rule)
        else:
            corpus = _dataset_corpus(dataset)
        pretrained, _ = pretrain_mlm(corpus, model_cfg, pre_cfg)

    bundle = run_matrix(dataset, specs, model_cfg, train_cfg,
                        clusters_by_task=clusters_by_task, pretrained=pretrained,
                        jobs=jobs or os.cpu_count() or 1)
    files = emit_report(bundle, out_dir)
    for f in files:
        click.echo(str(f))
    if bundle.failures:
        for failure in bundle.failures:
            click.echo(f"cell failed: {failure['cell']}: {failure['error']}", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command("breadth")
@click.argument("report_json", type=click.Path(exists=True))
@out_option
@_guarded
def breadth_cmd(report_json, out_dir):
    """Extract the breadth-of-protection table from a report bundle."""
    bundle = load_report(report_json)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_breadth_csv(bundle.breadth, out / "breadth.csv")
    click.echo(f"{len(bundle.breadth)} breadth rows")


@main.command("report")
@click.argument("report_json", type=click.Path(exists=True))
@click.option("--format", "formats", type=click.Choice(FORMATS), multiple=True)
@out_option
@_guarded
def report_cmd(report_json, formats, out_dir):
    """Re-emit report artifacts from a bundle JSON."""
    bundle = load_report(report_json)
    files = emit_report(bundle, out_dir, formats or FORMATS)
    for f in files:
        click.echo(str(f))


if __name__ == "__main__":
    main()
