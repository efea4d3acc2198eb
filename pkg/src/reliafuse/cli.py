"""Command line interface: training, evaluation, ablations, annotation, service."""

from __future__ import annotations

import csv
import json
from dataclasses import replace
from pathlib import Path

import click

from .annotation.agreement import corpus_kappa as corpus_kappa_fn
from .annotation.agreement import kappa as kappa_fn
from .annotation.clients import build_annotator, load_annotator_specs
from .annotation.pipeline import EscalationPipeline, PipelineConfig
from .annotation.records import (
    EscalationItem,
    Stage,
    load_records_jsonl,
    save_items_jsonl,
)
from .checkpoint import load_model, save_model
from .data import SyntheticSpec, load_dataset, make_synthetic_dataset, save_dataset, split_dataset
from .experiments import run_component_ablation, run_fusion_ablation, run_joint_vs_single
from .labels import MODALITIES, Modality
from .training import TrainConfig, evaluate, train


def _load_train_config(config_path: str | None, seed: int | None) -> TrainConfig:
    config = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    if seed is not None:
        config = replace(config, seed=seed)
    return config


def _metrics_to_json(report) -> dict:
    return {task: metrics.as_percent() for task, metrics in report.items()}


def _write_metrics_csv(report, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task", "accuracy", "auc", "precision", "recall", "f1"])
        for task, metrics in report.items():
            pct = metrics.as_percent()
            writer.writerow(
                [task]
                + [f"{pct[c]:.4f}" for c in ("accuracy", "auc", "precision", "recall", "f1")]
            )


@click.group()
def main() -> None:
    """Reliability-weighted multimodal fusion toolkit."""


# ----------------------------------------------------------------------
# data


@main.command("synth-gen")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--n", "n_samples", type=int, default=120, show_default=True)
@click.option("--seq-len", type=int, default=6, show_default=True)
@click.option("--feature-dim", type=int, default=10, show_default=True)
@click.option("--class-sep", type=float, default=1.0, show_default=True)
@click.option("--ambient-noise", type=float, default=0.4, show_default=True)
@click.option("--noise-prob", type=float, default=0.0, show_default=True)
@click.option("--noise-scale", type=float, default=1.0, show_default=True)
@click.option(
    "--noisy-modality",
    type=click.Choice(["text", "video", "audio", "rotate", "all-but-one", "none"]),
    default="rotate",
    show_default=True,
)
@click.option("--subjects", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def synth_gen(
    out_dir, n_samples, seq_len, feature_dim, class_sep, ambient_noise,
    noise_prob, noise_scale, noisy_modality, subjects, seed,
):
    """Generate a synthetic dataset and write its manifest + feature files."""
    spec = SyntheticSpec(
        n_samples=n_samples,
        seq_len=seq_len,
        feature_dims={m: feature_dim for m in MODALITIES},
        class_sep=class_sep,
        ambient_noise=ambient_noise,
        noise_prob=noise_prob,
        noise_scale=noise_scale,
        noisy_modality=noisy_modality,
        subject_count=subjects or None,
        seed=seed,
    )
    manifest = save_dataset(make_synthetic_dataset(spec), out_dir)
    click.echo(f"wrote {n_samples} samples to {manifest}")


# ----------------------------------------------------------------------
# training and evaluation


@main.command("train")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default="runs/train")
def train_cmd(data_path, config_path, seed, out_dir):
    """Train on a JSONL manifest; writes checkpoint, trace and test metrics."""
    config = _load_train_config(config_path, seed)
    samples = load_dataset(data_path)
    train_split, val_split, test_split = split_dataset(samples, config.split)
    result = train(train_split, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out / "checkpoint.json")
    (out / "trace.json").write_text(
        json.dumps([e.to_dict() for e in result.trace], indent=2)
    )
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    eval_split = test_split or train_split
    report = evaluate(eval_split, result.model, config)
    (out / "metrics.json").write_text(json.dumps(_metrics_to_json(report), indent=2))
    _write_metrics_csv(report, out / "metrics.csv")
    click.echo(
        f"trained {config.epochs} epochs on {len(train_split)} samples; "
        f"final loss {result.trace[-1].loss:.4f}; outputs in {out}"
    )


@main.command("eval")
@click.option("--data", "data_path", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default="runs/eval")
@click.option("--split", type=click.Choice(["train", "val", "test", "all"]), default="all")
def eval_cmd(data_path, checkpoint, config_path, out_dir, split):
    """Evaluate a checkpoint on a dataset split."""
    config = _load_train_config(config_path, None)
    model = load_model(checkpoint)
    samples = load_dataset(data_path)
    if split != "all":
        parts = dict(zip(("train", "val", "test"), split_dataset(samples, config.split)))
        samples = parts[split]
    report = evaluate(samples, model, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(_metrics_to_json(report), indent=2))
    _write_metrics_csv(report, out / "metrics.csv")
    for task, metrics in report.items():
        pct = metrics.as_percent()
        click.echo(
            f"{task}: acc {pct['accuracy']:.2f} auc {pct['auc']:.2f} "
            f"p {pct['precision']:.2f} r {pct['recall']:.2f} f1 {pct['f1']:.2f}"
        )


def _experiment_command(runner, default_out: str):
    def command(data_path, config_path, seed, out_dir, eval_data):
        config = _load_train_config(config_path, seed)
        samples = load_dataset(data_path)
        if eval_data:
            train_split = samples
            eval_split = load_dataset(eval_data)
        else:
            train_split, _val, eval_split = split_dataset(samples, config.split)
            if not eval_split:
                eval_split = train_split
        result = runner(train_split, eval_split, config)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.write_csv(out / "table.csv")
        (out / "table.json").write_text(json.dumps(result.to_records(), indent=2))
        click.echo(f"wrote {out / 'table.csv'}")

    command = click.option("--eval-data", type=click.Path(exists=True), default=None)(command)
    command = click.option("--out", "out_dir", type=click.Path(), default=default_out)(command)
    command = click.option("--seed", type=int, default=None)(command)
    command = click.option("--config", "config_path", type=click.Path(exists=True), default=None)(command)
    command = click.option("--data", "data_path", type=click.Path(exists=True), required=True)(command)
    return command


main.command("ablate-fusion")(
    _experiment_command(run_fusion_ablation, "runs/ablate-fusion")
)
main.command("ablate-components")(
    _experiment_command(run_component_ablation, "runs/ablate-components")
)
main.command("joint-vs-single")(
    _experiment_command(run_joint_vs_single, "runs/joint-vs-single")
)


# ----------------------------------------------------------------------
# annotation pipeline


def _pipeline_config(config_path: str | None) -> PipelineConfig:
    if not config_path:
        return PipelineConfig()
    payload = json.loads(Path(config_path).read_text())
    if "quality_weights" in payload:
        payload["quality_weights"] = tuple(payload["quality_weights"])
    return PipelineConfig(**payload)


@main.group()
def annotate() -> None:
    """Label aggregation and escalation tools."""


@annotate.command("run")
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default="runs/annotate")
def annotate_run(records_path, config_path, out_dir):
    """Vote + quality-gate records grouped by item; write escalation items."""
    records = load_records_jsonl(records_path)
    pipeline = EscalationPipeline(_pipeline_config(config_path))
    by_item: dict[str, list] = {}
    for record in records:
        by_item.setdefault(record.item_id, []).append(record)
    items = []
    for item_id in sorted(by_item):
        item = EscalationItem(item_id=item_id)
        pipeline.step(item, by_item[item_id])
        items.append(item)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_items_jsonl(items, out / "items.jsonl")
    with open(out / "quality.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "stage", "kappa", "entropy_norm", "mean_confidence", "score", "passed"])
        for item in items:
            q = item.history[-1].quality
            writer.writerow(
                [item.item_id, item.stage.value, q.kappa, q.entropy_norm,
                 q.mean_confidence, q.score, q.passed]
            )
    counts = {}
    for item in items:
        counts[item.stage.value] = counts.get(item.stage.value, 0) + 1
    click.echo(f"processed {len(items)} items: {counts}; outputs in {out}")


@annotate.command("kappa")
@click.option("--records", "records_path", type=click.Path(exists=True), required=True)
@click.option(
    "--field",
    type=click.Choice(["emotion", "personality", "both"]),
    default="both",
    show_default=True,
)
def annotate_kappa(records_path, field):
    """Inter-annotator agreement over a records file."""
    records = load_records_jsonl(records_path)
    if field == "both":
        value = corpus_kappa_fn(records)
    else:
        value = kappa_fn(records, field)
    click.echo(f"kappa ({field}): {value:.6f}")


@annotate.command("report")
@click.option("--store", "store_dir", type=click.Path(exists=True), required=True)
def annotate_report(store_dir):
    """Print the adjudication store's agreement/quality report as JSON."""
    from .service.store import QueueStore

    store = QueueStore(store_dir)
    click.echo(json.dumps(store.report(), indent=2, sort_keys=True))


@annotate.command("collect")
@click.option("--items", "items_path", type=click.Path(exists=True), required=True)
@click.option("--annotators", "spec_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default="records.jsonl")
def annotate_collect(items_path, spec_path, out_path):
    """Run configured annotator backends over an item payload file."""
    from .annotation.records import save_records_jsonl

    payloads = [json.loads(line) for line in Path(items_path).read_text().splitlines() if line]
    specs = load_annotator_specs(spec_path)
    records = []
    for spec in specs:
        backend = build_annotator(spec)
        for payload in payloads:
            records.append(backend.annotate(payload))
    save_records_jsonl(records, out_path)
    click.echo(f"collected {len(records)} records from {len(specs)} annotators -> {out_path}")


# ----------------------------------------------------------------------
# adjudication service


@main.command("ingest")
@click.option("--items", "items_path", type=click.Path(exists=True), required=True)
@click.option("--store", "store_dir", type=click.Path(), required=True)
def ingest(items_path, store_dir):
    """Load escalation items (JSONL) into a service store."""
    from .annotation.records import load_items_jsonl
    from .service.store import QueueStore

    store = QueueStore(store_dir)
    items = load_items_jsonl(items_path)
    added = 0
    for item in items:
        store.enqueue(item)
        added += 1
    store.snapshot()
    click.echo(f"ingested {added} items into {store_dir}")


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store", "store_dir", type=click.Path(), required=True)
@click.option("--roster", "roster_path", type=click.Path(exists=True), default=None)
@click.option("--frontend", "frontend_dir", type=click.Path(), default=None)
def serve(port, host, store_dir, roster_path, frontend_dir):
    """Run the adjudication HTTP service."""
    import uvicorn

    from .service.app import create_app
    from .service.store import QueueStore

    store = QueueStore(store_dir)
    app = create_app(store, roster_path=roster_path, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
