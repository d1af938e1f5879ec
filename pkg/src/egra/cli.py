"""Command-line interface: ingest, consensus, validate, plan, train, eval,
rank, baseline, report, and the review service."""

import json
import logging
import sys
from pathlib import Path

import click

from . import asr_baseline as baseline_mod
from . import consensus as consensus_mod
from . import corpus as corpus_mod
from . import experiments as experiments_mod
from . import metrics as metrics_mod
from . import report as report_mod

logger = logging.getLogger(__name__)

POLICY_NAMES = {
    "all": consensus_mod.ConsensusPolicy.ALL,
    "consensus": consensus_mod.ConsensusPolicy.CONSENSUS,
    "consensus+1i": consensus_mod.ConsensusPolicy.CONSENSUS_PLUS_ONE_INCORRECT,
    "consensus+1c": consensus_mod.ConsensusPolicy.CONSENSUS_PLUS_ONE_CORRECT,
}


def _load_corpus(path: str, with_audio: bool = False) -> corpus_mod.Corpus:
    """Accept either a corpus directory (manifest.jsonl + audio/) or a
    bare manifest file."""
    p = Path(path)
    if p.is_dir():
        return corpus_mod.load_manifest(p / "manifest.jsonl", audio_root=p if with_audio else None)
    return corpus_mod.load_manifest(p)


def _read_judgments(path: str) -> list[consensus_mod.ExpertJudgment]:
    judgments = []
    latest = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            latest[obj["recording_id"]] = obj
    for obj in latest.values():
        judgments.append(
            consensus_mod.ExpertJudgment(
                recording_id=obj["recording_id"],
                verdict=obj["verdict"],
                judged_at=obj.get("judged_at"),
            )
        )
    return judgments


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool) -> None:
    """Reading-assessment toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--audio-root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def ingest(manifest: str, audio_root: str, out_dir: str) -> None:
    """Normalize a corpus: canonical 16 kHz mono PCM16 WAVs plus manifest."""
    corpus = corpus_mod.load_manifest(manifest, audio_root=audio_root)
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    written = 0
    skipped = []
    with (out / "manifest.jsonl").open("w", encoding="utf-8") as fh:
        for rec in corpus.recordings:
            try:
                waveform = corpus_mod.ingest_audio(rec, audio_root=audio_root)
            except corpus_mod.AudioIngestError as exc:
                skipped.append((rec.id, str(exc)))
                continue
            rel = f"audio/{rec.id}.wav"
            corpus_mod.write_canonical_wav(waveform, out / rel)
            obj = {
                "id": rec.id,
                "question": rec.question_id,
                "audio": rel,
                "duration_s": waveform.duration_s,
                "sample_rate_hz": waveform.sample_rate_hz,
                "labels": [
                    {"marker": l.marker_id, "verdict": l.verdict} for l in rec.marker_labels
                ],
            }
            if rec.collected_at:
                obj["collected_at"] = rec.collected_at
            if rec.grade is not None:
                obj["grade"] = rec.grade
            fh.write(json.dumps(obj) + "\n")
            written += 1
    for rid, reason in skipped:
        click.echo(f"skipped {rid}: {reason}", err=True)
    click.echo(f"ingested {written} recordings into {out} ({len(skipped)} skipped)")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(sorted(POLICY_NAMES)), default="consensus")
@click.option("--out", "out_path", required=True, type=click.Path())
def consensus(corpus_path: str, policy: str, out_path: str) -> None:
    """Write the retained subset and training labels under a policy."""
    corpus = _load_corpus(corpus_path)
    retained = consensus_mod.apply_policy(corpus, POLICY_NAMES[policy])
    with open(out_path, "w", encoding="utf-8") as fh:
        for rid in sorted(retained):
            fh.write(json.dumps({"recording_id": rid, "label": retained[rid]}) + "\n")
    total = sum(1 for _ in corpus.fully_labeled())
    click.echo(
        f"{policy}: retained {len(retained)} of {total} "
        f"({report_mod.truncate_pct(len(retained) / total)}%)"
    )


@main.group()
def validate() -> None:
    """Expert validation sampling and reporting."""


@validate.command("sample")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--per-scenario", type=int, default=10)
@click.option("--out", "out_path", required=True, type=click.Path())
def validate_sample(corpus_path: str, seed: int, per_scenario: int, out_path: str) -> None:
    """Draw the blinded stratified validation sample."""
    corpus = _load_corpus(corpus_path)
    ids = consensus_mod.sample_validation_set(
        corpus, per_question=4 * per_scenario, per_scenario=per_scenario, seed=seed
    )
    Path(out_path).write_text(json.dumps({"seed": seed, "recording_ids": ids}, indent=2))
    click.echo(f"sampled {len(ids)} recordings to {out_path}")


@validate.command("report")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--judgments", "judgments_path", required=True, type=click.Path(exists=True))
def validate_report(corpus_path: str, judgments_path: str) -> None:
    """Agreement rates (all policies, overall and per question) as JSON."""
    corpus = _load_corpus(corpus_path)
    judgments = _read_judgments(judgments_path)
    tables = report_mod.live_agreement_tables(corpus, judgments)
    click.echo(json.dumps(tables, indent=2, sort_keys=True))


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--models", required=True, help="Comma-separated checkpoint ids.")
@click.option("--set-sizes", default="1", help="Comma-separated question-set sizes.")
@click.option("--grid", default="full", help="'full' or semicolon list like '50,50;300,200'.")
@click.option("--replicates", type=int, default=5)
@click.option("--seed", type=int, default=0)
@click.option("--test-per-class", type=int, default=50)
@click.option("--out", "out_path", required=True, type=click.Path())
def plan(corpus_path: str, models: str, set_sizes: str, grid: str, replicates: int,
         seed: int, test_per_class: int, out_path: str) -> None:
    """Expand the experiment grid into a concrete seeded run list."""
    corpus = _load_corpus(corpus_path)
    if grid == "full":
        grid_pairs = experiments_mod.FULL_GRID
    else:
        grid_pairs = tuple(
            tuple(int(x) for x in pair.split(",")) for pair in grid.split(";")
        )
    plan_obj = experiments_mod.plan_experiments(
        corpus,
        models=[m.strip() for m in models.split(",")],
        set_sizes=tuple(int(s) for s in set_sizes.split(",")),
        grid=grid_pairs,
        n_replicates=replicates,
        base_seed=seed,
        test_per_class=test_per_class,
    )
    Path(out_path).write_text(plan_obj.to_json())
    click.echo(f"planned {len(plan_obj.runs)} runs to {out_path}")


def _waveform_cache(corpus):
    cache = {}

    def get(rid: str):
        if rid not in cache:
            cache[rid] = corpus_mod.ingest_audio(corpus.by_id(rid), audio_root=corpus.audio_root)
        return cache[rid]

    return get


@main.command()
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_id", required=True, help="Train only this checkpoint id.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--learning-rate", type=float, default=3e-5)
@click.option("--steps", type=int, default=1000)
@click.option("--batch-size", type=int, default=4)
@click.option("--grad-accumulation", type=int, default=2)
@click.option("--limit-runs", type=int, default=None, help="Stop after N runs (smoke tests).")
def train(plan_path: str, corpus_path: str, model_id: str, out_dir: str,
          learning_rate: float, steps: int, batch_size: int, grad_accumulation: int,
          limit_runs) -> None:
    """Execute the plan's fine-tune runs for one model."""
    from . import harness

    corpus = _load_corpus(corpus_path, with_audio=True)
    plan_obj = experiments_mod.ExperimentPlan.from_json(Path(plan_path).read_text())
    runs = [r for r in plan_obj.runs if r.model_id == model_id]
    if limit_runs is not None:
        runs = runs[:limit_runs]
    if not runs:
        raise click.ClickException(f"plan has no runs for model {model_id!r}")
    get_waveform = _waveform_cache(corpus)
    hparams = harness.TrainHyperparams(
        learning_rate=learning_rate, total_steps=steps,
        batch_size=batch_size, grad_accumulation=grad_accumulation,
    )
    out = Path(out_dir)
    for index, run in enumerate(runs, start=1):
        run_dir = out / run.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        examples = tuple(
            harness.TrainingExample(get_waveform(item.recording_id),
                                    (item.question_id, item.verdict))
            for item in run.train_items
        )
        train_set = harness.TrainingSet(question_set=run.config.question_set, examples=examples)
        encoder = harness.load_encoder(run.model_id, seed=run.seed)
        classifier, log = harness.fine_tune(encoder, train_set, hparams, seed=run.seed)
        harness.save_classifier(classifier, run_dir / "classifier")
        (run_dir / "training_log.json").write_text(json.dumps({"losses": log.losses}))
        (run_dir / "run_meta.json").write_text(
            json.dumps(
                {
                    "run_id": run.run_id, "model_id": run.model_id,
                    "question_set": list(run.config.question_set),
                    "n_correct": run.config.n_correct, "n_incorrect": run.config.n_incorrect,
                    "replicate": run.replicate, "seed": run.seed,
                },
                indent=2, sort_keys=True,
            )
        )
        with (run_dir / "predictions.jsonl").open("w", encoding="utf-8") as fh:
            for qid, split in sorted(run.test_splits.items()):
                ids = list(split.positive_ids) + list(split.negative_ids)
                truths = [(qid, corpus_mod.CORRECT)] * len(split.positive_ids) + [
                    (qid, corpus_mod.INCORRECT)
                ] * len(split.negative_ids)
                waveforms = [get_waveform(rid) for rid in ids]
                outputs = harness.predict_batch(classifier, waveforms)
                for rid, truth, (label, probs) in zip(ids, truths, outputs):
                    fh.write(
                        json.dumps(
                            {
                                "recording_id": rid, "question": qid,
                                "truth": list(truth), "predicted": list(label),
                                "probability": float(probs.max()),
                            }
                        )
                        + "\n"
                    )
        click.echo(f"[{index}/{len(runs)}] {run.run_id}: final loss "
                   f"{log.losses[-1] if log.losses else float('nan'):.4f}")


@main.command()
@click.option("--classifier", "artifact_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--audio", "audio_path", required=True, type=click.Path(exists=True))
def infer(artifact_dir: str, audio_path: str) -> None:
    """Classify one WAV file with a saved classifier."""
    from . import harness

    classifier = harness.load_classifier(artifact_dir)
    samples, rate = corpus_mod.load_wav(audio_path)
    waveform = corpus_mod.canonicalize(samples, rate)
    label, probs = harness.predict(classifier, waveform)
    click.echo(
        json.dumps(
            {
                "question": label[0],
                "verdict": label[1],
                "probabilities": {
                    f"{qid}/{verdict}": float(p)
                    for (qid, verdict), p in zip(classifier.label_space.classes, probs)
                },
            },
            indent=2,
        )
    )


@main.command("eval")
@click.option("--runs", "runs_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
def eval_runs(runs_dir: str, out_path: str) -> None:
    """Score per-run predictions into per-question metric samples."""
    samples = []
    run_dirs = sorted(p for p in Path(runs_dir).iterdir() if (p / "run_meta.json").exists())
    if not run_dirs:
        raise click.ClickException(f"no completed runs under {runs_dir}")
    for run_dir in run_dirs:
        meta = json.loads((run_dir / "run_meta.json").read_text())
        predictions: dict[str, dict] = {}
        truths: dict[str, dict] = {}
        per_question_ids: dict[str, list[str]] = {}
        for line in (run_dir / "predictions.jsonl").read_text().splitlines():
            obj = json.loads(line)
            predictions[obj["recording_id"]] = tuple(obj["predicted"])
            truths[obj["recording_id"]] = tuple(obj["truth"])
            per_question_ids.setdefault(obj["question"], []).append(obj["recording_id"])
        for qid, ids in sorted(per_question_ids.items()):
            cm = metrics_mod.confusion(
                {rid: predictions[rid] for rid in ids},
                {rid: truths[rid] for rid in ids},
                qid,
            )
            de, fpr, fnr = metrics_mod.rates(cm)
            samples.append(
                metrics_mod.MetricSample(
                    question_id=qid, model_id=meta["model_id"],
                    set_size=len(meta["question_set"]),
                    n_correct=meta["n_correct"], n_incorrect=meta["n_incorrect"],
                    replicate=meta["replicate"], de=de, fpr=fpr, fnr=fnr,
                )
            )
    Path(out_path).write_text(metrics_mod.metric_samples_to_jsonl(samples))
    click.echo(f"wrote {len(samples)} metric samples to {out_path}")


@main.command()
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=5)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def rank(results_path: str, k: int, out_dir) -> None:
    """Top-k configurations per model with significance highlighting."""
    samples = metrics_mod.metric_samples_from_jsonl(Path(results_path).read_text())
    rows = metrics_mod.rank_top_k(samples, k=k)
    header = f"{'model':<24} {'set':>3} {'corr':>5} {'incorr':>6} " \
             f"{'DE% (std)':>16} {'FPR% (std)':>16} {'FNR% (std)':>16}"
    click.echo(header)
    for row in rows:
        s = row.stats
        def cell(mean, std, flag):
            text = f"{100 * mean:.2f} ({100 * std:.2f})"
            return f"*{text}" if flag else f" {text}"
        click.echo(
            f"{row.model_id:<24} {row.set_size:>3} {row.n_correct:>5} {row.n_incorrect:>6} "
            f"{cell(s.de_mean, s.de_std, row.highlight_de):>16} "
            f"{cell(s.fpr_mean, s.fpr_std, row.highlight_fpr):>16} "
            f"{cell(s.fnr_mean, s.fnr_std, row.highlight_fnr):>16}"
        )
    click.echo("* = not significantly different (p>0.05) from the column best")
    if out_dir:
        paths = report_mod.export_tables(out_dir, rank_rows=rows)
        click.echo(f"wrote {paths['ranking']}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--transcripts", "transcripts_path", type=click.Path(exists=True), default=None,
              help="Replay transcripts from a JSONL file.")
@click.option("--model", "model_id", default=None,
              help="Transcribe with a CTC checkpoint instead of a replay file.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def baseline(corpus_path: str, transcripts_path, model_id, out_dir) -> None:
    """Exact-match accuracy of a speech-to-text baseline."""
    if (transcripts_path is None) == (model_id is None):
        raise click.ClickException("provide exactly one of --transcripts or --model")
    with_audio = model_id is not None
    corpus = _load_corpus(corpus_path, with_audio=with_audio)
    if transcripts_path is not None:
        transcriber = baseline_mod.ReplayTranscriber(transcripts_path)
    else:
        transcriber = baseline_mod.CTCTranscriber(model_id, audio_root=corpus.audio_root)
    records = baseline_mod.run_baseline(corpus, transcriber)
    report = baseline_mod.exact_match_accuracy(records)
    for label in sorted(report.per_question):
        qa = report.per_question[label]
        click.echo(f"{label:<6} {qa.samples:>6} {qa.matches:>6} {100 * qa.accuracy:>7.2f}%")
    click.echo(f"overall {report.total_samples:>5} {report.total_matches:>6} "
               f"{100 * report.overall_accuracy:>7.2f}%")
    if out_dir:
        paths = report_mod.export_tables(out_dir, baseline=report)
        click.echo(f"wrote {paths['baseline']}")


@main.command("report")
@click.option("--results", "results_path", required=True, type=click.Path(exists=True))
@click.option("--figures", default="all",
              help="'all' or comma list: fpr_fnr_scatter,de_boxplot_limited,per_question_boxplot")
@click.option("--k", type=int, default=5)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), default=None)
@click.option("--judgments", "judgments_path", type=click.Path(exists=True), default=None)
def report_cmd(results_path: str, figures: str, k: int, out_dir: str,
               corpus_path, judgments_path) -> None:
    """Render figures and export tables from a results store."""
    samples = metrics_mod.metric_samples_from_jsonl(Path(results_path).read_text())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wanted = set(figures.split(",")) if figures != "all" else {
        "fpr_fnr_scatter", "de_boxplot_limited", "per_question_boxplot",
        "distribution_bars", "agreement_bars",
    }
    rows = metrics_mod.rank_top_k(samples, k=k) if samples else []
    aggregates = metrics_mod.aggregate(samples) if samples else {}
    written = []
    if "fpr_fnr_scatter" in wanted and aggregates:
        written.append(report_mod.render_scatter(aggregates, out / "fpr_fnr_scatter.png"))
    if "de_boxplot_limited" in wanted and samples:
        try:
            written.append(
                report_mod.render_limited_data_boxplot(samples, out / "limited_data_de.png")
            )
        except ValueError as exc:
            click.echo(f"skipping limited-data figure: {exc}", err=True)
    if "per_question_boxplot" in wanted and samples:
        top = {(r.model_id, r.set_size, r.n_correct, r.n_incorrect) for r in rows}
        written.append(
            report_mod.render_per_question_boxplot(
                samples, out / "per_question_de.png", top_configs=top or None
            )
        )
    corpus = _load_corpus(corpus_path) if corpus_path else None
    judgments = _read_judgments(judgments_path) if judgments_path else None
    if corpus is not None:
        if "distribution_bars" in wanted:
            counts, _ = corpus_mod.summarize_distribution(corpus)
            written.append(report_mod.render_distribution_bars(counts, out / "label_distribution.png"))
        if "agreement_bars" in wanted and judgments:
            per_question = {}
            for policy in consensus_mod.ConsensusPolicy:
                for qid, rep in consensus_mod.agreement_by_question(corpus, judgments, policy).items():
                    per_question.setdefault(qid, {})[policy] = rep
            written.append(report_mod.render_agreement_bars(per_question, out / "agreement_by_question.png"))
    paths = report_mod.export_tables(
        out, corpus=corpus, judgments=judgments, rank_rows=rows or None
    )
    written.extend(paths.values())
    for path in written:
        click.echo(f"wrote {path}")


@main.group()
def review() -> None:
    """Expert review service."""


@review.command("serve")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--seed", type=int, default=0)
@click.option("--per-scenario", type=int, default=10)
@click.option("--log", "log_path", default="judgments.jsonl", type=click.Path())
@click.option("--ui", "ui_dir", type=click.Path(exists=True, file_okay=False), default=None)
def review_serve(corpus_path: str, port: int, host: str, seed: int,
                 per_scenario: int, log_path: str, ui_dir) -> None:
    """Serve the validation workflow over HTTP."""
    import uvicorn

    from .review_service import create_app

    corpus = _load_corpus(corpus_path, with_audio=True)
    if ui_dir is None:
        default_ui = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if default_ui.exists():
            ui_dir = default_ui
    app = create_app(
        corpus, seed=seed, log_path=log_path,
        per_question=4 * per_scenario, per_scenario=per_scenario, ui_dir=ui_dir,
    )
    click.echo(f"serving review session on http://{host}:{port} (log: {log_path})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main(sys.argv[1:])
