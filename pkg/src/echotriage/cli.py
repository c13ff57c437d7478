"""Command-line interface: ingest, classify, phantom, run, calibrate, workload, serve."""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from . import dicom, phantom, segmentation, views
from .pipeline import PipelineConfig, run_batch
from .server import serve as serve_app
from .store import ReportStore
from .triage import (
    WorkloadParams,
    calibrate_cutoff,
    load_cohort_csv,
    workload_savings,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@click.group()
def main():
    """Echocardiogram triage pipeline."""


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path),
              help="Destination directory for ingested files.")
@click.option("--anonymize", "anonymize_flag", is_flag=True,
              help="Replace PHI tags with the fixed placeholder.")
def ingest(directory: Path, out: Path, anonymize_flag: bool):
    """Parse every .dcm file in DIRECTORY and copy it (optionally anonymized) to --out."""
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for path in sorted(directory.glob("*.dcm")):
        try:
            elements = dicom.parse_dataset(path.read_bytes())
            clip = dicom.clip_from_elements(elements)
        except dicom.DicomError as exc:
            click.echo(f"SKIP {path.name}: {exc}", err=True)
            continue
        if anonymize_flag:
            elements = dicom.anonymize(elements)
        (out / path.name).write_bytes(dicom.write_dicom(clip, elements))
        manifest.append(clip)
        click.echo(f"OK   {path.name}: study={clip.study_id} clip={clip.clip_id} "
                   f"{clip.num_frames}f {clip.rows}x{clip.cols}")
    with open(out / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "study_id", "clip_id", "rows", "cols", "num_frames",
                         "frame_interval_ms", "calibrated", "view_hint"])
        for clip in manifest:
            writer.writerow([f"{clip.clip_id}.dcm", clip.study_id, clip.clip_id,
                             clip.rows, clip.cols, clip.num_frames,
                             clip.frame_interval_ms, clip.calibrated,
                             clip.declared_view_hint or ""])
    click.echo(f"ingested {len(manifest)} clip(s) into {out}")


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--backend", default="hint", show_default=True,
              help="hint | constant | external:<path>")
def classify(directory: Path, backend: str):
    """Label each clip's view and show the clip selected per view."""
    if backend == "hint":
        instance = views.HintBackend()
    elif backend == "constant":
        instance = views.ConstantBackend()
    elif backend.startswith("external:"):
        instance = views.load_external_backend(backend.split(":", 1)[1])
    else:
        raise click.UsageError(f"unknown backend {backend!r}")
    labeled = []
    for path in sorted(directory.glob("*.dcm")):
        try:
            clip = dicom.parse_dicom(path.read_bytes())
        except dicom.DicomError as exc:
            click.echo(f"SKIP {path.name}: {exc}", err=True)
            continue
        result = views.classify_view(clip, instance)
        labeled.append((clip, result.label))
        click.echo(f"{path.name}: {result.label.view.value} "
                   f"(confidence {result.label.confidence:.2f}, backend {result.backend})")
    for view in (views.View.A4C, views.View.A2C, views.View.PLAX):
        chosen = views.select_clip(labeled, view)
        if chosen is not None:
            click.echo(f"selected {view.value}: {chosen.clip_id} "
                       f"({chosen.num_frames} frames)")


@main.command("phantom")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="TOML file with one or more [[phantom]] tables.")
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def phantom_cmd(spec_path: Path, out: Path):
    """Generate phantom studies: .dcm clips, ground-truth sidecars, truth.csv."""
    with open(spec_path, "rb") as fh:
        raw = tomllib.load(fh)
    entries = raw.get("phantom")
    if not entries:
        raise click.UsageError("spec file holds no [[phantom]] tables")
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for entry in entries:
        view = entry.pop("view", "A4C")
        study_id = entry.pop("study_id", "1.2.826.0.1.55555")
        spec = phantom.PhantomSpec(**entry)
        clip, masks = phantom.render_phantom(spec, study_id=study_id, view_hint=view)
        (out / f"{clip.clip_id}.dcm").write_bytes(dicom.write_dicom(clip))
        segmentation.write_sidecar(out, clip.clip_id, masks)
        truth = phantom.analytic_truth(spec)
        rows.append([clip.clip_id, truth.edv_ml, truth.esv_ml, truth.lvef_pct])
        click.echo(f"wrote {clip.clip_id}.dcm ({clip.num_frames} frames, "
                   f"analytic LVEF {truth.lvef_pct:.1f}%)")
    with open(out / "truth.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "edv_ml", "esv_ml", "lvef_pct"])
        writer.writerows(rows)
    click.echo(f"truth table: {out / 'truth.csv'}")


def _expand_study_dirs(root: Path):
    if any(root.glob("*.dcm")):
        return [root]
    return sorted(d for d in root.iterdir() if d.is_dir() and any(d.glob("*.dcm")))


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--config", "config_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Pipeline TOML config; defaults apply when omitted.")
@click.option("--store", "store_path", type=click.Path(file_okay=False, path_type=Path),
              help="Overrides the store path from the config.")
def run(directory: Path, config_path: Path, store_path: Path):
    """Run the full pipeline on a study directory (or a directory of studies)."""
    cfg = PipelineConfig.from_toml(config_path) if config_path else PipelineConfig()
    store = ReportStore(store_path or Path(cfg.store_path))
    study_dirs = _expand_study_dirs(directory)
    if not study_dirs:
        raise click.UsageError(f"{directory} holds no .dcm files")
    reports = run_batch(study_dirs, cfg, store)
    for report in reports:
        lvef = f"{report.lvef['mean']:.1f}%" if report.lvef else "n/a"
        flags = f" [{', '.join(report.quality_flags)}]" if report.quality_flags else ""
        click.echo(f"{report.study_id}: {report.category} (LVEF {lvef}){flags}")
    click.echo(f"{len(reports)} report(s) stored in {store.root}")


@main.command()
@click.option("--cohort", "cohort_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="CSV with columns study_id,estimated_lvef,truly_normal.")
@click.option("--precision-floor", default=0.8, show_default=True, type=float)
def calibrate(cohort_path: Path, precision_floor: float):
    """Choose the NORMAL cutoff maximizing sensitivity at the precision floor."""
    cohort = load_cohort_csv(cohort_path)
    result = calibrate_cutoff(cohort, precision_floor)
    click.echo(f"cohort size:    {len(cohort)}")
    click.echo(f"chosen cutoff:  predict NORMAL iff LVEF > {result.chosen_cutoff}")
    click.echo(f"precision:      {result.achieved_precision:.3f}")
    click.echo(f"sensitivity:    {result.achieved_sensitivity:.3f}")
    if not result.feasible:
        click.echo(f"INFEASIBLE: no cutoff reaches precision {precision_floor}; "
                   "result is the all-negative operating point")
        sys.exit(1)


@main.command()
@click.option("--studies", default=10_000, show_default=True, type=int)
@click.option("--prevalence", default=0.40, show_default=True, type=float)
@click.option("--sensitivity", default=0.30, show_default=True, type=float)
@click.option("--minutes", default=9.0, show_default=True, type=float)
def workload(studies: int, prevalence: float, sensitivity: float, minutes: float):
    """Project cardiologist hours per year saved by the triage filter."""
    params = WorkloadParams(studies_per_year=studies, normal_prevalence=prevalence,
                            sensitivity=sensitivity, minutes_per_study=minutes)
    hours = workload_savings(params)
    click.echo(f"{hours:.1f} hours/year "
               f"({studies} studies, {prevalence:.0%} normal, "
               f"{sensitivity:.0%} sensitivity, {minutes:g} min/study)")


@main.command()
@click.option("--store", "store_path", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--cohort", "cohort_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Cohort CSV backing the what-if endpoint.")
def serve(store_path: Path, port: int, host: str, cohort_path: Path):
    """Serve stored reports over HTTP for the review UI."""
    cohort = load_cohort_csv(cohort_path) if cohort_path else None
    click.echo(f"serving {store_path} on {host}:{port}")
    serve_app(store_path, port=port, host=host, cohort=cohort)


if __name__ == "__main__":
    main()
