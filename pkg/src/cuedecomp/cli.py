"""Batch driver: dataset transformation, cue-conflict generation, corruption
sweeps, and metric tables.

Every command resolves its full configuration, writes it as run_config.json
next to the outputs, and processes samples with per-item random streams, so
reruns and different worker counts give byte-identical results. Exit status
is 0 only when every sample succeeded.
"""
import json
import math
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import conflict as _conflict
from . import corrupt as _corrupt
from . import eed as _eed
from . import metrics as _metrics
from . import shuffle as _shuffle
from .image import load_image, load_mask, save_image, save_mask
from .manifest import DatasetManifest, ManifestEntry
from .rng import derive_stream

WORKERS_ENV = "CUEDECOMP_WORKERS"

METHOD_VARIANTS = {
    "eed": "eed",
    "voronoi": "voronoi",
    "patch": "patch",
    "diamond": "diamond",
    "tex-eed": "tex_eed",
    "tex-eed-patch": "tex_eed_patch",
}


def _default_workers():
    return int(os.environ.get(WORKERS_ENV, "1"))


def _write_config(out_dir, config):
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_jobs(jobs, worker, workers):
    """Map worker over jobs; returns (results, failures). Order-independent."""
    results = {}
    failures = []
    if workers <= 1:
        for job in jobs:
            try:
                results[job["sample_id"]] = worker(job)
            except Exception:
                failures.append((job["sample_id"], traceback.format_exc()))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(worker, job): job["sample_id"] for job in jobs}
            for fut, sid in futures.items():
                try:
                    results[sid] = fut.result()
                except Exception:
                    failures.append((sid, traceback.format_exc()))
    return results, failures


def _report_failures(failures):
    for sid, tb in failures:
        click.echo(f"FAILED {sid}:\n{tb}", err=True)
    if failures:
        click.echo(f"{len(failures)} sample(s) failed", err=True)


# one top-level group ------------------------------------------------------

@click.group()
def main():
    """Cue-decomposition toolkit: shape/texture dataset variants and metrics."""


# transform ----------------------------------------------------------------

def _transform_worker(job):
    img = load_image(job["image"])
    method = job["method"]
    seed = job["seed"]
    sid = job["sample_id"]
    rng = derive_stream(seed, f"{job['variant']}:{sid}")
    mask_out = None
    provenance = None
    if method == "eed":
        out = _eed.run_eed(img, _eed.EedParams(**job["eed_params"]))
    elif method == "voronoi":
        mask = load_mask(job["mask"]) if job.get("mask") else None
        out, mask_shuffled, diagram = _shuffle.voronoi_shuffle(
            img, n=job["sites"], rng=rng, mask=mask)
        provenance = diagram.to_dict()
        if mask_shuffled is not None:
            mask_out = mask_shuffled
    elif method == "patch":
        out = _shuffle.patch_shuffle(img, job["patches_per_side"], rng=rng)
    elif method == "diamond":
        out = _shuffle.diamond_shuffle(img, half_diag=job["half_diag"], rng=rng)
    elif method in ("tex-eed", "tex-eed-patch"):
        diffused = load_image(job["eed_image"])
        if method == "tex-eed":
            out = _shuffle.texture_residual(img, diffused)
        else:
            out = _shuffle.texture_residual_patched(
                img, diffused, job["patches_per_side"], rng=rng)
    else:
        raise ValueError(f"unknown method {method!r}")

    out_dir = Path(job["out_dir"])
    image_path = out_dir / f"{sid}.png"
    save_image(out, image_path)
    rec = {"sample_id": sid, "image": str(image_path), "variant": job["variant"],
           "label": job.get("label"), "mask": None}
    if mask_out is not None:
        mask_path = out_dir / f"{sid}_mask.png"
        save_mask(mask_out, mask_path)
        rec["mask"] = str(mask_path)
    elif job.get("mask"):
        rec["mask"] = job["mask"]
    if provenance is not None:
        prov_path = out_dir / f"{sid}_provenance.json"
        with open(prov_path, "w", encoding="utf-8") as fh:
            json.dump(provenance, fh, sort_keys=True)
    return rec


@main.command("transform")
@click.option("--method", type=click.Choice(sorted(METHOD_VARIANTS)), required=True)
@click.option("--in", "in_manifest", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None, help=f"default ${WORKERS_ENV} or 1")
@click.option("--steps", type=int, default=None,
              help="diffusion steps (eed); default 16384")
@click.option("--kappa", type=float, default=_eed.DEFAULT_KAPPA, show_default=True)
@click.option("--kernel-size", type=int, default=_eed.DEFAULT_KERNEL_SIZE, show_default=True)
@click.option("--sigma", type=float, default=_eed.DEFAULT_SIGMA, show_default=True)
@click.option("--tau", type=float, default=_eed.DEFAULT_TAU, show_default=True)
@click.option("--sites", type=int, default=_shuffle.DEFAULT_SITES, show_default=True,
              help="Voronoi site count")
@click.option("--patches", "patches_per_side", type=int,
              default=_shuffle.DEFAULT_PATCHES_PER_SIDE, show_default=True)
@click.option("--half-diag", type=int, default=None,
              help="diamond half-diagonal in pixels; default sized to the 8x8 patch grid")
@click.option("--eed-in", "eed_manifest", type=click.Path(exists=True), default=None,
              help="manifest of matching diffused images (tex-eed methods)")
def cmd_transform(method, in_manifest, out_dir, seed, workers, steps, kappa,
                  kernel_size, sigma, tau, sites, patches_per_side, half_diag,
                  eed_manifest):
    """Apply one cue transform to every sample of a manifest."""
    manifest = DatasetManifest.load(in_manifest)
    out_dir = Path(out_dir)
    variant = METHOD_VARIANTS[method]
    workers = _default_workers() if workers is None else workers
    eed_params = {"kappa": kappa, "presmooth_kernel_size": kernel_size,
                  "presmooth_sigma": sigma,
                  "steps": _eed.DEFAULT_STEPS_CLASSIFICATION if steps is None else steps,
                  "tau": tau}
    _eed.EedParams(**eed_params)

    eed_paths = {}
    if method in ("tex-eed", "tex-eed-patch"):
        if eed_manifest is None:
            raise click.UsageError(f"--eed-in is required for --method {method}")
        eed_paths = {e.sample_id: e.image for e in DatasetManifest.load(eed_manifest)}

    config = {"command": "transform", "method": method, "in": str(in_manifest),
              "out": str(out_dir), "seed": seed, "workers": workers,
              "eed_params": eed_params, "sites": sites,
              "patches_per_side": patches_per_side,
              "half_diag": half_diag, "eed_in": eed_manifest, "variant": variant}
    _write_config(out_dir, config)

    jobs = []
    missing = []
    for e in manifest:
        job = {"sample_id": e.sample_id, "image": e.image, "mask": e.mask,
               "label": e.label, "method": method, "variant": variant,
               "seed": seed, "out_dir": str(out_dir), "eed_params": eed_params,
               "sites": sites, "patches_per_side": patches_per_side,
               "half_diag": half_diag}
        if method in ("tex-eed", "tex-eed-patch"):
            if e.sample_id not in eed_paths:
                missing.append(e.sample_id)
                continue
            job["eed_image"] = eed_paths[e.sample_id]
        jobs.append(job)
    for sid in missing:
        click.echo(f"FAILED {sid}: no diffused image in --eed-in manifest", err=True)

    results, failures = _run_jobs(jobs, _transform_worker, workers)
    _report_failures(failures)
    entries = [ManifestEntry(sample_id=r["sample_id"], image=r["image"],
                             mask=r["mask"], label=r["label"], variant=variant)
               for r in results.values()]
    DatasetManifest(entries=entries, variant_tag=variant).save(out_dir / "manifest.jsonl")
    sys.exit(1 if failures or missing else 0)


# conflict -----------------------------------------------------------------

def _conflict_worker(job):
    spec = _conflict.ConflictSpec(mode=job["mode"], gamma_s=job["gamma_s"],
                                  gamma_t=job["gamma_t"])
    shape_img = load_image(job["shape_image"])
    texture_img = load_image(job["texture_image"])
    out = _conflict.compose(shape_img, texture_img, spec)
    out_dir = Path(job["out_dir"])
    image_path = out_dir / f"{job['sample_id']}.png"
    save_image(out, image_path)
    return {"sample_id": job["sample_id"], "image": str(image_path)}


@main.command("conflict")
@click.option("--shape-in", required=True, type=click.Path(exists=True),
              help="manifest of shape-cue images (with labels)")
@click.option("--texture-in", required=True, type=click.Path(exists=True),
              help="manifest of texture-cue images (with labels)")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(_conflict.MODES), default="blend", show_default=True)
@click.option("--gamma-s", type=float, default=1.0, show_default=True)
@click.option("--gamma-t", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None)
@click.option("--derangement", is_flag=True,
              help="use every texture sample exactly once")
def cmd_conflict(shape_in, texture_in, out_dir, mode, gamma_s, gamma_t, seed,
                 workers, derangement):
    """Compose cue-conflict images from a shape and a texture manifest."""
    shape_manifest = DatasetManifest.load(shape_in)
    texture_manifest = DatasetManifest.load(texture_in)
    out_dir = Path(out_dir)
    workers = _default_workers() if workers is None else workers
    config = {"command": "conflict", "shape_in": str(shape_in),
              "texture_in": str(texture_in), "out": str(out_dir), "mode": mode,
              "gamma_s": gamma_s, "gamma_t": gamma_t, "seed": seed,
              "workers": workers, "derangement": derangement}
    _write_config(out_dir, config)

    pairing = _conflict.build_pairing(shape_manifest, texture_manifest,
                                      derive_stream(seed, "conflict-pairing"),
                                      derangement=derangement)
    shape_by_id = {e.sample_id: e for e in shape_manifest}
    texture_by_id = {e.sample_id: e for e in texture_manifest}
    jobs = []
    for pair in pairing:
        sid = f"{pair.shape_sample_id}__{pair.texture_sample_id}"
        jobs.append({"sample_id": sid, "mode": mode, "gamma_s": gamma_s,
                     "gamma_t": gamma_t, "out_dir": str(out_dir),
                     "shape_image": shape_by_id[pair.shape_sample_id].image,
                     "texture_image": texture_by_id[pair.texture_sample_id].image,
                     "pair": pair})
    results, failures = _run_jobs(jobs, _conflict_worker, workers)
    _report_failures(failures)

    pairing_path = out_dir / "pairing.jsonl"
    with open(pairing_path, "w", encoding="utf-8") as fh:
        for job in sorted(jobs, key=lambda j: j["sample_id"]):
            if job["sample_id"] not in results:
                continue
            pair = job["pair"]
            fh.write(json.dumps({
                "sample_id": job["sample_id"],
                "image": results[job["sample_id"]]["image"],
                "variant": "conflict",
                "shape_sample_id": pair.shape_sample_id,
                "texture_sample_id": pair.texture_sample_id,
                "shape_class": pair.shape_class,
                "texture_class": pair.texture_class,
            }, sort_keys=True) + "\n")
    entries = [ManifestEntry(sample_id=j["sample_id"],
                             image=results[j["sample_id"]]["image"],
                             label=j["pair"].shape_class, variant="conflict")
               for j in jobs if j["sample_id"] in results]
    DatasetManifest(entries=entries, variant_tag="conflict").save(out_dir / "manifest.jsonl")
    sys.exit(1 if failures else 0)


# corrupt ------------------------------------------------------------------

def _corrupt_worker(job):
    img = load_image(job["image"])
    paths = {}
    for intensity in job["grid"]:
        rng = derive_stream(job["seed"], f"corrupt:{job['kind']}:{intensity!r}:{job['sample_id']}")
        out = _corrupt.apply_corruption(img, job["kind"], intensity, rng)
        out_dir = Path(job["out_dir"]) / _intensity_dirname(intensity)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{job['sample_id']}.png"
        save_image(out, path)
        paths[repr(intensity)] = str(path)
    return paths


def _intensity_dirname(intensity):
    return f"intensity_{intensity:g}"


@main.command("corrupt")
@click.option("--kind", type=click.Choice(_corrupt.KINDS), required=True)
@click.option("--in", "in_manifest", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--grid", type=str, default=None,
              help="comma-separated intensities; default per-kind grid")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None)
def cmd_corrupt(kind, in_manifest, out_dir, grid, seed, workers):
    """Corrupt every sample across an intensity grid (one manifest per intensity)."""
    manifest = DatasetManifest.load(in_manifest)
    out_dir = Path(out_dir)
    workers = _default_workers() if workers is None else workers
    if grid is None:
        grid_values = list(_corrupt.DEFAULT_GRIDS[kind])
    else:
        grid_values = [float(v) for v in grid.split(",") if v.strip() != ""]
        if not grid_values:
            raise click.UsageError("--grid must list at least one intensity")
        grid_values = [math.inf if math.isinf(v) else v for v in grid_values]
    config = {"command": "corrupt", "kind": kind, "in": str(in_manifest),
              "out": str(out_dir), "seed": seed, "workers": workers,
              "grid": [repr(v) for v in grid_values]}
    _write_config(out_dir, config)

    jobs = [{"sample_id": e.sample_id, "image": e.image, "label": e.label,
             "kind": kind, "grid": grid_values, "seed": seed,
             "out_dir": str(out_dir)} for e in manifest]
    results, failures = _run_jobs(jobs, _corrupt_worker, workers)
    _report_failures(failures)

    for intensity in grid_values:
        entries = []
        variant = f"corrupt:{kind}:{intensity:g}"
        for e in manifest:
            if e.sample_id not in results:
                continue
            entries.append(ManifestEntry(
                sample_id=e.sample_id,
                image=results[e.sample_id][repr(intensity)],
                label=e.label, mask=e.mask, variant=variant))
        DatasetManifest(entries=entries, variant_tag=variant).save(
            out_dir / f"manifest_{_intensity_dirname(intensity)}.jsonl")
    sys.exit(1 if failures else 0)


# metrics ------------------------------------------------------------------

@main.command("metrics")
@click.option("--logs", multiple=True, required=True, type=click.Path(exists=True),
              help="prediction logs (JSONL or CSV); repeatable")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--normalization-exclude", type=str, default="",
              help="comma-separated model ids excluded from the normalizers "
                   "and from --spearman correlations")
@click.option("--robustness-mode", type=click.Choice(["ratio", "absolute"]),
              default="ratio", show_default=True)
@click.option("--spearman", "spearman_pairs", nargs=2, multiple=True,
              metavar="COL_A COL_B", help="emit the rank correlation of two columns")
def cmd_metrics(logs, out_dir, normalization_exclude, robustness_mode, spearman_pairs):
    """Aggregate prediction logs into the per-model metric table."""
    out_dir = Path(out_dir)
    exclude = tuple(m for m in normalization_exclude.split(",") if m)
    config = {"command": "metrics", "logs": [str(p) for p in logs],
              "out": str(out_dir), "normalization_exclude": list(exclude),
              "robustness_mode": robustness_mode,
              "spearman": [list(p) for p in spearman_pairs]}
    _write_config(out_dir, config)

    records = []
    for path in logs:
        records.extend(_metrics.read_prediction_log(path))
    table = _metrics.build_metric_table(records, normalization_exclude=exclude,
                                        robustness_mode=robustness_mode)
    table.to_csv(out_dir / "metrics.csv")
    with open(out_dir / "metrics.md", "w", encoding="utf-8") as fh:
        fh.write(table.to_markdown())
    with open(out_dir / "metrics_meta.json", "w", encoding="utf-8") as fh:
        json.dump(table.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")

    correlations = {}
    for col_a, col_b in spearman_pairs:
        rho = table.spearman_between(col_a, col_b, exclude=exclude)
        correlations[f"{col_a}~{col_b}"] = rho
        click.echo(f"spearman({col_a}, {col_b}) = {rho:.4f}")
    if correlations:
        with open(out_dir / "spearman.json", "w", encoding="utf-8") as fh:
            json.dump(correlations, fh, indent=2, sort_keys=True)
            fh.write("\n")
    sys.exit(1 if table.metadata["dropped_models"] else 0)


if __name__ == "__main__":
    main()
