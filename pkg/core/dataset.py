"""
Press Dataset Manager for the GelMPM simulator
- objects x press positions x depths, one press sequence per (object, position)
- Resumable via the manifest; worker processes with serialized manifest writes
- Pairwise run comparison (SSIM / PSNR / MAE) and particle-density variants
"""

import logging
import math
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from config import COMPARE_FILE
from core import shapes
from core.errors import ManifestMismatch
from core.geometry import load_point_cloud
from core.metrics import compare_images
from core.scene_config import SceneConfig
from core.simulator import TactileSimulator
from data.storage import RunStorage, manifest_key, read_csv, read_image, write_csv

logger = logging.getLogger(__name__)

COMPARE_FIELDS = ["object", "position_id", "depth_index", "ssim", "psnr", "mae_percent"]
DENSITY_COUNTS = (10_000, 100_000, 1_000_000)


def resolve_objects(entries, scene):
    """
    Map object entries to (name, cloud path or None)

    An entry is a point-cloud path or the name of an analytic object (None path).
    """
    if not entries:
        entries = list(scene.objects) or ([scene.indenter.cloud_path] if scene.indenter.cloud_path else [])
    if not entries:
        raise ValueError("No indenter objects given (config 'objects', indenter.cloud_path or --objects)")

    resolved = []
    for entry in entries:
        path = Path(entry)
        if path.is_file():
            resolved.append((path.stem, str(path)))
        elif entry in shapes.SHAPES:
            resolved.append((entry, None))
        else:
            raise FileNotFoundError(f"'{entry}' is neither a point-cloud file nor an analytic object")
    names = [name for name, _ in resolved]
    if len(set(names)) != len(names):
        raise ValueError(f"Object names must be unique (got {names})")
    return resolved


def sample_name(object_name, position_id, depth_index):
    return f"{object_name}_p{position_id}_d{depth_index:02d}"


def run_press_sequence(job):
    """
    One object at one press position through every depth (runs in a worker)

    Depth 0 is captured before the indenter moves; later depths are reached by
    continuing the same press, then settling.
    """
    scene = SceneConfig.from_dict(job["scene"])
    name = job["object"]
    if job["cloud_path"]:
        cloud = load_point_cloud(job["cloud_path"])
    else:
        cloud = shapes.generate_object(name, count=job["analytic_count"], seed=scene.indenter.seed)
    scene.validate(indenter_cloud=cloud)

    simulator = TactileSimulator(scene, indenter_cloud=cloud, press_xy=job["xy"], object_name=name)
    storage = RunStorage(job["run_dir"])
    press = scene.press
    rows = []
    for depth_index, depth in enumerate(press.depths):
        if depth > 0:
            simulator.move_to_depth(depth, press.speed)
            simulator.settle(press.settle_steps)
        image, depth_map = simulator.capture()
        sample = sample_name(name, job["position_id"], depth_index)
        image_path = storage.save_image(sample, image)
        depth_path = storage.save_depth(sample, depth_map)
        rows.append({
            "object": name,
            "position_id": job["position_id"],
            "x": f"{job['xy'][0]:.6g}",
            "y": f"{job['xy'][1]:.6g}",
            "depth_index": depth_index,
            "depth": f"{depth:.6g}",
            "max_depth": f"{depth_map.max_depth:.6e}",
            "particle_count": simulator.particle_count,
            "contact": "true" if depth > 0 else "false",
            "image": storage.relative(image_path),
            "depth_map": storage.relative(depth_path),
        })
    logger.info(f"{name} position {job['position_id']}: {len(rows)} samples")
    return rows


class PressDatasetManager:
    """Manager for press-grid datasets"""

    def __init__(self, scene, output_dir=None, analytic_count=shapes.DEFAULT_POINT_COUNT):
        self.scene = scene
        self.storage = RunStorage(output_dir or scene.output_dir)
        self.analytic_count = int(analytic_count)

    def _complete_sequences(self):
        """(object, position) pairs whose every depth row and file is present"""
        n_depths = len(self.scene.press.depths)
        seen = {}
        for row in self.storage.read_manifest():
            files_ok = (self.storage.run_dir / row["image"]).exists() and (self.storage.run_dir / row["depth_map"]).exists()
            if files_ok:
                pair = (row["object"], int(row["position_id"]))
                seen.setdefault(pair, set()).add(int(row["depth_index"]))
        return {pair for pair, indices in seen.items() if indices == set(range(n_depths))}

    def plan_jobs(self, objects=None, resume=True):
        done = self._complete_sequences() if resume else set()
        scene_dict = self.scene.to_dict()
        jobs = []
        for name, cloud_path in resolve_objects(objects, self.scene):
            for position_id, xy in self.scene.press.positions():
                if (name, position_id) in done:
                    logger.warning(f"Skipping {name} position {position_id}: already in manifest")
                    continue
                jobs.append({
                    "scene": scene_dict,
                    "object": name,
                    "cloud_path": cloud_path,
                    "analytic_count": self.analytic_count,
                    "position_id": position_id,
                    "xy": xy,
                    "run_dir": str(self.storage.run_dir),
                })
        return jobs

    def run_press_dataset(self, objects=None, workers=1, resume=True):
        """
        Simulate every (object, position, depth) sample into the output directory

        Returns:
            Path of the dataset directory
        """
        self.scene.validate()
        self.storage.ensure_directories()
        self.storage.save_config(self.scene)
        if not resume:
            self.storage.write_manifest([])

        jobs = self.plan_jobs(objects, resume=resume)
        logger.info(f"Press dataset: {len(jobs)} sequences to run in {self.storage.run_dir} ({workers} workers)")

        if workers <= 1 or len(jobs) <= 1:
            for job in jobs:
                self.storage.merge_manifest(run_press_sequence(job))
        else:
            with Pool(workers) as pool:
                for rows in pool.imap_unordered(run_press_sequence, jobs):
                    self.storage.merge_manifest(rows)

        logger.info(f"Press dataset complete: {len(self.storage.read_manifest())} manifest rows")
        return self.storage.run_dir

    def run_density_variants(self, object_name, counts=DENSITY_COUNTS, workers=1):
        """
        Same object at several indenter particle counts

        Each count goes to sub-dataset n<count>; returns {count: mean MAE fraction
        against the densest run}.
        """
        counts = sorted(int(c) for c in counts)
        densest = counts[-1]
        run_dirs = {}
        for count in counts:
            variant = self.scene.with_overrides({"indenter": {"target_count": count}})
            manager = PressDatasetManager(
                variant,
                output_dir=self.storage.run_dir / f"n{count}",
                analytic_count=max(self.analytic_count, densest),
            )
            run_dirs[count] = manager.run_press_dataset([object_name], workers=workers)

        result = {}
        for count in counts:
            _, summary = compare_runs(run_dirs[count], run_dirs[densest])
            result[count] = summary["mae"]["mean"]
            logger.info(f"n{count} vs n{densest}: MAE {100 * result[count]:.2f}%")
        return result


def _summary(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return {"mean": math.nan, "std": 0.0}
    return {"mean": float(values.mean()), "std": float(values.std())}


def _psnr_summary(values):
    """Mean/std over pairs that differ; identical pairs (infinite PSNR) are counted apart"""
    values = np.asarray(values, dtype=np.float64)
    finite = values[np.isfinite(values)]
    identical = int(values.size - finite.size)
    if finite.size == 0:
        mean = math.inf if identical else math.nan
        return {"mean": mean, "std": 0.0, "identical": identical}
    return {"mean": float(finite.mean()), "std": float(finite.std()), "identical": identical}


def _identical_note(psnr):
    identical = psnr.get("identical", 0)
    return f" ({identical} identical)" if identical else ""


def format_summary(summary):
    """Table-style 'mean ± std' strings"""
    return {
        "ssim": f"{summary['ssim']['mean']:.3f} ± {summary['ssim']['std']:.3f}",
        "psnr": f"{summary['psnr']['mean']:.2f} ± {summary['psnr']['std']:.2f}" + _identical_note(summary["psnr"]),
        "mae": f"{100 * summary['mae']['mean']:.2f} ± {100 * summary['mae']['std']:.2f}%",
    }


def compare_runs(dir_a, dir_b, output=None):
    """
    Per-sample SSIM / PSNR / MAE between two datasets with matching manifests

    Returns:
        (per-pair rows, {"ssim"|"psnr"|"mae": {"mean", "std"}}); psnr also carries
        "identical", the number of pairs left out of its mean. The CSV gets the
        pairs followed by mean and std rows
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    rows_a = {manifest_key(r): r for r in read_csv(RunStorage(dir_a).manifest_file)}
    rows_b = {manifest_key(r): r for r in read_csv(RunStorage(dir_b).manifest_file)}
    if rows_a.keys() != rows_b.keys():
        raise ManifestMismatch(
            missing_in_a=[":".join(map(str, k)) for k in rows_b.keys() - rows_a.keys()],
            missing_in_b=[":".join(map(str, k)) for k in rows_a.keys() - rows_b.keys()],
        )

    pairs = []
    for key in sorted(rows_a):
        report = compare_images(read_image(dir_a / rows_a[key]["image"]), read_image(dir_b / rows_b[key]["image"]))
        pairs.append({
            "object": key[0],
            "position_id": key[1],
            "depth_index": key[2],
            "ssim": report.ssim,
            "psnr": report.psnr,
            "mae": report.mae,
        })

    summary = {metric: _summary([p[metric] for p in pairs]) for metric in ("ssim", "mae")}
    summary["psnr"] = _psnr_summary([p["psnr"] for p in pairs])
    formatted = format_summary(summary) if pairs else {}
    logger.info(f"Compared {len(pairs)} samples: {formatted}")

    output = Path(output) if output else dir_a / COMPARE_FILE
    csv_rows = [
        {
            "object": p["object"],
            "position_id": p["position_id"],
            "depth_index": p["depth_index"],
            "ssim": f"{p['ssim']:.6f}",
            "psnr": f"{p['psnr']:.4f}",
            "mae_percent": f"{100 * p['mae']:.4f}",
        }
        for p in pairs
    ]
    for stat in ("mean", "std"):
        csv_rows.append({
            "object": stat,
            "position_id": "",
            "depth_index": "",
            "ssim": f"{summary['ssim'][stat]:.6f}",
            "psnr": f"{summary['psnr'][stat]:.4f}",
            "mae_percent": f"{100 * summary['mae'][stat]:.4f}",
        })
    write_csv(output, COMPARE_FIELDS, csv_rows)
    return pairs, summary
