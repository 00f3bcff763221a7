"""Headless batch pipeline: the CLI's segment command, driven through a Session
so batch runs and service-driven runs share one code path."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__
from .config import RunConfig
from .errors import ValveSegError
from .levelset import BLOODPOOL, LEAFLET, ContourParams, default_params
from .mesh import PLY_ASCII, STL_BINARY, export_mesh
from .nrrd_io import save_nrrd
from .session import STATUS_COLLAPSED, Session, SessionConfig
from .volume import Volume3D

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["version", "parameters", "stages", "artifacts", "timings_s"],
    "properties": {
        "version": {"type": "string"},
        "parameters": {
            "type": "object",
            "required": ["beta_used", "dt_policy", "shell_sidedness", "seed_radius_mm",
                         "shell_distance_mm", "smoothing_sigma_mm", "roi_clamp",
                         "band_width_mm"],
        },
        "stages": {
            "type": "object",
            "required": ["bloodpool", "leaflet"],
            "additionalProperties": {
                "type": "object",
                "required": ["iterations", "curvature_scale", "advection_scale",
                             "propagation_scale", "dt_safety", "reinit_interval"],
            },
        },
        "artifacts": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["path", "sha256"],
            },
        },
        "timings_s": {"type": "object"},
    },
}

DT_POLICY = ("dt = dt_safety * h_min / max_band(|a_p| s + |a_a| |grad s| + 6 |a_c| s / h_min), "
             "recomputed every reinit_interval iterations")


class PipelineError(ValveSegError):
    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


def _stage_params(cfg: RunConfig, tag: str) -> ContourParams | None:
    doc = cfg.stage_params.get(tag.lower())
    if not doc:
        return None
    base = default_params(tag)
    merged = {
        "curvature_scale": base.curvature_scale,
        "advection_scale": base.advection_scale,
        "propagation_scale": base.propagation_scale,
        "dt_safety": base.dt_safety,
        "reinit_interval": base.reinit_interval,
    }
    merged.update(doc)
    return ContourParams(**merged)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_segmentation(volume: Volume3D, annulus_def, cfg: RunConfig,
                     out_dir=None) -> dict:
    """Run both stages with fixed budgets and write all artifacts.

    Returns the manifest dict (also written as run_manifest.json).
    """
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.threads:
        import numba

        numba.set_num_threads(cfg.threads)

    session_cfg = SessionConfig(
        seed_radius=cfg.seed_radius, shell_distance=cfg.shell_mm,
        smoothing_sigma=cfg.sigma, beta=cfg.beta, roi_clamp=cfg.roi_clamp)
    session = Session(volume, config=session_cfg)
    session.set_annulus(annulus_def)

    timings: dict[str, float] = {}
    stage_doc: dict[str, dict] = {}

    def run_stage(tag: str, iterations: int):
        params = _stage_params(cfg, tag) or default_params(tag)
        t0 = time.perf_counter()
        summary = session.step(tag, iterations, params=params)
        timings[tag.lower()] = round(time.perf_counter() - t0, 3)
        if summary.status == STATUS_COLLAPSED:
            raise PipelineError(tag, "contour collapsed before the iteration budget")
        session.accept_stage(tag)
        stage_doc[tag.lower()] = {
            "iterations": iterations,
            "curvature_scale": params.curvature_scale,
            "advection_scale": params.advection_scale,
            "propagation_scale": params.propagation_scale,
            "dt_safety": params.dt_safety,
            "reinit_interval": params.reinit_interval,
            "inside_volume_mm3": summary.inside_volume_mm3,
        }

    run_stage(BLOODPOOL, cfg.bp_iters)
    run_stage(LEAFLET, cfg.leaflet_iters)

    t0 = time.perf_counter()
    try:
        session.extract_surface()
    except ValveSegError as exc:
        raise PipelineError("SURFACE", str(exc))
    timings["surface"] = round(time.perf_counter() - t0, 3)

    from .levelset import to_mask

    mesh_fmt = STL_BINARY if cfg.format == "stl" else PLY_ASCII
    ext = cfg.format
    artifacts: dict[str, Path] = {}

    def write(name, writer):
        path = out / name
        writer(path)
        artifacts[name] = path

    write("bp_mask.nrrd", lambda p: save_nrrd(to_mask(session.bp_result), p))
    write("leaflet_mask.nrrd", lambda p: save_nrrd(to_mask(session.leaflet_result), p))
    write(f"leaflet_mesh.{ext}", lambda p: export_mesh(session.leaflet_mesh, mesh_fmt, p))
    write(f"proximal_mesh.{ext}", lambda p: export_mesh(session.proximal_mesh, mesh_fmt, p))
    if cfg.dump_phi:
        write("phi_bloodpool.nrrd",
              lambda p: save_nrrd(Volume3D(session.bp_result.grid, session.bp_result.phi), p))
        write("phi_leaflet.nrrd",
              lambda p: save_nrrd(Volume3D(session.leaflet_result.grid,
                                           session.leaflet_result.phi), p))

    manifest = {
        "version": __version__,
        "parameters": {
            "beta_used": session.speed.beta,
            "beta_config": cfg.beta,
            "dt_policy": DT_POLICY,
            "shell_sidedness": "outward",
            "seed_radius_mm": cfg.seed_radius,
            "shell_distance_mm": cfg.shell_mm,
            "smoothing_sigma_mm": cfg.sigma,
            "roi_clamp": cfg.roi_clamp,
            "band_width_mm": session.bp_result.band_width,
            "threads": cfg.threads,
        },
        "stages": stage_doc,
        "artifacts": {name: {"path": str(path), "sha256": _sha256(path)}
                      for name, path in artifacts.items()},
        "timings_s": timings,
        "surfaces": session.surface_summary(),
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest
