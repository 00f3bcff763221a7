"""Interactive segmentation session: stage machine, snapshots, undo.

One logical writer per session: every mutating command takes the session lock.
Snapshots are full immutable level-set states, so undo is bit-exact by
construction and replaying a command log reproduces identical results.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
import zipfile
from dataclasses import dataclass, field, asdict

import numpy as np

from . import levelset
from .annulus import AnnulusDefinition, AnnulusModel, fit_annulus
from .errors import ContourCollapsedError, StageError, ValveSegError
from .filters import AUTO, SpeedImage, edge_speed, gaussian_smooth, gradient_magnitude
from .levelset import (BLOODPOOL, LEAFLET, ContourParams, LevelSetState, advance,
                       default_params, init_ball, init_shell, roi_cylinder_mask, to_mask)
from .mesh import TriMesh, extension_for_format, format_for_extension, marching_cubes
from .mesh import stl_binary_bytes, ply_ascii_bytes, STL_BINARY
from .nrrd_io import nrrd_bytes
from .phantom import PhantomSpec, generate_phantom
from .proximal import extract_proximal
from .volume import Volume3D

NEW = "NEW"
VOLUME_LOADED = "VOLUME_LOADED"
ANNULUS_SET = "ANNULUS_SET"
BP_ACTIVE = "BP_ACTIVE"
BP_ACCEPTED = "BP_ACCEPTED"
LEAFLET_ACTIVE = "LEAFLET_ACTIVE"
LEAFLET_ACCEPTED = "LEAFLET_ACCEPTED"
SURFACE_READY = "SURFACE_READY"

STAGE_ORDER = [NEW, VOLUME_LOADED, ANNULUS_SET, BP_ACTIVE, BP_ACCEPTED,
               LEAFLET_ACTIVE, LEAFLET_ACCEPTED, SURFACE_READY]

EXPORT_KINDS = ("BP_MASK", "LEAFLET_MASK", "LEAFLET_MESH", "PROXIMAL_MESH")

STATUS_OK = "OK"
STATUS_COLLAPSED = "CONTOUR_COLLAPSED"


@dataclass(frozen=True)
class SessionConfig:
    """Method-level defaults; every value lands in summaries and run manifests."""

    seed_radius: float = 5.0
    shell_distance: float = 5.0
    smoothing_sigma: float = 1.0
    beta: float | str = AUTO
    roi_clamp: bool = False
    roi_radius_margin: float = 2.0
    roi_above: float = 1.5
    roi_below: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StepSummary:
    stage: str
    iterations_done: int
    inside_volume_mm3: float
    status: str = STATUS_OK

    def to_dict(self) -> dict:
        return asdict(self)


class Session:
    def __init__(self, volume: Volume3D, config: SessionConfig | None = None,
                 session_id: str | None = None, phantom_spec: PhantomSpec | None = None):
        self.id = session_id or uuid.uuid4().hex[:12]
        self.volume = volume
        self.config = config or SessionConfig()
        self.phantom_spec = phantom_spec
        self.stage = VOLUME_LOADED
        self.annulus_def: AnnulusDefinition | None = None
        self.annulus: AnnulusModel | None = None
        self.bp_snapshots: list[LevelSetState] = []
        self.leaflet_snapshots: list[LevelSetState] = []
        self.bp_result: LevelSetState | None = None
        self.leaflet_result: LevelSetState | None = None
        self.bp_mesh: TriMesh | None = None
        self.leaflet_mesh: TriMesh | None = None
        self.proximal_mesh: TriMesh | None = None
        self._speed: SpeedImage | None = None
        self._roi: np.ndarray | None = None
        self._window: tuple[float, float] | None = None
        self.lock = threading.RLock()

    # -- construction -------------------------------------------------------

    @classmethod
    def from_phantom(cls, spec: PhantomSpec, config: SessionConfig | None = None) -> "Session":
        result = generate_phantom(spec)
        return cls(result.volume, config=config, phantom_spec=spec)

    # -- lazily computed inputs ---------------------------------------------

    @property
    def speed(self) -> SpeedImage:
        if self._speed is None:
            smoothed = gaussian_smooth(self.volume, self.config.smoothing_sigma)
            self._speed = edge_speed(gradient_magnitude(smoothed), self.config.beta)
        return self._speed

    def window(self) -> tuple[float, float]:
        if self._window is None:
            lo, hi = np.percentile(np.asarray(self.volume.data), [1.0, 99.0])
            self._window = (float(lo), float(hi if hi > lo else lo + 1.0))
        return self._window

    def _leaflet_roi(self) -> np.ndarray | None:
        if not self.config.roi_clamp:
            return None
        if self._roi is None:
            self._roi = roi_cylinder_mask(
                self.volume.grid, self.annulus,
                radius_margin=self.config.roi_radius_margin,
                above=self.config.roi_above, below=self.config.roi_below)
        return self._roi

    # -- commands ------------------------------------------------------------

    def set_annulus(self, defn: AnnulusDefinition) -> AnnulusModel:
        with self.lock:
            if self.stage not in (VOLUME_LOADED, ANNULUS_SET, BP_ACTIVE):
                raise StageError(f"annulus can only be (re)set before blood-pool acceptance "
                                 f"(stage is {self.stage})")
            if defn.probe_dir is None:
                # Probe faces decreasing image depth: the negative k axis.
                probe = -self.volume.grid.orientation[:, 2]
                defn = AnnulusDefinition(points=defn.points, probe_dir=probe)
            model = fit_annulus(defn)
            self.annulus_def = defn
            self.annulus = model
            self.bp_snapshots.clear()  # re-set discards any stepped blood pool
            self._roi = None
            self.stage = ANNULUS_SET
            return model

    def step(self, stage_tag: str, iterations: int,
             params: ContourParams | None = None) -> StepSummary:
        with self.lock:
            if iterations < 1:
                raise ValueError(f"iterations must be >= 1, got {iterations}")
            if stage_tag == BLOODPOOL:
                if self.stage not in (ANNULUS_SET, BP_ACTIVE):
                    raise StageError(f"BLOODPOOL step requires ANNULUS_SET or BP_ACTIVE "
                                     f"(stage is {self.stage})")
                stack, roi = self.bp_snapshots, None
                if not stack:
                    current = init_ball(self.volume.grid, self.annulus.centroid,
                                        self.config.seed_radius)
                else:
                    current = stack[-1]
                active_stage = BP_ACTIVE
            elif stage_tag == LEAFLET:
                if self.stage not in (BP_ACCEPTED, LEAFLET_ACTIVE):
                    raise StageError(f"LEAFLET step requires BP_ACCEPTED or LEAFLET_ACTIVE "
                                     f"(stage is {self.stage})")
                stack = self.leaflet_snapshots
                roi = self._leaflet_roi()
                if not stack:
                    current = init_shell(to_mask(self.bp_result), self.config.shell_distance,
                                         annulus=self.annulus, roi=roi)
                else:
                    current = stack[-1]
                active_stage = LEAFLET_ACTIVE
            else:
                raise ValueError(f"unknown stage tag {stage_tag!r}")

            params = params or default_params(stage_tag)
            try:
                new_state = advance(current, self.speed, params, iterations, roi=roi)
            except ContourCollapsedError:
                return StepSummary(stage=self.stage,
                                   iterations_done=current.iterations_done,
                                   inside_volume_mm3=current.inside_volume_mm3(),
                                   status=STATUS_COLLAPSED)
            stack.append(new_state)
            self.stage = active_stage
            return StepSummary(stage=self.stage, iterations_done=new_state.iterations_done,
                               inside_volume_mm3=new_state.inside_volume_mm3())

    def undo(self) -> StepSummary:
        with self.lock:
            if self.stage == BP_ACTIVE:
                self.bp_snapshots.pop()
                if not self.bp_snapshots:
                    self.stage = ANNULUS_SET
                    return StepSummary(stage=self.stage, iterations_done=0, inside_volume_mm3=0.0)
                top = self.bp_snapshots[-1]
            elif self.stage == LEAFLET_ACTIVE:
                self.leaflet_snapshots.pop()
                if not self.leaflet_snapshots:
                    self.stage = BP_ACCEPTED
                    return StepSummary(stage=self.stage, iterations_done=0, inside_volume_mm3=0.0)
                top = self.leaflet_snapshots[-1]
            else:
                raise StageError(f"nothing to undo in stage {self.stage}")
            return StepSummary(stage=self.stage, iterations_done=top.iterations_done,
                               inside_volume_mm3=top.inside_volume_mm3())

    def accept_stage(self, stage_tag: str) -> str:
        with self.lock:
            if stage_tag == BLOODPOOL:
                if self.stage != BP_ACTIVE or not self.bp_snapshots:
                    raise StageError(f"cannot accept blood pool in stage {self.stage}")
                self.bp_result = self.bp_snapshots[-1]
                self.stage = BP_ACCEPTED
            elif stage_tag == LEAFLET:
                if self.stage != LEAFLET_ACTIVE or not self.leaflet_snapshots:
                    raise StageError(f"cannot accept leaflet in stage {self.stage}")
                self.leaflet_result = self.leaflet_snapshots[-1]
                self.stage = LEAFLET_ACCEPTED
            else:
                raise ValueError(f"unknown stage tag {stage_tag!r}")
            return self.stage

    def extract_surface(self) -> dict:
        with self.lock:
            if self.stage == SURFACE_READY:
                return self.surface_summary()
            if self.stage != LEAFLET_ACCEPTED:
                raise StageError(f"surface extraction requires LEAFLET_ACCEPTED "
                                 f"(stage is {self.stage})")
            self.leaflet_mesh = marching_cubes(self.leaflet_result)
            self.bp_mesh = marching_cubes(self.bp_result)
            eps = 0.25 * self.volume.grid.h_min
            self.proximal_mesh = extract_proximal(self.leaflet_mesh, self.bp_mesh,
                                                  self.annulus, eps=eps)
            self.stage = SURFACE_READY
            return self.surface_summary()

    def surface_summary(self) -> dict:
        return {
            "leaflet_mesh": {"vertices": self.leaflet_mesh.n_vertices,
                             "triangles": self.leaflet_mesh.n_triangles},
            "bloodpool_mesh": {"vertices": self.bp_mesh.n_vertices,
                               "triangles": self.bp_mesh.n_triangles},
            "proximal_mesh": {"vertices": self.proximal_mesh.n_vertices,
                              "triangles": self.proximal_mesh.n_triangles},
        }

    def export(self, what: str, fmt_ext: str) -> tuple[bytes, str]:
        """Export an artifact; returns (payload, media type)."""
        with self.lock:
            if what == "BP_MASK":
                if self.bp_result is None:
                    raise StageError("no accepted blood-pool result to export")
                return nrrd_bytes(to_mask(self.bp_result)), "application/octet-stream"
            if what == "LEAFLET_MASK":
                if self.leaflet_result is None:
                    raise StageError("no accepted leaflet result to export")
                return nrrd_bytes(to_mask(self.leaflet_result)), "application/octet-stream"
            if what in ("LEAFLET_MESH", "PROXIMAL_MESH"):
                mesh = self.leaflet_mesh if what == "LEAFLET_MESH" else self.proximal_mesh
                if mesh is None:
                    raise StageError(f"no {what} yet; run surface extraction first")
                fmt = format_for_extension(fmt_ext)
                payload = stl_binary_bytes(mesh) if fmt == STL_BINARY else ply_ascii_bytes(mesh)
                return payload, "model/stl" if fmt == STL_BINARY else "text/plain"
            raise ValueError(f"unknown export kind {what!r}; expected one of {EXPORT_KINDS}")

    # -- introspection -------------------------------------------------------

    def current_state(self) -> LevelSetState | None:
        """Most recent level-set snapshot for display (stage-local)."""
        if self.stage in (LEAFLET_ACTIVE, LEAFLET_ACCEPTED, SURFACE_READY):
            if self.leaflet_snapshots:
                return self.leaflet_snapshots[-1]
            return self.leaflet_result
        if self.leaflet_result is not None:
            return self.leaflet_result
        if self.bp_snapshots:
            return self.bp_snapshots[-1]
        return self.bp_result

    def previous_state(self) -> LevelSetState | None:
        if self.stage in (LEAFLET_ACTIVE,) and len(self.leaflet_snapshots) > 1:
            return self.leaflet_snapshots[-2]
        if self.stage in (BP_ACTIVE,) and len(self.bp_snapshots) > 1:
            return self.bp_snapshots[-2]
        return None

    def summary(self) -> dict:
        grid = self.volume.grid
        doc = {
            "id": self.id,
            "stage": self.stage,
            "dims": list(grid.dims),
            "spacing": list(grid.spacing),
            "origin": grid.origin.tolist(),
            "orientation": grid.orientation.tolist(),
            "config": self.config.to_dict(),
            "bp_snapshots": len(self.bp_snapshots),
            "leaflet_snapshots": len(self.leaflet_snapshots),
        }
        if self.annulus is not None:
            doc["annulus"] = annulus_summary(self.annulus)
        cur = self.current_state()
        if cur is not None:
            doc["inside_volume_mm3"] = cur.inside_volume_mm3()
            doc["iterations_done"] = cur.iterations_done
        if self.stage == SURFACE_READY:
            doc["surfaces"] = self.surface_summary()
        return doc

    def state_checksum(self) -> str | None:
        """Checksum of the current phi field; lets clients verify undo restores state."""
        cur = self.current_state()
        if cur is None:
            return None
        import hashlib
        return hashlib.sha256(cur.phi.tobytes()).hexdigest()

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        """Persist the whole session as a zip of NRRDs plus a JSON manifest."""
        with self.lock, zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            manifest = {
                "id": self.id,
                "stage": self.stage,
                "config": self.config.to_dict(),
                "bp_snapshots": [s.iterations_done for s in self.bp_snapshots],
                "leaflet_snapshots": [s.iterations_done for s in self.leaflet_snapshots],
                "bp_dts": [s.dt for s in self.bp_snapshots],
                "leaflet_dts": [s.dt for s in self.leaflet_snapshots],
                "band_width": (self.bp_snapshots or self.leaflet_snapshots)[-1].band_width
                if (self.bp_snapshots or self.leaflet_snapshots) else None,
                "has_bp_result": self.bp_result is not None,
                "has_leaflet_result": self.leaflet_result is not None,
            }
            if self.annulus_def is not None:
                manifest["annulus_points"] = self.annulus_def.points.tolist()
                manifest["probe_dir"] = self.annulus_def.probe_dir.tolist()
            if self.phantom_spec is not None:
                manifest["phantom_spec"] = self.phantom_spec.to_dict()
            zf.writestr("manifest.json", json.dumps(manifest, indent=1))
            zf.writestr("volume.nrrd", nrrd_bytes(self.volume))
            for name, states in (("bp", self.bp_snapshots), ("leaflet", self.leaflet_snapshots)):
                for n, st in enumerate(states):
                    zf.writestr(f"{name}_{n:03d}.nrrd",
                                nrrd_bytes(Volume3D(st.grid, st.phi)))
            if self.bp_result is not None:
                zf.writestr("bp_result.nrrd", nrrd_bytes(Volume3D(self.bp_result.grid,
                                                                  self.bp_result.phi)))
            if self.leaflet_result is not None:
                zf.writestr("leaflet_result.nrrd",
                            nrrd_bytes(Volume3D(self.leaflet_result.grid,
                                                self.leaflet_result.phi)))

    @classmethod
    def load(cls, path) -> "Session":
        from .nrrd_io import load_nrrd_bytes

        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            volume = load_nrrd_bytes(zf.read("volume.nrrd"))
            cfg_doc = manifest["config"]
            session = cls(volume, config=SessionConfig(**cfg_doc), session_id=manifest["id"])
            if manifest.get("phantom_spec"):
                session.phantom_spec = PhantomSpec.from_dict(manifest["phantom_spec"])
            if "annulus_points" in manifest:
                session.set_annulus(AnnulusDefinition(
                    points=np.asarray(manifest["annulus_points"]),
                    probe_dir=np.asarray(manifest["probe_dir"])))
            band = manifest.get("band_width") or levelset.default_band_width(volume.grid)

            def read_state(name, iters, dt):
                vol = load_nrrd_bytes(zf.read(name))
                return LevelSetState(vol.grid, vol.data, band_width=band,
                                     iterations_done=iters, dt=dt)

            for n, (iters, dt) in enumerate(zip(manifest["bp_snapshots"], manifest["bp_dts"])):
                session.bp_snapshots.append(read_state(f"bp_{n:03d}.nrrd", iters, dt))
            for n, (iters, dt) in enumerate(zip(manifest["leaflet_snapshots"],
                                                manifest["leaflet_dts"])):
                session.leaflet_snapshots.append(read_state(f"leaflet_{n:03d}.nrrd", iters, dt))
            if manifest["has_bp_result"]:
                vol = load_nrrd_bytes(zf.read("bp_result.nrrd"))
                session.bp_result = LevelSetState(vol.grid, vol.data, band_width=band)
            if manifest["has_leaflet_result"]:
                vol = load_nrrd_bytes(zf.read("leaflet_result.nrrd"))
                session.leaflet_result = LevelSetState(vol.grid, vol.data, band_width=band)
            session.stage = manifest["stage"]
            if session.stage == SURFACE_READY:  # meshes are cheap to rebuild
                session.stage = LEAFLET_ACCEPTED
                session.extract_surface()
        return session


def annulus_summary(model: AnnulusModel) -> dict:
    return {
        "centroid": model.centroid.tolist(),
        "plane_normal": model.plane_normal.tolist(),
        "plane_offset": model.plane_offset,
        "probe_dir": model.probe_dir.tolist(),
        "max_radius": model.max_radius,
        "samples": model.samples.tolist(),
    }


class SessionStore:
    """In-memory registry of sessions keyed by id."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session
