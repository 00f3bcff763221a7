"""Sweep free phantom/pipeline knobs against the pinned e2e acceptance gates.

Pinned by acceptance: dims 96^3, spacing 0.45, leaflet 1.5, noise 8, budgets
300/200, stage params 1.2/1.0/0.9 and 0.9/0.1/-0.4, shell 5 mm, sigma 1 mm.
Free: atrium_radius, bowl_depth_frac, beta, seed_radius, roi clamp geometry.
"""
import json
import sys
import time

import numpy as np

from valveseg.annulus import AnnulusDefinition
from valveseg.config import RunConfig
from valveseg.levelset import BLOODPOOL, LEAFLET
from valveseg.mesh import marching_cubes
from valveseg.metrics import dice, masd
from valveseg.nrrd_io import load_mask
from valveseg.phantom import PhantomSpec, generate_phantom, gt_atrial_surface_mesh, gt_leaflet_mesh
from valveseg.session import Session, SessionConfig
from valveseg.levelset import to_mask


def run_case(atrium_radius, bowl_depth_frac, beta, seed_radius, roi_clamp,
             roi_above=1.5, bp_iters=300, leaflet_iters=200, coverage=1.0):
    spec = PhantomSpec(atrium_radius=atrium_radius, bowl_depth_frac=bowl_depth_frac,
                       leaflet_coverage=coverage)
    result = generate_phantom(spec)
    cfg = SessionConfig(seed_radius=seed_radius, beta=beta, roi_clamp=roi_clamp,
                        roi_above=roi_above)
    session = Session(result.volume, config=cfg)
    session.set_annulus(result.annulus)
    t0 = time.time()
    s1 = session.step(BLOODPOOL, bp_iters)
    t_bp = time.time() - t0
    if s1.status != "OK":
        return {"fail": f"BP collapsed", "t_bp": t_bp}
    session.accept_stage(BLOODPOOL)
    t0 = time.time()
    s2 = session.step(LEAFLET, leaflet_iters)
    t_lf = time.time() - t0
    if s2.status != "OK":
        return {"fail": "leaflet collapsed", "t_bp": t_bp, "t_lf": t_lf}
    session.accept_stage(LEAFLET)
    t0 = time.time()
    session.extract_surface()
    t_surf = time.time() - t0

    bp_dice = dice(to_mask(session.bp_result), result.gt_bloodpool)
    gt_lf_mesh = gt_leaflet_mesh(result)
    lf_masd = masd(session.leaflet_mesh, gt_lf_mesh).masd
    gt_atrial = gt_atrial_surface_mesh(result)
    prox_masd = masd(session.proximal_mesh, gt_atrial).masd
    return {
        "dice_bp": round(bp_dice, 4),
        "leaflet_masd": round(lf_masd, 3),
        "proximal_masd": round(prox_masd, 3),
        "t_bp": round(t_bp, 1), "t_lf": round(t_lf, 1), "t_surf": round(t_surf, 1),
        "beta_used": session.speed.beta,
        "bp_vol": s1.inside_volume_mm3, "gt_bp_vol": result.gt_bloodpool.volume_mm3(),
        "lf_vol": s2.inside_volume_mm3, "gt_lf_vol": result.gt_leaflet.volume_mm3(),
    }


if __name__ == "__main__":
    cases = json.loads(sys.argv[1]) if len(sys.argv) > 1 else [
        dict(atrium_radius=8.3, bowl_depth_frac=0.72, beta="auto", seed_radius=5.0,
             roi_clamp=False),
    ]
    for case in cases:
        t0 = time.time()
        out = run_case(**case)
        out["t_total"] = round(time.time() - t0, 1)
        print(json.dumps({"case": case, "result": out}))
