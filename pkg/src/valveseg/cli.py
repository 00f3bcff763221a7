"""Command-line entry points: segment, evaluate, phantom, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .annulus import read_annulus_json, write_annulus_json
from .config import build_config
from .errors import ValveSegError
from .nrrd_io import load_mask, load_nrrd, save_nrrd
from .phantom import PhantomSpec, generate_phantom


def _add_common_config(p):
    p.add_argument("--config", help="TOML or JSON config file")
    p.add_argument("--threads", type=int, help="worker thread count (deterministic output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valveseg",
                                     description="Two-stage active-contour valve segmentation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="run both stages headlessly with fixed budgets")
    seg.add_argument("--input", help="input volume (NRRD)")
    seg.add_argument("--annulus", help="annulus points JSON")
    seg.add_argument("--out", help="output directory")
    seg.add_argument("--bp-iters", type=int, dest="bp_iters")
    seg.add_argument("--leaflet-iters", type=int, dest="leaflet_iters")
    seg.add_argument("--format", choices=("stl", "ply"))
    seg.add_argument("--seed-radius", type=float, dest="seed_radius")
    seg.add_argument("--shell-mm", type=float, dest="shell_mm")
    seg.add_argument("--sigma", type=float)
    seg.add_argument("--beta", help="'auto' or a positive per-mm value")
    seg.add_argument("--roi-clamp", action="store_const", const=True, dest="roi_clamp")
    seg.add_argument("--dump-phi", action="store_const", const=True, dest="dump_phi")
    _add_common_config(seg)

    ev = sub.add_parser("evaluate", help="surface-distance / overlap metrics")
    ev.add_argument("--pred", required=True, help="predicted mesh (.stl/.ply) or mask (.nrrd)")
    ev.add_argument("--gt", required=True, help="ground-truth mesh or mask")
    ev.add_argument("--out", help="write the JSON report here")

    ph = sub.add_parser("phantom", help="generate a synthetic phantom with ground truth")
    ph.add_argument("--out", default="phantom_out")
    ph.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"))
    ph.add_argument("--spacing", type=float, nargs=3, metavar=("SX", "SY", "SZ"))
    ph.add_argument("--atrium-radius", type=float, dest="atrium_radius")
    ph.add_argument("--leaflet-thickness", type=float, dest="leaflet_thickness")
    ph.add_argument("--coverage", type=float, dest="leaflet_coverage")
    ph.add_argument("--bowl-depth-frac", type=float, dest="bowl_depth_frac")
    ph.add_argument("--intensities", type=float, nargs=2, metavar=("BLOOD", "TISSUE"))
    ph.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    ph.add_argument("--seed", type=int, dest="rng_seed")

    sv = sub.add_parser("serve", help="run the HTTP session service")
    sv.add_argument("--host")
    sv.add_argument("--port", type=int)
    _add_common_config(sv)
    return parser


def cmd_segment(args) -> int:
    cli_values = {k: getattr(args, k) for k in
                  ("input", "annulus", "out", "bp_iters", "leaflet_iters", "format",
                   "seed_radius", "shell_mm", "sigma", "beta", "roi_clamp", "dump_phi",
                   "threads")}
    try:
        cfg = build_config(cli_values, config_path=args.config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not cfg.input or not cfg.annulus:
        print("error: --input and --annulus are required", file=sys.stderr)
        return 2
    for label, path in (("input", cfg.input), ("annulus", cfg.annulus)):
        if not Path(path).exists():
            print(f"error: {label} file not found: {path}", file=sys.stderr)
            return 2
    from .pipeline import PipelineError, run_segmentation

    try:
        volume = load_nrrd(cfg.input)
        annulus_def = read_annulus_json(cfg.annulus)
        manifest = run_segmentation(volume, annulus_def, cfg)
    except PipelineError as exc:
        print(f"segmentation failed at stage {exc.stage}: {exc}", file=sys.stderr)
        return 3
    except ValveSegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"out": cfg.out, "timings_s": manifest["timings_s"],
                      "surfaces": manifest["surfaces"]}, indent=1))
    return 0


def _kind(path: str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".nrrd":
        return "mask"
    if suffix in (".stl", ".ply"):
        return "mesh"
    raise ValueError(f"cannot infer input kind from {path!r} (use .nrrd, .stl or .ply)")


def cmd_evaluate(args) -> int:
    from .mesh import load_ply, load_stl
    from .metrics import dice, masd

    try:
        kinds = (_kind(args.pred), _kind(args.gt))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if kinds[0] != kinds[1]:
        print("error: cannot mix a mesh with a mask; pass two meshes or two masks",
              file=sys.stderr)
        return 2
    for path in (args.pred, args.gt):
        if not Path(path).exists():
            print(f"error: file not found: {path}", file=sys.stderr)
            return 2

    def load_mesh(path):
        return load_stl(path) if Path(path).suffix.lower() == ".stl" else load_ply(path)

    try:
        if kinds[0] == "mesh":
            report = masd(load_mesh(args.pred), load_mesh(args.gt))
            doc = json.loads(report.to_json())
        else:
            doc = {"dice": dice(load_mask(args.pred), load_mask(args.gt))}
    except ValveSegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    text = json.dumps(doc, indent=1)
    print(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_phantom(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("dims", "spacing", "atrium_radius", "leaflet_thickness", "leaflet_coverage",
                  "bowl_depth_frac", "intensities", "noise_sigma", "rng_seed")
                 if getattr(args, k) is not None}
    for key in ("dims", "spacing", "intensities"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    try:
        spec = PhantomSpec(**overrides)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = generate_phantom(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_nrrd(result.volume, out / "volume.nrrd")
    save_nrrd(result.gt_bloodpool, out / "gt_bloodpool.nrrd")
    save_nrrd(result.gt_leaflet, out / "gt_leaflet.nrrd")
    write_annulus_json(result.annulus, out / "annulus.json")
    (out / "phantom_spec.json").write_text(json.dumps(spec.to_dict(), indent=1))
    print(json.dumps({"out": str(out), "spec": spec.to_dict()}, indent=1))
    return 0


def cmd_serve(args) -> int:
    cli_values = {"host": args.host, "port": args.port, "threads": args.threads}
    try:
        cfg = build_config(cli_values, config_path=args.config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cfg.threads:
        import numba

        numba.set_num_threads(cfg.threads)
    import uvicorn

    from .service.app import create_app

    try:
        uvicorn.run(create_app(), host=cfg.host, port=cfg.port, log_level="warning")
    except SystemExit:
        raise
    except OSError as exc:
        print(f"error: cannot bind {cfg.host}:{cfg.port}: {exc}", file=sys.stderr)
        return 4
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"segment": cmd_segment, "evaluate": cmd_evaluate,
               "phantom": cmd_phantom, "serve": cmd_serve}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
