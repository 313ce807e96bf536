"""Command-line front end: design, analyze, apply, synth, eval, grid-info.

Configuration comes from an optional JSON file with flag overrides; every
emitted CSV carries a header row and a comment line with the hash of the
effective configuration, so runs are reproducible byte-for-byte given the
same inputs and seed.

Exit codes: 0 ok, 2 config error, 3 data-format error, 4 numerical error.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import sys

import numpy as np

from .analysis import (
    beampattern,
    directivity_index,
    normalize_db,
    wng_curve,
    wng_curve_fir,
    write_beampattern_csv,
    write_curve_csv,
)
from .desired import build_desired_1d, build_desired_2d, write_desired_csv
from .dsp import SceneSource, SceneSpec, filter_and_sum, render_scene, speech_shaped_noise
from .errors import FeasibilityError, FormatError, NumericalError
from .fir import load_filters, save_filters, synthesize_fir
from .geometry import Direction, load_geometry, load_geometry_csv, make_uniform_grid, save_grid
from .metrics import FilterBank, FwSegSnrParams, eval_scenario, write_report_csv, write_summary_csv
from .dsp import AudioBuffer
from .solver import DesignConfig, design_broadband, load_design, save_design
from .steering import FrequencyGrid, free_field_steering, hrtf_steering, load_hrtf_dataset
from .wavio import read_wav, write_wav

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_NUMERICAL = 4


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _parse_pair(text, name):
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"{name} must be two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _merge_config(defaults, config_path, overrides):
    cfg = dict(defaults)
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must contain a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def _load_array_geometry(path):
    if path.endswith(".csv"):
        return load_geometry_csv(path)
    return load_geometry(path)


def _build_steering(cfg, freqs):
    """Returns (steering set, geometry, hrtf dataset or None)."""
    free_field = bool(cfg["free_field"])
    hrtf_path = cfg["hrtf"]
    if free_field == (hrtf_path is not None):
        raise ValueError("exactly one of free_field / hrtf must be selected")
    if free_field:
        if cfg["geometry"] is None:
            raise ValueError("free-field steering requires a geometry file")
        geom = _load_array_geometry(cfg["geometry"])
        grid = make_uniform_grid(cfg["az_step_deg"], cfg["el_step_deg"], include_poles=True)
        steer = free_field_steering(geom, grid, freqs, c=cfg["speed_of_sound"])
        return steer, geom, None
    ds = load_hrtf_dataset(hrtf_path)
    return hrtf_steering(ds, freqs), ds.geometry, ds


_DESIGN_DEFAULTS = {
    "free_field": False,
    "geometry": None,
    "hrtf": None,
    "speed_of_sound": 343.0,
    "az_step_deg": 5.0,
    "el_step_deg": 5.0,
    "gamma_db": -20.0,
    "look_deg": [90.0, 90.0],
    "beamwidth_3db_deg": 20.0,
    "num_taps": 1024,
    "sample_rate_hz": 16000.0,
    "mode": "2d",
    "ring_elevation_deg": None,
    "design_band_hz": [300.0, 5000.0],
}


def cmd_design(args):
    over = {
        "free_field": True if args.free_field else None,
        "geometry": args.geometry,
        "hrtf": args.hrtf,
        "gamma_db": args.gamma_db,
        "look_deg": list(_parse_pair(args.look, "--look")) if args.look else None,
        "beamwidth_3db_deg": args.beamwidth,
        "num_taps": args.taps,
        "sample_rate_hz": args.fs,
        "mode": args.mode,
        "az_step_deg": args.az_step,
        "el_step_deg": args.el_step,
    }
    cfg = _merge_config(_DESIGN_DEFAULTS, args.config, over)
    digest = config_hash(cfg)
    os.makedirs(args.out, exist_ok=True)

    look = Direction(*cfg["look_deg"])
    design_cfg = DesignConfig(
        gamma_db=cfg["gamma_db"],
        look=look,
        beamwidth_3db=cfg["beamwidth_3db_deg"],
        num_taps=int(cfg["num_taps"]),
        sample_rate=cfg["sample_rate_hz"],
        design_band=tuple(cfg["design_band_hz"]),
    )
    steer, _, _ = _build_steering(cfg, design_cfg.frequency_grid)

    if cfg["mode"] == "2d":
        desired = build_desired_2d(steer.grid, look, design_cfg.beamwidth_3db)
    elif cfg["mode"] == "1d":
        elevation = cfg["ring_elevation_deg"]
        elevation = look.elevation if elevation is None else float(elevation)
        desired = build_desired_1d(cfg["az_step_deg"], elevation, look, design_cfg.beamwidth_3db)
    else:
        raise ValueError(f"unknown desired-response mode {cfg['mode']!r}")

    fd = design_broadband(steer, desired, design_cfg)
    for diag in fd.diagnostics:
        if diag.clamped:
            print(
                f"warning: bin at {diag.frequency_hz:.1f} Hz: gamma clamped to "
                f"{10*math.log10(diag.gamma_used):.3f} dB (feasible max "
                f"{10*math.log10(diag.gamma_max):.3f} dB)",
                file=sys.stderr,
            )
    bf = synthesize_fir(fd)

    save_design(fd, os.path.join(args.out, "design.json"))
    save_filters(bf, os.path.join(args.out, "filters.json"), look=look, gamma_db=cfg["gamma_db"])
    write_desired_csv(desired, os.path.join(args.out, "desired_response.csv"), config_hash=digest)
    _write_diagnostics_csv(os.path.join(args.out, "design_diagnostics.csv"), fd, digest)
    print(f"design written to {args.out} (config hash {digest[:16]})")
    return EXIT_OK


def _write_diagnostics_csv(path, fd, digest):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config-hash: {digest}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "bin",
                "f_hz",
                "residual",
                "wng_db",
                "lambda",
                "gamma_used",
                "gamma_max",
                "clamped",
                "distortionless_error",
                "stationarity_residual",
            ]
        )
        for q, diag in enumerate(fd.diagnostics):
            writer.writerow(
                [
                    q,
                    f"{diag.frequency_hz:.6f}",
                    f"{diag.residual:.9g}",
                    f"{diag.wng_db:.9g}",
                    f"{diag.lambda_reg:.9g}",
                    f"{diag.gamma_used:.9g}",
                    f"{diag.gamma_max:.9g}",
                    int(diag.clamped),
                    f"{diag.distortionless_error:.3g}",
                    f"{diag.stationarity_residual:.3g}",
                ]
            )


_ANALYZE_DEFAULTS = {
    "free_field": False,
    "geometry": None,
    "hrtf": None,
    "speed_of_sound": 343.0,
    "az_step_deg": 5.0,
    "el_step_deg": 5.0,
    "band_hz": [300.0, 5000.0],
    "normalization": "global",
    "plane_elevation_deg": 90.0,
}


def cmd_analyze(args):
    over = {
        "free_field": True if args.free_field else None,
        "geometry": args.geometry,
        "hrtf": args.hrtf,
        "band_hz": list(_parse_pair(args.band, "--band")) if args.band else None,
        "normalization": args.normalization,
        "az_step_deg": args.az_step,
        "el_step_deg": args.el_step,
    }
    cfg = _merge_config(_ANALYZE_DEFAULTS, args.config, over)
    digest = config_hash({**cfg, "design": os.path.basename(args.design)})
    os.makedirs(args.out, exist_ok=True)

    fd = load_design(args.design)
    steer, _, _ = _build_steering(cfg, fd.freqs)
    bf = synthesize_fir(fd)

    lo, hi = cfg["band_hz"]
    band = fd.freqs.band_bins(lo, hi)
    if band.size == 0:
        raise ValueError(f"analysis band [{lo}, {hi}] contains no DFT bins")

    bp = beampattern(bf, steer, bins=band)
    db_map = normalize_db(
        bp,
        mode=cfg["normalization"],
        plane_elevation=cfg["plane_elevation_deg"] if cfg["normalization"] == "plane" else None,
    )
    write_beampattern_csv(os.path.join(args.out, "beampattern.csv"), bp, db_map, config_hash=digest)

    wng = wng_curve(fd)
    wng_band = _slice_curve(wng, band)
    write_curve_csv(os.path.join(args.out, "wng.csv"), wng_band, config_hash=digest)
    wng_fir = _slice_curve(wng_curve_fir(bf, steer, fd.look), band)
    write_curve_csv(os.path.join(args.out, "wng_fir.csv"), wng_fir, config_hash=digest)

    di = directivity_index(bp, fd.look)
    write_curve_csv(os.path.join(args.out, "di.csv"), di, config_hash=digest)
    print(f"analysis written to {args.out} (config hash {digest[:16]})")
    return EXIT_OK


def _slice_curve(curve, bins):
    from .analysis import CurveReport

    return CurveReport(curve.freqs[bins], curve.values_db[bins], curve.kind)


def _resolve_signal(spec, duration_s, sample_rate):
    kind = spec.get("kind")
    if kind == "speech_noise":
        return speech_shaped_noise(duration_s, sample_rate, int(spec["seed"]))
    if kind == "white_noise":
        rng = np.random.default_rng(int(spec["seed"]))
        return rng.standard_normal(int(round(duration_s * sample_rate)))
    if kind == "tone":
        t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
        return np.sin(2.0 * np.pi * float(spec["freq_hz"]) * t)
    if kind == "wav":
        samples, rate = read_wav(spec["path"])
        if rate != sample_rate:
            raise ValueError(f"{spec['path']}: sample rate {rate} != scene rate {sample_rate}")
        if samples.shape[0] != 1:
            raise ValueError(f"{spec['path']}: scene sources must be mono")
        return samples[0]
    raise ValueError(f"unknown signal kind {kind!r}")


def _load_scene(path, sample_rate, seed_override=None):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    duration = float(doc["duration_s"])
    sources = []
    for rec in doc["sources"]:
        az, el = rec["direction"]
        sources.append(
            SceneSource(
                signal=_resolve_signal(rec["signal"], duration, sample_rate),
                direction=Direction(float(az), float(el)),
                gain_db=float(rec.get("gain_db", 0.0)),
            )
        )
    seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)
    return SceneSpec(
        sources=tuple(sources),
        target_index=int(doc["target_index"]),
        duration_s=duration,
        sensor_noise_snr_db=doc.get("sensor_noise_snr_db"),
        seed=seed,
    ), doc


_SYNTH_DEFAULTS = {
    "free_field": False,
    "geometry": None,
    "hrtf": None,
    "speed_of_sound": 343.0,
    "sample_rate_hz": 16000.0,
}


def cmd_synth(args):
    over = {
        "free_field": True if args.free_field else None,
        "geometry": args.geometry,
        "hrtf": args.hrtf,
        "sample_rate_hz": args.fs,
    }
    cfg = _merge_config(_SYNTH_DEFAULTS, args.config, over)
    os.makedirs(args.out, exist_ok=True)
    fs = cfg["sample_rate_hz"]
    scene, scene_doc = _load_scene(args.scene, fs, seed_override=args.seed)
    digest = config_hash({**cfg, "scene": scene_doc, "seed": scene.seed})

    hrtf = None
    geom = None
    if cfg["hrtf"] is not None:
        if cfg["free_field"]:
            raise ValueError("exactly one of free_field / hrtf must be selected")
        hrtf = load_hrtf_dataset(cfg["hrtf"])
    else:
        if not cfg["free_field"] or cfg["geometry"] is None:
            raise ValueError("free-field synthesis requires --free-field and a geometry file")
        geom = _load_array_geometry(cfg["geometry"])

    render = render_scene(scene, geom, fs, hrtf=hrtf, c=cfg["speed_of_sound"])
    write_wav(os.path.join(args.out, "mix.wav"), render.mix.samples, fs, encoding="float32")
    for i, stem in enumerate(render.stems):
        write_wav(os.path.join(args.out, f"stem_{i:02d}.wav"), stem.samples, fs, encoding="float32")
    meta = {
        "config_hash": digest,
        "bulk_delay_samples": render.bulk_delay_samples,
        "frontmost_index": render.frontmost_index,
        "target_index": render.target_index,
        "num_channels": render.mix.num_channels,
    }
    with open(os.path.join(args.out, "scene_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"scene written to {args.out} (config hash {digest[:16]})")
    return EXIT_OK


def cmd_apply(args):
    bf, _ = load_filters(args.filters)
    samples, rate = read_wav(args.wav)
    if rate != bf.sample_rate:
        raise ValueError(f"wav rate {rate} != filter rate {bf.sample_rate}")
    x = AudioBuffer(rate, samples)
    y = filter_and_sum(bf, x)
    out = args.out_file or "beamformer_output.wav"
    write_wav(out, y.samples, rate, encoding="float32")
    print(f"wrote {out}")
    return EXIT_OK


_EVAL_DEFAULTS = {
    "free_field": True,
    "geometry": None,
    "hrtf": None,
    "speed_of_sound": 343.0,
    "az_step_deg": 5.0,
    "el_step_deg": 5.0,
    "sample_rate_hz": 16000.0,
    "num_taps": 1024,
    "gamma_db": -20.0,
    "beamwidth_3db_deg": 20.0,
    "designs": ["1d", "2d"],
    "target_azimuths_deg": [0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0],
    "target_elevation_deg": 90.0,
    "interferer_azimuths_deg": [15.0, 45.0, 75.0, 105.0, 135.0, 165.0, 195.0],
    "interferer_elevations_deg": [90.0, 73.0],
    "duration_s": 2.0,
    "target_seed": 101,
    "interferer_seed": 202,
    "scene_seed": 5,
    "sensor_noise_snr_db": None,
    "fwsegsnr": {},
}


def cmd_eval(args):
    cfg = _merge_config(_EVAL_DEFAULTS, args.config, {"gamma_db": args.gamma_db})
    if args.seed is not None:
        cfg["scene_seed"] = args.seed
    digest = config_hash(cfg)
    os.makedirs(args.out, exist_ok=True)

    fs = cfg["sample_rate_hz"]
    freqs = FrequencyGrid(fs, int(cfg["num_taps"]))
    steer, geom, hrtf = _build_steering(cfg, freqs)

    looks = [Direction(az, cfg["target_elevation_deg"]) for az in cfg["target_azimuths_deg"]]
    banks = {}
    for mode in cfg["designs"]:
        per_look = {}
        for look in looks:
            design_cfg = DesignConfig(
                gamma_db=cfg["gamma_db"],
                look=look,
                beamwidth_3db=cfg["beamwidth_3db_deg"],
                num_taps=int(cfg["num_taps"]),
                sample_rate=fs,
            )
            if mode == "2d":
                desired = build_desired_2d(steer.grid, look, design_cfg.beamwidth_3db)
            elif mode == "1d":
                desired = build_desired_1d(
                    cfg["az_step_deg"], look.elevation, look, design_cfg.beamwidth_3db
                )
            else:
                raise ValueError(f"unknown design mode {mode!r}")
            per_look[look] = synthesize_fir(design_broadband(steer, desired, design_cfg))
        banks[mode] = FilterBank(per_look)

    target_sig = speech_shaped_noise(cfg["duration_s"], fs, int(cfg["target_seed"]))
    interferer_sig = speech_shaped_noise(cfg["duration_s"], fs, int(cfg["interferer_seed"]))
    scenes = []
    for theta_int in cfg["interferer_elevations_deg"]:
        for look in looks:
            for phi_int in cfg["interferer_azimuths_deg"]:
                scenes.append(
                    SceneSpec(
                        sources=(
                            SceneSource(target_sig, look),
                            SceneSource(interferer_sig, Direction(phi_int % 360.0, theta_int)),
                        ),
                        target_index=0,
                        duration_s=cfg["duration_s"],
                        sensor_noise_snr_db=cfg["sensor_noise_snr_db"],
                        seed=int(cfg["scene_seed"]),
                    )
                )

    params = FwSegSnrParams(**cfg["fwsegsnr"]) if cfg["fwsegsnr"] else None
    report = eval_scenario(banks, scenes, geom, fs, params=params, hrtf=hrtf)
    write_report_csv(os.path.join(args.out, "report.csv"), report, config_hash=digest)
    write_summary_csv(os.path.join(args.out, "summary.csv"), report, config_hash=digest)
    print(f"evaluated {len(scenes)} scenes; report written to {args.out} (config hash {digest[:16]})")
    return EXIT_OK


def cmd_grid_info(args):
    grid = make_uniform_grid(args.az_step, args.el_step, include_poles=not args.no_poles)
    print(f"directions: {grid.size}")
    print(f"weight sum: {grid.weights.sum():.9f} (4*pi = {4*math.pi:.9f})")
    print(f"elevation range: {grid.elevations.min():.1f} .. {grid.elevations.max():.1f}")
    if args.out:
        save_grid(grid, args.out)
        print(f"grid written to {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rlsfi",
        description="Design and evaluate robust frequency-invariant beamformers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="solve the broadband design and synthesize FIR filters")
    _add_steering_flags(p)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--gamma-db", type=float, dest="gamma_db", help="WNG floor, dB")
    p.add_argument("--look", help="look direction az,el in degrees")
    p.add_argument("--beamwidth", type=float, help="3-dB beamwidth, degrees")
    p.add_argument("--taps", type=int, help="FIR length L")
    p.add_argument("--fs", type=float, help="sample rate, Hz")
    p.add_argument("--mode", choices=["1d", "2d"], help="desired-response mode")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("analyze", help="beampattern, WNG, and DI data files for a design")
    _add_steering_flags(p)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--design", required=True, help="design file from the design command")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--band", help="analysis band lo,hi in Hz")
    p.add_argument("--normalization", choices=["global", "plane"], help="dB reference")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="render a scene file to multichannel WAV")
    _add_steering_flags(p, with_steps=False)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--fs", type=float, help="sample rate, Hz")
    p.add_argument("--seed", type=int, help="override the scene noise seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("apply", help="run filters over a multichannel WAV")
    p.add_argument("--filters", required=True, help="filter file from the design command")
    p.add_argument("--wav", required=True, help="input multichannel WAV")
    p.add_argument("--out-file", dest="out_file", help="output WAV path")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("eval", help="run the two-speaker scenario matrix")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--gamma-db", type=float, dest="gamma_db", help="WNG floor, dB")
    p.add_argument("--seed", type=int, help="override the scene noise seed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid-info", help="print a uniform grid summary")
    p.add_argument("--az-step", type=float, default=5.0)
    p.add_argument("--el-step", type=float, default=5.0)
    p.add_argument("--no-poles", action="store_true")
    p.add_argument("--out", help="write the grid JSON here")
    p.set_defaults(func=cmd_grid_info)
    return parser


def _add_steering_flags(p, with_steps=True):
    p.add_argument("--free-field", action="store_true", dest="free_field")
    p.add_argument("--geometry", help="geometry JSON or CSV file")
    p.add_argument("--hrtf", help="HRTF dataset manifest")
    if with_steps:
        p.add_argument("--az-step", type=float, dest="az_step")
        p.add_argument("--el-step", type=float, dest="el_step")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (FeasibilityError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
