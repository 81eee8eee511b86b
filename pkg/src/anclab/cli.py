"""Command-line entry point: ``anclab synth | denoise | compare | beamform``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, experiments, filters
from .audio_io import AudioClip, read_wav, write_wav
from .beamforming import (
    ArrayGeometry,
    array_snr_gain,
    delay_and_sum,
    filter_and_sum_adaptive,
    max_spacing,
    steering_delays,
)
from .config import Config
from .errors import AncError, ConfigError, FormatError, NumericError
from .metaheuristics import JayaParams, PsoParams, SaParams
from .metrics import bench_runtime, evaluate_denoise, write_csv
from .pipeline import run_stream
from .synth import SCENARIO_FILES, ScenarioSpec, load_scenario, synth_scenario, write_scenario

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
WAV_BITS = 24


class InputError(AncError):
    """Missing or inconsistent input files (exit code 3)."""


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def _params_str(d: dict) -> str:
    return ";".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}" for k, v in d.items())


def _load_config(path) -> Config:
    if path is None:
        return Config()
    try:
        return Config.load(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


def _scenario_id(directory) -> str:
    with open(os.path.join(directory, "primary.wav"), "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:12]


def _require_scenario(directory):
    missing = [f for f in SCENARIO_FILES if not os.path.isfile(os.path.join(directory, f))]
    if missing:
        raise InputError(f"scenario directory {directory!r} is missing {', '.join(missing)}")
    return load_scenario(directory)


def _write_manifest(out_dir, argv, cfg: Config, seeds: dict, outputs: list[str]) -> str:
    path = os.path.join(out_dir, "manifest.json")
    files = sorted(os.path.relpath(p, out_dir) for p in outputs) + ["manifest.json"]
    manifest = {
        "command": list(argv),
        "config": dict(sorted(cfg.values.items())),
        "seeds": seeds,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": files,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_synth(args, argv) -> int:
    cfg = _load_config(args.config)
    spec = ScenarioSpec.from_config(cfg, seed=args.seed)
    scenario = synth_scenario(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = write_scenario(args.out_dir, scenario, WAV_BITS)
    _write_manifest(args.out_dir, argv, cfg, {"scenario": spec.seed}, outputs)
    print(f"wrote scenario to {args.out_dir} (snr_in {scenario.snr_in:.2f} dB)")
    return EXIT_OK


def _filter_config(cfg: Config, kind: str) -> filters.FilterConfig:
    base = filters.FilterConfig.from_config(cfg)
    fc = experiments.config_for(kind, base, cfg.get_float("filter.mu") if "filter.mu" in cfg else None)
    try:
        fc.validate(kind)
    except ConfigError as exc:
        raise ConfigError(exc.message, key=exc.key, line=cfg.lines.get(exc.key)) from None
    return fc


def cmd_denoise(args, argv) -> int:
    cfg = _load_config(args.config)
    kind = filters.normalize_kind(args.algo)
    fc = _filter_config(cfg, kind)
    warmup = cfg.get_float("eval.warmup", 0.25)
    cfg.check("eval.warmup", 0 <= warmup < 1, "must be in [0, 1)")
    scenario = _require_scenario(args.scenario_dir)
    if len(scenario) < 2 * fc.block_size:
        raise InputError("scenario shorter than two blocks")

    result = run_stream(scenario, kind, fc, mode="threaded", paced=args.paced)
    report = evaluate_denoise(scenario, result.e, warmup)

    os.makedirs(args.out_dir, exist_ok=True)
    out_wav = os.path.join(args.out_dir, "output.wav")
    write_wav(out_wav, result.output, WAV_BITS)

    header = ["scenario_id", "algorithm", "num_taps", "block_size", "mu", "snr_in", "snr_out",
              "improvement", "segmental_snr_in", "segmental_snr_out", "warmup_samples",
              "padded_samples"]
    row = [_scenario_id(args.scenario_dir), kind, fc.num_taps, fc.block_size, fc.mu,
           report.snr_in, report.snr_out, report.improvement, report.segmental_in,
           report.segmental_out, report.warmup_samples, result.padded_samples]
    if kind == "LMS_Q15":
        header.append("saturations")
        row.append(result.state.saturations)
    eval_csv = os.path.join(args.out_dir, "eval.csv")
    write_csv(eval_csv, header, [[_fmt(v) if not isinstance(v, str) else v for v in row]])

    deadline_csv = os.path.join(args.out_dir, "deadline.csv")
    result.deadline.write_csv(deadline_csv)
    weights_csv = os.path.join(args.out_dir, "weights.csv")
    filters.write_weights_csv(weights_csv, result.state.weights)

    _write_manifest(args.out_dir, argv, cfg, {}, [out_wav, eval_csv, deadline_csv, weights_csv])
    print(f"{kind}: improvement {report.improvement:.2f} dB, "
          f"{result.deadline.overruns} overruns, headroom {result.deadline.headroom:.1f}x")
    return EXIT_OK


def _optimizer_params(cfg: Config, seed: int) -> dict:
    pso = PsoParams(
        swarm_size=cfg.get_int("pso.swarm_size", 30), iterations=cfg.get_int("pso.iterations", 200),
        w=cfg.get_float("pso.w", 0.7), c1=cfg.get_float("pso.c1", 0.9),
        c2=cfg.get_float("pso.c2", 0.9), bounds=cfg.get_float("pso.bounds", 1.0), seed=seed,
    )
    jaya = JayaParams(
        population=cfg.get_int("jaya.population", 20),
        iterations=cfg.get_int("jaya.iterations", 300),
        bounds=cfg.get_float("jaya.bounds", 1.0), seed=seed,
    )
    sa = SaParams(
        alpha=cfg.get_float("sa.alpha", 0.95), steps_per_temp=cfg.get_int("sa.steps_per_temp", 50),
        perturb_scale=cfg.get_float("sa.perturb_scale", 0.05),
        bounds=cfg.get_float("sa.bounds", 1.0), seed=seed,
    )
    return {"PSO": pso, "JAYA": jaya, "SA": sa}


def cmd_compare(args, argv) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get_int("compare.seed", 0)
    configs = {k: _filter_config(cfg, k) for k in experiments.STREAMING_ORDER}
    opt_taps = cfg.get_int("compare.opt_taps", 16)
    opt_window = cfg.get_int("compare.opt_window", 48_000)
    reps = cfg.get_int("compare.repetitions", 5)
    cfg.check("compare.repetitions", reps >= 3, "must be >= 3")
    lc_block = cfg.get_int("compare.learning_block", 256)
    lc_window = cfg.get_int("compare.learning_window", 1)
    opt_params = _optimizer_params(cfg, seed)

    scenario = _require_scenario(args.scenario_dir)
    sid = _scenario_id(args.scenario_dir)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = []

    snr_rows, summary = [], {}
    for kind in experiments.STREAMING_ORDER:
        fc = configs[kind]
        try:
            e = filters.process_signal(filters.filter_init(kind, fc), scenario.reference.data,
                                       scenario.primary.data).e
        except NumericError as exc:
            raise NumericError(f"{kind}: {exc}") from exc
        rep = evaluate_denoise(scenario, e)
        snr_rows.append([kind, "streaming", rep.snr_in, rep.snr_out, rep.improvement,
                         rep.segmental_in, rep.segmental_out, seed, _params_str(fc.to_dict())])
        summary[kind] = rep

    runs = {}
    for name in experiments.OPTIMIZER_ORDER:
        run, out = experiments.optimize_fixed_filter(scenario, name, opt_taps, opt_window,
                                                     opt_params[name])
        rep = evaluate_denoise(scenario, out)
        params = {"num_taps": opt_taps, "window": opt_window, **run.params}
        snr_rows.append([name, "offline", rep.snr_in, rep.snr_out, rep.improvement,
                         rep.segmental_in, rep.segmental_out, seed, _params_str(params)])
        summary[name] = rep
        runs[name] = run
        path = os.path.join(args.out_dir, f"history_{name.lower()}.csv")
        run.write_history_csv(path)
        outputs.append(path)

    path = os.path.join(args.out_dir, "snr.csv")
    write_csv(path, ["algorithm", "family", "snr_in", "snr_out", "improvement", "segmental_snr_in",
                     "segmental_snr_out", "seed", "params"],
              [[_fmt(v) if not isinstance(v, str) else v for v in r] for r in snr_rows])
    outputs.append(path)

    conv = experiments.noise_path_convergence(
        scenario, ("LMS", "NLMS", "RLS"), configs, seed=seed,
        block=lc_block, window=lc_window,
    )
    rows = []
    for kind, (curve, idx) in conv.items():
        for i, (m, s) in enumerate(zip(curve.block_mse, curve.smoothed)):
            rows.append([kind, i, _fmt(m), _fmt(s), _fmt(idx), seed,
                         _params_str(configs[kind].to_dict())])
    path = os.path.join(args.out_dir, "convergence.csv")
    write_csv(path, ["algorithm", "block_index", "block_mse", "smoothed_mse", "convergence_block",
                     "seed", "params"], rows)
    outputs.append(path)

    table = bench_runtime(list(experiments.STREAMING_ORDER) + list(experiments.OPTIMIZER_ORDER),
                          scenario, repetitions=reps, filter_config=configs,
                          num_taps_opt=opt_taps, opt_window=opt_window, opt_params=opt_params)
    order = list(experiments.STREAMING_ORDER) + list(experiments.OPTIMIZER_ORDER)
    rank = {name: i + 1 for i, name in enumerate(table.names())}
    rows = []
    for name in order:
        rec = table[name]
        params = configs[name].to_dict() if name in configs else {
            "num_taps": opt_taps, "window": opt_window, **runs[name].params}
        rows.append([name, rec.unit, f"{rec.seconds:.6e}", _fmt(rec.evaluations),
                     rec.repetitions, int(rec.realtime_feasible), rank[name], seed,
                     _params_str(params)])
    path = os.path.join(args.out_dir, "runtime.csv")
    write_csv(path, ["algorithm", "unit", "seconds", "evaluations", "repetitions",
                     "realtime_feasible", "rank", "seed", "params"], rows)
    outputs.append(path)

    rows = []
    for name, rep in summary.items():
        conv_idx = conv[name][1] if name in conv else None
        rows.append([sid, name, _fmt(rep.snr_in), _fmt(rep.snr_out), _fmt(rep.improvement),
                     _fmt(conv_idx), seed])
    path = os.path.join(args.out_dir, "summary.csv")
    write_csv(path, ["scenario_id", "algorithm", "snr_in", "snr_out", "improvement",
                     "convergence_block", "seed"], rows)
    outputs.append(path)

    _write_manifest(args.out_dir, argv, cfg, {"optimizers": seed, "sensor_noise": seed}, outputs)
    print("runtime order: " + " < ".join(table.names()))
    return EXIT_OK


def cmd_beamform(args, argv) -> int:
    cfg = _load_config(args.config)
    if len(args.channels) < 2:
        raise InputError("beamforming needs at least two channel WAVs")
    clips = [_read_mono(p) for p in args.channels]
    rates = {c.sample_rate for c in clips}
    lengths = {len(c) for c in clips}
    if len(rates) != 1 or len(lengths) != 1:
        raise InputError("channel WAVs must share sample rate and length")
    rate = rates.pop()

    spacing = cfg.get_float("array.spacing", 0.04)
    angle = cfg.get_float("array.angle", 0.0)
    c = cfg.get_float("array.speed_of_sound", 343.0)
    f_max = cfg.get_float("array.f_max", 4000.0)
    method = cfg.get_str("beamform.method", "das")
    cfg.check("array.spacing", spacing > 0, "must be > 0")
    cfg.check("array.speed_of_sound", c > 0, "must be > 0")
    cfg.check("array.f_max", f_max > 0, "must be > 0")
    cfg.check("array.angle", abs(angle) <= math.pi / 2, "must lie in [-pi/2, pi/2]")
    cfg.check("beamform.method", method in ("das", "adaptive"), "must be 'das' or 'adaptive'")

    geom = ArrayGeometry(len(clips), spacing, c, rate)
    limit = max_spacing(f_max, c)
    if spacing > limit:
        print(f"warning: spacing {spacing:g} m exceeds the half-wavelength limit {limit:.4g} m "
              f"at f_max {f_max:g} Hz; expect spatial aliasing", file=sys.stderr)

    X = np.asarray([clip.data for clip in clips])
    delays = steering_delays(geom, angle)
    if method == "das":
        out = delay_and_sum(X, delays)
    else:
        fc = filters.FilterConfig.from_config(cfg, mu=cfg.get_float("filter.mu", 0.1))
        fc.num_taps = cfg.get_int("filter.num_taps", 32)
        out = filter_and_sum_adaptive(X, geom, angle, fc)

    measured = None
    if args.noise:
        if len(args.noise) != len(clips):
            raise InputError("--noise needs one WAV per channel")
        V = np.asarray([_read_mono(p).data for p in args.noise])
        if V.shape != X.shape:
            raise InputError("noise WAVs must match the channel WAVs in length")
        measured = array_snr_gain(X - V, V, delays)

    os.makedirs(args.out_dir, exist_ok=True)
    out_wav = os.path.join(args.out_dir, "beamformed.wav")
    write_wav(out_wav, AudioClip.mono(out, rate), WAV_BITS)
    gain_csv = os.path.join(args.out_dir, "gain.csv")
    write_csv(gain_csv, ["mic_count", "spacing_m", "angle_rad", "max_spacing_m", "spacing_ok",
                         "method", "theoretical_gain_db", "measured_gain_db"],
              [[geom.mic_count, _fmt(spacing), _fmt(angle), _fmt(limit), int(spacing <= limit),
                method, _fmt(10 * math.log10(geom.mic_count)), _fmt(measured)]])
    _write_manifest(args.out_dir, argv, cfg, {}, [out_wav, gain_csv])
    if measured is not None:
        print(f"array gain {measured:.2f} dB ({geom.mic_count} mics)")
    return EXIT_OK


def _read_mono(path) -> AudioClip:
    clip = read_wav(path)
    if clip.channels != 1:
        raise InputError(f"{path}: expected a mono WAV")
    return clip


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override configured seeds")
    common.add_argument("--out-dir", required=True, help="directory for output files")
    common.add_argument("--config", default=None, help="key = value configuration file")
    common.add_argument("--paced", action="store_true",
                        help="pace the streaming producer at the real sample rate")

    parser = argparse.ArgumentParser(prog="anclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a dual-mic scenario")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("denoise", parents=[common], help="stream a scenario through a filter")
    p.add_argument("scenario_dir")
    p.add_argument("--algo", default="lms", choices=["lms", "nlms", "rls", "lms-q15"])
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("compare", parents=[common], help="convergence, SNR and runtime tables")
    p.add_argument("scenario_dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("beamform", parents=[common], help="delay-and-sum a set of mono WAVs")
    p.add_argument("channels", nargs="+", help="one mono WAV per microphone, in array order")
    p.add_argument("--noise", nargs="+", default=None,
                   help="noise-only WAV per microphone, used to measure array gain")
    p.set_defaults(func=cmd_beamform)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, FormatError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
