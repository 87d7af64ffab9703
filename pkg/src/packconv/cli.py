"""Command-line front end: ``packconv <subcommand> [options]``.

Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 companding
range above the mode limit under the strict policy, 4 backend validation
failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .conv_core import U_SYS_DEFAULT, get_backend, validate_backend
from .errors import BackendPrecisionFailure, BoundExceeded, ConfigError
from .packing import PackingMode, companding_range
from .pipeline import convolve, convolve_adaptive
from .sigio import read_signal, write_signal

log = logging.getLogger("packconv")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_BOUND, EXIT_BACKEND = 0, 1, 2, 3, 4

MODE_CHOICES = ["full", "sym", "asym2", "asym3", "adaptive"]


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment.  Keys use flag names without dashes."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def read_floor_file(path) -> list[float]:
    floors = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            floors.append(math.inf if line.lower() in ("inf", "+inf") else float(line))
    if not floors:
        raise ConfigError(f"{path}: no floors found")
    return floors


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=MODE_CHOICES, default="sym")
    p.add_argument("--sq", type=int, default=16, help="signal companding half-range")
    p.add_argument("--kq", type=int, default=16, help="kernel companding half-range")
    p.add_argument("--backend", choices=["direct", "fft"], default="direct")
    p.add_argument("--bound-policy", choices=["strict", "warn"], default="strict")
    p.add_argument("--usys", type=float, default=U_SYS_DEFAULT)
    p.add_argument("--block-w", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-floor", type=float, default=None, help="adaptive SNR floor in dB")
    p.add_argument("--floor-file", default=None, help="one floor per block, last one held")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", default=None, help="key=value file supplying defaults")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="packconv",
                                     description="Companded and packed 1D convolution.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("conv", "convolve a signal file with a kernel file"),
                        ("xcorr", "cross-correlate a signal file with a template file"),
                        ("adaptive", "convolve with per-block mode selection")):
        p = sub.add_parser(name, help=help_)
        _shared(p)
        p.add_argument("input")
        p.add_argument("kernel")
        p.add_argument("output")
        if name == "adaptive":
            p.add_argument("--candidates", default="sym,asym2,full")

    p = sub.add_parser("bench", help="throughput and SNR per mode, CSV")
    _shared(p)
    p.add_argument("--length", type=int, default=1 << 20)
    p.add_argument("--n", type=int, nargs="+", default=[800])
    p.add_argument("--w", type=int, nargs="+", default=[32768])
    p.add_argument("--modes", default="full,sym,asym2,asym3")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--out", default="-")
    p.set_defaults(bound_policy="warn")

    p = sub.add_parser("snr-grid", help="predicted (and measured) SNR over a range grid, CSV")
    _shared(p)
    p.add_argument("--signal-file", default=None)
    p.add_argument("--kernel-file", default=None)
    p.add_argument("--uniform", type=float, default=128.0,
                   help="amplitude of the synthetic iid uniform source without files")
    p.add_argument("--length", type=int, default=1 << 16)
    p.add_argument("--n", type=int, default=800)
    p.add_argument("--grid", type=int, nargs="*", default=[8, 16, 32, 64, 128, 256])
    p.add_argument("--calibrate-at", type=int, default=None)
    p.add_argument("--measure", action="store_true", help="also run the pipeline")
    p.add_argument("--out", default="-")
    p.set_defaults(bound_policy="warn")

    p = sub.add_parser("validate-backend", help="check a backend against the direct one")
    _shared(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r-max", type=int, default=None, help="defaults to N*sq*kq")
    p.add_argument("--trials", type=int, default=100)
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        values = read_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        converted = {}
        for key, raw in values.items():
            action = known[key]
            if action.nargs in ("+", "*"):
                conv = action.type or str
                converted[key] = [conv(v) for v in raw.replace(",", " ").split()]
            elif action.type is not None:
                converted[key] = action.type(raw)
            elif isinstance(action, argparse._StoreTrueAction):
                converted[key] = raw.lower() in ("1", "true", "yes")
            else:
                converted[key] = raw
        sub.set_defaults(**converted)
        args = parser.parse_args(argv)  # command-line flags override the file
    return args


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def _ensure_backend(backend, mode: PackingMode, N: int, s_q: int, k_q: int, args) -> None:
    if args.backend != "fft" or mode is PackingMode.FULL:
        return
    r_max = companding_range(N, s_q, k_q)
    res = validate_backend(backend, N, r_max, args.usys, seed=args.seed)
    log.info("fft backend validation at N=%d r_max=%d: %s (max error %.3g)", N, r_max,
             "pass" if res.passed else "fail", res.max_abs_error)
    if not res.passed:
        raise BackendPrecisionFailure(
            f"fft backend failed validation at N={N}, r_max={r_max} "
            f"(max error {res.max_abs_error:.3g} > {0.5 * args.usys:.3g})")


def _floors(args):
    if args.floor_file:
        return read_floor_file(args.floor_file)
    if args.snr_floor is None:
        raise ConfigError("adaptive mode needs --snr-floor or --floor-file")
    return args.snr_floor


def cmd_filter(args, reverse: bool = False, adaptive: bool = False) -> int:
    signal, rate = read_signal(args.input)
    kernel, _ = read_signal(args.kernel)
    if signal.size == 0 or kernel.size == 0:
        raise ConfigError("input and kernel must be nonempty")
    if reverse:
        kernel = kernel[::-1].copy()
    backend = get_backend(args.backend)
    if adaptive or args.mode == "adaptive":
        names = getattr(args, "candidates", "sym,asym2,full")
        candidates = tuple(PackingMode.parse(m) for m in names.split(","))
        if args.backend == "fft":
            for m in candidates:
                if m is not PackingMode.FULL:
                    # adaptive ranges depend on the block; validate at the mode limit
                    backend_check = validate_backend(backend, len(kernel), m.limit, args.usys,
                                                     seed=args.seed)
                    if not backend_check.passed:
                        raise BackendPrecisionFailure(f"fft backend failed validation for {m.value}")
        res = convolve_adaptive(signal, kernel, _floors(args), candidates=candidates,
                                backend=backend, block_w=args.block_w, u_sys=args.usys,
                                workers=args.workers)
        for d in res.decisions:
            dec = d.decision
            print(f"block {d.block}: floor {d.floor_db:g} dB -> {dec.mode.value} "
                  f"S_q={dec.s_q} K_q={dec.k_q} predicted {dec.predicted_snr_db:.2f} dB")
        out = res.output
    else:
        mode = PackingMode.parse(args.mode)
        _ensure_backend(backend, mode, len(kernel), args.sq, args.kq, args)
        out = convolve(signal, kernel, mode, s_q=args.sq, k_q=args.kq, backend=backend,
                       block_w=args.block_w, bound_policy=args.bound_policy, u_sys=args.usys,
                       workers=args.workers)
    write_signal(args.output, out, rate)
    log.info("wrote %d samples to %s", len(out), args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        cfg = bench_mod.BenchConfig(
            L=args.length, N=tuple(args.n), W=tuple(args.w),
            modes=tuple(args.modes.split(",")), backend=args.backend,
            repetitions=args.repetitions, seed=args.seed, bound_policy=args.bound_policy,
            workers=args.workers,
            s_q=args.sq if _explicit(args, "sq") else None,
            k_q=args.kq if _explicit(args, "kq") else None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = bench_mod.run_bench(cfg)
    with _open_out(args.out) as f:
        bench_mod.write_bench_csv(rows, cfg, f)
    return EXIT_OK


def _explicit(args, name) -> bool:
    return name in getattr(args, "_explicit", set())


def cmd_snr_grid(args) -> int:
    if args.signal_file:
        signal, _ = read_signal(args.signal_file)
        if not args.kernel_file:
            raise ConfigError("--signal-file needs --kernel-file")
        kernel, _ = read_signal(args.kernel_file)
        model = bench_mod.model_from_inputs(signal, kernel)
    else:
        rng = np.random.default_rng(args.seed)
        signal = rng.uniform(-args.uniform, args.uniform, args.length)
        kernel = rng.uniform(-args.uniform, args.uniform, args.n)
        model = bench_mod.uniform_model(args.uniform, args.n)
    mode = "sym" if args.mode in ("adaptive", "full") else args.mode
    measure = args.measure or args.calibrate_at is not None
    rows = bench_mod.snr_grid(
        model, args.grid, mode,
        signal=signal if measure else None, kernel=kernel if measure else None,
        calibrate_at=None if args.calibrate_at is None else (args.calibrate_at,) * 2,
        block_w=args.block_w, backend=args.backend)
    with _open_out(args.out) as f:
        bench_mod.write_grid_csv(rows, f)
    return EXIT_OK


def cmd_validate(args) -> int:
    backend = get_backend(args.backend)
    r_max = args.r_max or companding_range(args.n, args.sq, args.kq)
    res = validate_backend(backend, args.n, r_max, args.usys, trials=args.trials, seed=args.seed)
    print(f"{res.algorithm} N={res.N} r_max={res.r_max}: "
          f"{'pass' if res.passed else 'fail'} max_abs_error={res.max_abs_error:.3g}")
    return EXIT_OK if res.passed else EXIT_BACKEND


def _mark_explicit(argv) -> set:
    seen = set()
    for tok in argv:
        if tok.startswith("--"):
            seen.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    return seen


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args._explicit = _mark_explicit(argv)
        if args.config:
            args._explicit |= set(read_config_file(args.config))
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "conv":
            return cmd_filter(args)
        if args.command == "xcorr":
            return cmd_filter(args, reverse=True)
        if args.command == "adaptive":
            return cmd_filter(args, adaptive=True)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "snr-grid":
            return cmd_snr_grid(args)
        return cmd_validate(args)
    except BoundExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except BackendPrecisionFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
