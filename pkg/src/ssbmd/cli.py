"""Command-line front end: ``ssbmd <command> [options]``.

Exit status is 0 on success, 2 for bad input or configuration and 3 when a
numerical routine did not converge.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .constellation import Constellation, ScaledConstellation
from .fec import load_code
from .infotheory import LabelDistribution, entropy, kl_divergence, undb
from .matcher import (
    MatcherSpec,
    OverflowModel,
    dematch_blocks,
    match_blocks,
    overflow_prob_clt,
    overflow_prob_mc,
    pack_block,
)
from .optimize import (
    SWEEP_COLUMNS,
    ConvergenceError,
    dot_analysis,
    kl_project_entropy,
    rate_at_fixed_distribution,
    rate_sweep,
    snr_for_rate,
)
from .txrx import (
    INTERLEAVERS,
    FrameLayout,
    adapted_target,
    count_errors,
    make_interleaver,
    make_link,
    operating_point,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SIM_COLUMNS = ("snr_db", "frames", "iw_errors", "p_iw", "wilson_low", "wilson_high")
CSV_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config files


def read_config(path, _seen=None):
    """Flat ``key = value`` file; ``include other.cfg`` pulls in another file
    (relative to this one) whose keys later lines may override."""
    path = Path(path)
    seen = _seen or set()
    real = path.resolve()
    if real in seen:
        raise ConfigError(f"include cycle at {path}")
    seen = seen | {real}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for num, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("include ") or line.startswith("include\t"):
            out.update(read_config(path.parent / line.split(None, 1)[1].strip(), seen))
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{num}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{num}: empty key")
        out[key] = value
    return out


def parse_floats(text):
    try:
        return [float(x) for x in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"not a list of numbers: {text!r}") from exc


def parse_grid(text):
    """``start:stop:step`` (stop included) or an explicit list."""
    if ":" in str(text):
        try:
            a, b, step = (float(x) for x in text.split(":"))
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}") from exc
        if step <= 0 or b < a:
            raise ConfigError(f"bad grid {text!r}")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 10) for i in range(count)]
    return parse_floats(text)


def parse_pmf(text):
    p = np.array(parse_floats(text))
    if p.size == 0 or np.any(p < 0) or p.sum() <= 0:
        raise ConfigError(f"not a probability vector: {text!r}")
    if abs(p.sum() - 1) > 1e-3:
        raise ConfigError(f"probabilities sum to {p.sum():.6f}")
    return p / p.sum()


# ---------------------------------------------------------------------------
# outputs


def write_manifest(command, config, seed, outputs, started):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "csv_schema": CSV_SCHEMA_VERSION,
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.time() - started, 3),
    }
    if outputs:
        Path(str(outputs[0]) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def write_csv(path, columns, rows):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def write_dat(path, columns, rows):
    """Whitespace-separated columns with a commented header (gnuplot style)."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for row in rows:
            fh.write(" ".join(_fmt(row[c]) for c in columns) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_rates(args):
    started = time.time()
    grid = parse_grid(args.snr_grid)
    rows = rate_sweep(args.m, None, grid, args.num_bins, args.restarts, args.seed, args.workers, args.cache_dir)
    write_csv(args.out, SWEEP_COLUMNS, rows)
    outputs = [args.out]
    if args.dat:
        write_dat(args.dat, SWEEP_COLUMNS, rows)
        outputs.append(args.dat)
    config = {"m": args.m, "snr_grid_db": grid, "num_bins": args.num_bins, "restarts": args.restarts}
    write_manifest("rates", config, args.seed, outputs, started)
    for row in rows:
        print(" ".join(f"{c}={row[c]:.6f}" for c in SWEEP_COLUMNS))
    if not all(r.get("converged", True) for r in rows):
        print("warning: some capacity computations did not converge", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def adaptation_report(target, h_min, m=3, rate=2.0, num_bins=512):
    """Entropy projection of a sub-label pmf and its SNR cost at ``rate``."""
    adapted, lam = kl_project_entropy(target, h_min)
    const = Constellation(m)
    snr = {}
    for name, pmf in (("target", target), ("adapted", adapted)):
        dist = LabelDistribution.sign_times(pmf)
        snr[name] = snr_for_rate(lambda x, d=dist: rate_at_fixed_distribution(d, const, float(undb(x)), num_bins), rate)
    return {
        "lambda": lam,
        "adapted": adapted.tolist(),
        "entropy": entropy(adapted),
        "kl_to_target": kl_divergence(adapted, target),
        "snr_target_db": snr["target"],
        "snr_adapted_db": snr["adapted"],
        "snr_penalty_db": snr["adapted"] - snr["target"],
    }


def cmd_adapt(args):
    started = time.time()
    target = parse_pmf(args.target)
    rep = adaptation_report(target, args.h_min, rate=args.rate, num_bins=args.num_bins)
    print(f"lambda        {rep['lambda']:.6f}")
    print("adapted pmf   " + " ".join(f"{p:.6f}" for p in rep["adapted"]))
    print(f"entropy       {rep['entropy']:.6f} bits")
    print(f"divergence    {rep['kl_to_target']:.6g} bits")
    print(f"SNR penalty   {rep['snr_penalty_db']:.4f} dB at {args.rate} bits/use")
    if args.out:
        Path(args.out).write_text(json.dumps(rep, indent=2) + "\n")
        write_manifest("adapt", {"target": target.tolist(), "h_min": args.h_min, "rate": args.rate}, None, [args.out], started)
    return EXIT_OK


SIM_DEFAULTS = {
    "layout": "shaped",
    "code": "",
    "interleaver": "parity_bit",
    "m": "3",
    "target": "0.0579 0.1507 0.4676 0.3237",
    "gamma": "3",
    "adapt": "yes",
    "escape": "yes",
    "snr_db": "15",
    "d": "",
    "frames": "1000",
    "target_errors": "",
    "seed": "0",
    "workers": "1",
    "decoder": "bp",
    "max_iters": "50",
    "out": "simulate.csv",
}


def _yes(text):
    return str(text).lower() in ("yes", "true", "1")


def build_layout(cfg):
    code_ref = cfg["code"] or ("peg1008_r34" if cfg["layout"] == "shaped" else "peg1002_r23")
    try:
        code = load_code(code_ref)
    except (OSError, KeyError) as exc:
        raise ConfigError(f"cannot load code {code_ref!r}: {exc}") from exc
    if int(cfg["m"]) != 3:
        raise ConfigError("only m = 3 frames are supported")
    if cfg["layout"] == "uniform":
        return FrameLayout.uniform(code)
    if cfg["layout"] != "shaped":
        raise ConfigError(f"layout must be 'shaped' or 'uniform', got {cfg['layout']!r}")
    target = parse_pmf(cfg["target"])
    n = code.n // 3
    m_in = 4 * n - code.k
    if _yes(cfg["adapt"]):
        target, _ = adapted_target(target, n, m_in, gamma=float(cfg["gamma"]))
    return FrameLayout.shaped(code, target, m_in)


def cmd_simulate(args):
    started = time.time()
    cfg = dict(SIM_DEFAULTS)
    cfg.update(read_config(args.config))
    for key, value in (args.set or []):
        cfg[key] = value
    unknown = set(cfg) - set(SIM_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg["interleaver"] not in INTERLEAVERS:
        raise ConfigError(f"interleaver must be one of {INTERLEAVERS}")
    try:
        layout = build_layout(cfg)
        seed, frames, workers = int(cfg["seed"]), int(cfg["frames"]), int(cfg["workers"])
        max_iters = int(cfg["max_iters"])
        target_errors = int(cfg["target_errors"]) if cfg["target_errors"] else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    points = [("d", x) for x in parse_floats(cfg["d"])] or [("snr_db", x) for x in parse_floats(cfg["snr_db"])]
    for kind, value in points:
        if kind == "d":
            il = make_interleaver(cfg["interleaver"], layout.code.n, layout.m, seed=seed, code=layout.code)
            link = make_link(layout, ScaledConstellation(Constellation(layout.m), value), il)
        else:
            link = operating_point(layout, value, cfg["interleaver"], seed=seed)
        res = count_errors(link, frames, seed=seed, workers=workers, decoder=cfg["decoder"],
                           max_iters=max_iters, target_errors=target_errors,
                           overflow_is_error=not _yes(cfg["escape"]))
        lo, hi = res.wilson()
        snr_db = value if kind == "snr_db" else round(res.snr_db, 6)
        row = {"snr_db": snr_db, "frames": res.frames, "iw_errors": res.iw_errors, "p_iw": res.p_iw,
               "wilson_low": lo, "wilson_high": hi}
        rows.append(row)
        print(" ".join(f"{c}={_fmt(row[c])}" for c in SIM_COLUMNS), flush=True)
    write_csv(cfg["out"], SIM_COLUMNS, rows)
    write_manifest("simulate", cfg, seed, [cfg["out"]], started)
    return EXIT_OK


def cmd_overflow(args):
    target = parse_pmf(args.target)
    spec = MatcherSpec(target.size, target, args.m_in, args.n_out, strict=False)
    clt = overflow_prob_clt(OverflowModel.from_spec(spec))
    mc = overflow_prob_mc(spec, args.trials, args.seed)
    print(f"CLT           {clt:.6g}")
    print(f"Monte Carlo   {mc.estimate:.6g}  95% [{mc.low:.6g}, {mc.high:.6g}]  ({mc.hits}/{mc.trials})")
    print(f"covered       {'yes' if mc.covers(clt) else 'no'}")
    return EXIT_OK


def cmd_dots(args):
    started = time.time()
    res = dot_analysis(3, None, None, args.num_bins)
    for name, pt in (("cm", res.cm), ("ss_bmd", res.ss_bmd), ("marginal_bicm", res.marginal_bicm)):
        print(f"{name:14s} snr={pt.snr_db:.4f} dB  rate={pt.rate:.6f}  d={pt.d:.6f}")
    print(f"rate gain     {res.rate_gain:.6f} bits")
    print(f"SNR loss      {res.snr_loss_db:.4f} dB")
    if args.out:
        blob = {
            name: {"snr_db": pt.snr_db, "rate": pt.rate, "d": pt.d, "pmf": pt.dist.pmf.tolist()}
            for name, pt in (("cm", res.cm), ("ss_bmd", res.ss_bmd), ("marginal_bicm", res.marginal_bicm))
        }
        blob.update(rate_gain=res.rate_gain, snr_loss_db=res.snr_loss_db)
        Path(args.out).write_text(json.dumps(blob, indent=2) + "\n")
        write_manifest("dots", {"num_bins": args.num_bins}, None, [args.out], started)
    return EXIT_OK


def cmd_matcher_roundtrip(args):
    target = parse_pmf(args.target)
    if args.m_in is not None:
        spec = MatcherSpec(target.size, target, args.m_in, args.n_out)
    else:
        spec = MatcherSpec.with_margin(target, args.n_out, args.gamma)
    rng = np.random.default_rng(args.seed)
    data = rng.integers(0, 2, size=(args.blocks, spec.m_in), dtype=np.uint8)
    symbols, flags = match_blocks(spec, data)
    back = dematch_blocks(spec, symbols, flags)
    exact = bool(np.array_equal(back, data))
    emp = np.bincount(symbols.ravel(), minlength=spec.alphabet_size) / symbols.size
    tv = 0.5 * float(np.abs(emp - spec.target).sum())
    print(f"m_in={spec.m_in} n_out={spec.n_out} margin={spec.information_margin:.3f} bits")
    print(f"blocks={args.blocks} overflow={int(flags.sum())} bit_exact={'yes' if exact else 'no'} tv={tv:.6f}")
    if args.out:
        with open(args.out, "wb") as fh:
            for z, f in zip(symbols, flags):
                fh.write(pack_block(spec, z, f))
    return EXIT_OK if exact else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def _key_value(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected key=value")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def build_parser():
    p = argparse.ArgumentParser(prog="ssbmd", description="Shaped bit-metric decoding for ASK over AWGN.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rates", help="power-rate curves on an SNR grid")
    r.add_argument("--m", type=int, default=3)
    r.add_argument("--snr-grid", default="0:20:1", help="start:stop:step in dB, or a list")
    r.add_argument("--num-bins", type=int, default=512)
    r.add_argument("--restarts", type=int, default=8)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--cache-dir", default=os.environ.get("SSBMD_CACHE"))
    r.add_argument("--out", default="rates.csv")
    r.add_argument("--dat", help="also write a gnuplot data file")
    r.set_defaults(func=cmd_rates)

    a = sub.add_parser("adapt", help="entropy-constrained projection of a shaping pmf")
    a.add_argument("--target", default="0.0579 0.1507 0.4676 0.3237", help="P_S in label order 00 01 10 11")
    a.add_argument("--h-min", type=float, default=1.75)
    a.add_argument("--rate", type=float, default=2.0)
    a.add_argument("--num-bins", type=int, default=512)
    a.add_argument("--out")
    a.set_defaults(func=cmd_adapt)

    s = sub.add_parser("simulate", help="Monte Carlo frame errors from a config file")
    s.add_argument("config")
    s.add_argument("--set", type=_key_value, action="append", help="override a config key (key=value)")
    s.set_defaults(func=cmd_simulate)

    o = sub.add_parser("overflow", help="matcher overflow probability")
    o.add_argument("--target", default="0.75 0.25")
    o.add_argument("--m-in", type=int, required=True)
    o.add_argument("--n-out", type=int, required=True)
    o.add_argument("--trials", type=int, default=100000)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_overflow)

    d = sub.add_parser("dots", help="CM vs SS-BMD vs marginal-product BICM at one scaling")
    d.add_argument("--num-bins", type=int, default=512)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dots)

    mr = sub.add_parser("matcher-roundtrip", help="match and dematch random blocks")
    mr.add_argument("--target", default="0.0722 0.1654 0.4415 0.3209")
    mr.add_argument("--n-out", type=int, default=336)
    mr.add_argument("--m-in", type=int)
    mr.add_argument("--gamma", type=float, default=3.0)
    mr.add_argument("--blocks", type=int, default=1000)
    mr.add_argument("--seed", type=int, default=0)
    mr.add_argument("--out", help="write framed blocks (flag byte + packed symbols)")
    mr.set_defaults(func=cmd_matcher_roundtrip)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
