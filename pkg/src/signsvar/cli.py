"""Command-line entry point: ``signsvar {validate,simulate,estimate,bench}``.

Exit codes: 0 success; 1 restrictions parse but fail the assumption check
(validate only); 2 bad input or configuration; 3 candidate cap exhausted
before the requested number of draws (partial output is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .harness import BenchConfig, ConfigError, generate_scheme, load_bench_config, run_bench, summarize_irfs
from .io import (
    file_digest,
    now,
    read_data_csv,
    write_atomic,
    write_data_csv,
    write_irf_draws,
    write_json,
    write_manifest,
)
from .posterior import DEFAULT_GRID, Minnesota, fit_posterior, select_shrinkage
from .restrictions import RestrictionError, check_assumptions, load_restrictions, serialize_restrictions
from .sampling import DEFAULT_CAP, METHODS, AssumptionError, DrawStats, Sampler, draw_many, stream
from .var import DgpSpec, InfeasibleDGPError, companion_spectral_radius, compute_irf, simulate_dgp

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_EXHAUSTED = 0, 1, 2, 3
SEED_MAX = 2 ** 64 - 1


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _quantiles(text: str) -> list:
    try:
        qs = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad quantile list {text!r}") from None
    if not qs or any(not 0.0 <= q <= 1.0 for q in qs):
        raise argparse.ArgumentTypeError("quantiles must lie in [0, 1]")
    return sorted(qs)


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


# --- validate --------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        rset = load_restrictions(args.restrictions, strict=not args.lenient)
    except FileNotFoundError:
        _info(f"error: {args.restrictions}: no such file")
        return EXIT_INPUT
    except RestrictionError as exc:
        _info(f"error: {args.restrictions}: {exc}")
        return EXIT_INPUT
    report = check_assumptions(rset)
    print(f"n={rset.n} m={rset.m}")
    print(
        f"impact single-shock: {sum(len(g) for g in rset.impact_single)}, "
        f"cross-shock: {len(rset.cross_shock)}, dynamic: {len(rset.dynamic)}"
    )
    for j, group in enumerate(rset.impact_single):
        print(f"  shock {rset.shock_label(j)}: {len(group)} impact restriction(s)")
    print(report.describe(rset))
    print(f"assumptions hold: {'yes' if report.holds else 'no'}")
    print(f"proposed method available: {'yes' if report.holds else 'no (use --method fallback)'}")
    return EXIT_OK if report.holds else EXIT_FAIL


# --- simulate --------------------------------------------------------------


def simulate_config(args) -> dict:
    return {
        "n": args.n, "m": args.m, "p": args.p, "T": args.T,
        "restrictions": str(args.restrictions) if args.restrictions else None,
        "stability_bound": args.stability_bound, "max_redraws": args.max_redraws,
        "scheme": args.scheme,
    }


def cmd_simulate(args) -> int:
    started = now()
    config = simulate_config(args)
    inputs = {}
    rset = None
    try:
        if args.restrictions:
            rset = load_restrictions(args.restrictions, n=args.n, m=args.m)
            inputs["restrictions"] = args.restrictions
        if rset is not None and args.scheme:
            raise UsageError("--restrictions and --scheme are mutually exclusive")
        spec = DgpSpec(args.n, args.m, args.p, args.T, args.stability_bound, rset, args.max_redraws)
        rng = stream(args.seed)
        scheme = None
        for _ in range(1000 if args.scheme else 1):
            params, b0, data = simulate_dgp(spec, rng)
            if args.scheme:
                scheme = generate_scheme(b0, args.m, args.scheme)
                if check_assumptions(scheme).holds:
                    break
        if scheme is not None and not check_assumptions(scheme).holds:
            raise InfeasibleDGPError("could not generate a separable scheme; raise --scheme")
    except (OSError, UsageError, RestrictionError, ValueError, InfeasibleDGPError) as exc:
        _info(f"error: {exc}")
        return EXIT_INPUT
    out = _out_dir(args.out)
    names = list(rset.variable_names) if rset is not None and rset.variable_names else None
    write_data_csv(out / "data.csv", data, names)
    write_json(out / "true_params.json", {
        "intercept": params.intercept.tolist(),
        "lag_coeffs": params.lag_coeffs.tolist(),
        "impact": b0.tolist(),
        "sigma": params.sigma.tolist(),
        "companion_spectral_radius": companion_spectral_radius(params),
    })
    if scheme is not None:
        write_atomic(out / "restrictions.csv", serialize_restrictions(scheme))
    write_manifest(out, "simulate", config, args.seed, inputs, None, started)
    _info(f"wrote {data.shape[0]} x {data.shape[1]} dataset to {out / 'data.csv'}")
    return EXIT_OK


# --- estimate --------------------------------------------------------------


def estimate_config(args) -> dict:
    return {
        "data": str(args.data), "restrictions": str(args.restrictions),
        "method": args.method, "exact": args.exact, "lags": args.lags, "draws": args.draws,
        "horizon": args.horizon, "shrinkage": args.shrinkage, "cap": args.cap,
        "quantiles": list(args.quantiles), "dump_draws": args.dump_draws,
        "enumeration_limit": args.enumeration_limit,
    }


def _shrinkage(value: str, data, p) -> Minnesota:
    if value == "auto":
        return select_shrinkage(data, p, DEFAULT_GRID)
    try:
        lam = float(value)
    except ValueError:
        raise UsageError(f"--shrinkage must be a number or 'auto', got {value!r}") from None
    if lam <= 0:
        raise UsageError("--shrinkage must be positive")
    return Minnesota(lam)


def write_quantiles(path, rset, irfs: np.ndarray, quantiles) -> None:
    """``variable,shock,horizon,q<level>...,mean``; header only when there are no draws."""
    header = ["variable", "shock", "horizon"] + [f"q{q:g}" for q in quantiles] + ["mean"]
    lines = [",".join(header)]
    if irfs.shape[0]:
        s = summarize_irfs(irfs, quantiles)
        n, m, H1 = irfs.shape[1:]
        for i in range(n):
            for j in range(m):
                for h in range(H1):
                    row = [rset.variable_label(i), rset.shock_label(j), str(h)]
                    row += [_fmt(v) for v in s.quantiles[:, i, j, h]]
                    row.append(_fmt(s.mean[i, j, h]))
                    lines.append(",".join(row))
    write_atomic(path, "\n".join(lines) + "\n")


def cmd_estimate(args) -> int:
    started = now()
    try:
        if args.draws < 0:
            raise UsageError("--draws must be >= 0")
        if args.cap < 1:
            raise UsageError("--cap must be >= 1")
        data, names = read_data_csv(args.data)
        rset = load_restrictions(args.restrictions, n=data.shape[1], variable_names=names)
        if rset.n != data.shape[1]:
            raise UsageError(f"restrictions cover {rset.n} variables but the data has {data.shape[1]}")
        H = args.horizon
        if H < rset.max_dynamic_horizon:
            raise UsageError(f"--horizon {H} is below the largest restricted horizon {rset.max_dynamic_horizon}")
        shrink = _shrinkage(args.shrinkage, data, args.lags)
        posterior = fit_posterior(data, args.lags, shrink)
        sampler = Sampler(posterior, rset, args.method, H, exact=args.exact,
                          enumeration_limit=args.enumeration_limit)
    except (OSError, UsageError, RestrictionError, ValueError) as exc:
        _info(f"error: {exc}")
        return EXIT_INPUT

    batch = draw_many(sampler, args.draws, args.seed, args.threads, args.cap)
    m = rset.m
    irfs = np.array([compute_irf(d.params, d.impact, m, H).values for d in batch.draws])
    irfs = irfs.reshape(len(batch.draws), rset.n, m, H + 1)

    out = _out_dir(args.out)
    write_quantiles(out / "irf_quantiles.csv", rset, irfs, args.quantiles)
    if args.dump_draws:
        write_irf_draws(out / "irf_draws.bin", irfs)
    stats = batch.stats.as_dict()
    stats.update(requested=args.draws, exhausted=batch.exhausted, shrinkage=shrink.lam,
                 identified_columns=m, completion_columns="arbitrary orthogonal completion")
    write_json(out / "stats.json", stats)
    config = estimate_config(args)
    config["shrinkage_selected"] = shrink.lam
    write_manifest(out, "estimate", config, args.seed,
                   {"data": args.data, "restrictions": args.restrictions}, stats, started)
    _info(f"{len(batch.draws)}/{args.draws} admissible draws from {batch.stats.candidates} candidates")
    if batch.exhausted:
        _info(f"error: cap of {args.cap} candidates exhausted; partial output written")
        return EXIT_EXHAUSTED
    return EXIT_OK


# --- bench -----------------------------------------------------------------


def cmd_bench(args) -> int:
    started = now()
    try:
        config = load_bench_config(args.config)
    except (OSError, ConfigError) as exc:
        _info(f"error: {exc}")
        return EXIT_INPUT
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["workers"] = args.threads
    if overrides:
        config = BenchConfig.from_dict(dict(config.to_dict(), **overrides))
    result = run_bench(config)
    out = _out_dir(args.out)
    write_json(out / "bench.json", result.to_json())
    write_atomic(out / "bench.csv", result.to_csv())
    totals = {}
    for cell in result.cells:
        for alg, s in cell.stats.items():
            totals[alg] = (totals.get(alg, DrawStats()) + s)
        if cell.error:
            _info(f"warning: {cell.cell.label}: {cell.error}")
    write_manifest(out, "bench", config.to_dict(), config.seed, {"config": args.config},
                   {alg: s.as_dict() for alg, s in totals.items()}, started)
    return EXIT_OK


# --- parser ----------------------------------------------------------------


def _common(p: argparse.ArgumentParser, seed_default=0) -> None:
    p.add_argument("--seed", type=_seed, default=seed_default, help="master seed (64-bit unsigned)")
    p.add_argument("--threads", type=int, default=None if seed_default is None else 1,
                   help="worker processes (results do not depend on this)")
    p.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signsvar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse a restriction file and check shock separability")
    p.add_argument("restrictions")
    p.add_argument("--lenient", action="store_true", help="allow shocks without impact restrictions")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate a dataset from a random stable VAR")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--T", type=int, default=200)
    p.add_argument("--restrictions", help="restriction file the true impact matrix must satisfy")
    p.add_argument("--scheme", type=int, default=0, metavar="COUNT",
                   help="also write restrictions.csv with COUNT sign restrictions read off the true impact")
    p.add_argument("--stability-bound", type=float, default=0.999)
    p.add_argument("--max-redraws", type=int, default=10_000)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="draw identified impulse responses")
    p.add_argument("data", nargs="?")
    p.add_argument("restrictions", nargs="?")
    p.add_argument("--method", choices=METHODS, default="proposed")
    p.add_argument("--exact", action="store_true",
                   help="thin accepted pairs so draws are uniform over admissible rotations")
    p.add_argument("--lags", type=int, default=5)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=20)
    p.add_argument("--shrinkage", default="0.2", help="Minnesota tightness, or 'auto' for grid search")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="candidate pairs allowed per admissible draw")
    p.add_argument("--quantiles", type=_quantiles, default=[0.16, 0.5, 0.84])
    p.add_argument("--enumeration-limit", type=int, default=100_000)
    p.add_argument("--dump-draws", action="store_true", help="also write irf_draws.bin")
    p.add_argument("--from-manifest", help="rerun with the config and seed stored in a manifest")
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="acceptance-rate benchmark on simulated systems")
    p.add_argument("config")
    _common(p, seed_default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def _apply_manifest(args) -> None:
    with open(args.from_manifest, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("command") != "estimate":
        raise UsageError("manifest is not from an estimate run")
    cfg = manifest["config"]
    args.data, args.restrictions = cfg["data"], cfg["restrictions"]
    for name in ("method", "exact", "lags", "draws", "horizon", "shrinkage", "cap",
                 "quantiles", "dump_draws", "enumeration_limit"):
        setattr(args, name, cfg[name])
    args.seed = manifest["seed"]
    for name, digest in manifest.get("inputs", {}).items():
        if file_digest(cfg[name]) != digest:
            _info(f"warning: {cfg[name]} changed since the manifest was written")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "estimate":
        if args.from_manifest:
            try:
                _apply_manifest(args)
            except (OSError, KeyError, ValueError, UsageError) as exc:
                _info(f"error: {args.from_manifest}: {exc}")
                return EXIT_INPUT
        elif not (args.data and args.restrictions):
            parser.error("estimate needs DATA and RESTRICTIONS (or --from-manifest)")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
