"""Command-line interface: ``bondperc <command> [options]``.

Commands: ``simulate``, ``infer-s1``, ``infer-s2``, ``oracle``, ``design``.
Every option may also be given in a ``key = value`` file passed with
``--config``; command-line flags take precedence over the file, which takes
precedence over the built-in defaults.

Exit codes: 0 success, 2 input error, 3 truncated simulation, 4 capacity
guard exceeded.
"""
from __future__ import annotations

import argparse
import json
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .design import (
    Design,
    ProgressiveConfig,
    design_space,
    instructive_utility,
    mc_expected_utility,
    progressive_chain,
)
from .errors import CapacityError, ClusterFormatError, DomainError
from .inference import (
    ChainConfig,
    PriorSpec,
    exact_posterior_s1,
    exact_posterior_s2,
    run_s1,
    run_s2,
)
from .lattice import parse_plot_spec
from .percolation import (
    Truncated,
    intensity_to_p,
    read_cluster,
    read_metadata,
    simulate_cluster,
    write_cluster,
    write_metadata,
)
from .rng import make_rng, replicate_seed

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRUNCATED = 3
EXIT_CAPACITY = 4


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _header(args) -> str:
    return f"bondperc {__version__}; {args.command_line}; seed={args.seed}"


def _chain_config(args) -> ChainConfig:
    return ChainConfig(iterations=args.iterations, burn_in=args.burn_in, thin=args.thin, seed=args.seed)


def _prior(args) -> PriorSpec:
    return PriorSpec(args.prior_a, args.prior_b)


def _replicate_path(out: Path, i: int) -> Path:
    return out.with_name(f"{out.stem}.rep{i}{out.suffix}")


def _fan_out(fn, count: int, threads: int):
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


# --- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    plot = parse_plot_spec(args.plot)
    if args.p is not None:
        p = args.p
    elif args.lam is not None:
        p = intensity_to_p(args.lam, args.tau)
    else:
        raise UsageError("give --p or --lam (with --tau)")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    out = Path(args.out)
    header = _header(args)

    def one(i):
        rng = make_rng(args.seed) if args.replicates == 1 else make_rng(args.seed, i)
        return simulate_cluster(plot, p, rng, args.cap)

    results = _fan_out(one, args.replicates, args.threads)
    truncated = 0
    rows = []
    for i, g in enumerate(results):
        path = out if args.replicates == 1 else _replicate_path(out, i)
        if isinstance(g, Truncated):
            truncated += 1
            rows.append((i, -1, "truncated"))
            print(f"replicate {i}: cluster exceeded {g.cap} sites; nothing written", file=sys.stderr)
            continue
        write_cluster(path, g, edges=not args.no_edges, header=header)
        write_metadata(path, {"version": __version__, "plot": plot.spec, "p": repr(p),
                              "seed": args.seed, "replicate": i, "sites": len(g),
                              "e_open": g.e_open, "e_sat": g.e_sat, "w": g.w})
        rows.append((i, len(g), "ok"))
    if args.replicates > 1:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"# {header}\nreplicate,size,status\n")
            fh.writelines(f"{i},{size},{status}\n" for i, size, status in rows)
    else:
        if rows[0][2] == "ok":
            print(f"cluster of {rows[0][1]} sites written to {out}")
    return EXIT_TRUNCATED if truncated else EXIT_OK


def _write_sample(sample, out: Path, summary_path: Path | None, header: str, extra: dict):
    sample.to_csv(out, comment=header)
    summary = sample.summary()
    summary.update(extra)
    if summary_path is not None:
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="ascii")
    return summary


def _run_chains(args, runner) -> int:
    cfg = _chain_config(args)
    out = Path(args.out)
    header = _header(args)
    extra = {"version": __version__, "command": args.command_line}

    def one(i):
        seed = args.seed if args.replicates == 1 else replicate_seed(args.seed, i)
        return runner(cfg.with_seed(seed))

    samples = _fan_out(one, args.replicates, args.threads)
    if args.replicates == 1:
        summary_path = Path(args.summary) if args.summary else out.with_name(out.name + ".summary.json")
        summary = _write_sample(samples[0], out, summary_path, header, extra)
        print(json.dumps({k: summary[k] for k in ("n_draws", "mean", "sd", "mode") if k in summary}))
        return EXIT_OK
    records = []
    for i, sample in enumerate(samples):
        path = _replicate_path(out, i)
        records.append(_write_sample(sample, path, path.with_name(path.name + ".summary.json"), header, extra))
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# {header}\nreplicate,seed,n_draws,mean,sd,mode\n")
        for i, rec in enumerate(records):
            mode = rec.get("mode", "")
            fh.write(f"{i},{rec['seed']},{rec['n_draws']},{rec['mean']:.10g},{rec['sd']:.10g},{mode}\n")
    print(f"{args.replicates} chains written; aggregate in {out}")
    return EXIT_OK


def _cluster_plot(args):
    if args.plot:
        return parse_plot_spec(args.plot)
    meta = read_metadata(args.cluster)
    return parse_plot_spec(meta.get("plot", "full:2"))


def cmd_infer_s1(args) -> int:
    sites, _ = read_cluster(args.cluster)
    plot = _cluster_plot(args)
    prior = _prior(args)
    return _run_chains(args, lambda cfg: run_s1(sites, plot, cfg, prior))


def cmd_infer_s2(args) -> int:
    plot = parse_plot_spec(args.plot)
    prior = _prior(args)
    return _run_chains(args, lambda cfg: run_s2(args.n, plot, cfg, prior))


def cmd_oracle(args) -> int:
    scenario = args.scenario.lower()
    if scenario == "s1":
        if not args.cluster:
            raise UsageError("scenario s1 needs --cluster")
        sites, _ = read_cluster(args.cluster)
        table = exact_posterior_s1(sites, _cluster_plot(args))
    else:
        if args.n is None:
            raise UsageError("scenario s2 needs --n")
        table = exact_posterior_s2(args.n, parse_plot_spec(args.plot or "full:2"))
    table.to_csv(args.out, comment=_header(args))
    print(f"{len(table.entries)} rows, posterior mean {table.mean():.6f}")
    return EXIT_OK


def _design_name(d: Design) -> str:
    return f"io-{d.m}-{d.r}"


def cmd_design(args) -> int:
    designs = design_space(args.N)
    inner = _chain_config(args)
    prior = _prior(args)
    header = _header(args)
    if args.mode == "progressive":
        cfg = ProgressiveConfig(iterations=args.outer_iterations, burn_in=args.outer_burn_in,
                                sigma=args.sigma, utility_floor=args.utility_floor, inner=inner)
        result = progressive_chain(designs, cfg, args.seed, prior=prior)
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"# {header}\ndesign,frequency\n")
            for d, freq in result.histogram():
                fh.write(f"{_design_name(d)},{freq:.6f}\n")
        chosen = result.mode
    else:
        if args.mode == "instructive":
            if args.p_star is None:
                raise UsageError("instructive mode needs --p-star")
            estimates = [instructive_utility(d, args.p_star, args.M, inner, args.seed,
                                             prior=prior, threads=args.threads) for d in designs]
        else:
            estimates = [mc_expected_utility(d, prior, args.M, inner, args.seed, threads=args.threads)
                         for d in designs]
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(f"# {header}\ndesign,m,r,utility_mean,utility_se,M\n")
            for d, est in zip(designs, estimates):
                se = "" if est.std_error is None else f"{est.std_error:.6g}"
                fh.write(f"{_design_name(d)},{d.m},{d.r},{est.mean:.6g},{se},{est.M}\n")
        best = max(range(len(designs)), key=lambda i: (estimates[i].mean, -designs[i].r))
        chosen = designs[best]
    print(f"selected design: m={chosen.m} r={chosen.r} ({_design_name(chosen)})")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def _add_chain_flags(p, iterations=200_000, burn_in=20_000, thin=10):
    p.add_argument("--iterations", type=int, default=iterations, help="Gibbs/MH pairs")
    p.add_argument("--burn-in", type=int, default=burn_in)
    p.add_argument("--thin", type=int, default=thin)
    p.add_argument("--prior-a", type=float, default=1.0)
    p.add_argument("--prior-b", type=float, default=1.0)


def _add_common(p, fan_out=True):
    p.add_argument("--config", help="key = value file of option defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    if fan_out:
        p.add_argument("--replicates", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bondperc", description="Bond percolation simulation, inference and design.")
    parser.add_argument("--version", action="version", version=f"bondperc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate the open cluster of the origin")
    _add_common(p)
    p.add_argument("--plot", default="full:2", help="full:d, box:d,N or inner-outer:d,m,r")
    p.add_argument("--p", type=float)
    p.add_argument("--lam", type=float, help="infection rate (with --tau)")
    p.add_argument("--tau", type=float, default=1.0, help="infectious lifetime")
    p.add_argument("--cap", type=int, help="maximum cluster size before truncation")
    p.add_argument("--no-edges", action="store_true", help="write the vertex set only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer-s1", help="posterior of p given the cluster's vertex set")
    _add_common(p)
    p.add_argument("--cluster", required=True)
    p.add_argument("--plot", help="defaults to the plot recorded next to the cluster file")
    p.add_argument("--summary")
    _add_chain_flags(p)
    p.set_defaults(func=cmd_infer_s1)

    p = sub.add_parser("infer-s2", help="posterior of p given the cluster size")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--plot", default="full:2")
    p.add_argument("--summary")
    _add_chain_flags(p)
    p.set_defaults(func=cmd_infer_s2)

    p = sub.add_parser("oracle", help="exact beta-mixture posterior for small cases")
    _add_common(p, fan_out=False)
    p.add_argument("--scenario", choices=["s1", "s2", "S1", "S2"], required=True)
    p.add_argument("--cluster")
    p.add_argument("--n", type=int)
    p.add_argument("--plot")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("design", help="compare inner-outer designs of a given side")
    _add_common(p, fan_out=False)
    p.add_argument("--mode", choices=["instructive", "progressive", "mc"], required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p-star", type=float)
    p.add_argument("--M", type=int, default=300)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--outer-iterations", type=int, default=5_000)
    p.add_argument("--outer-burn-in", type=int, default=500)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--utility-floor", type=float, default=1e-3)
    _add_chain_flags(p, 20_000, 2_000, 10)
    p.set_defaults(func=cmd_design)
    return parser


def _config_path(argv):
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Parse ``argv`` with option defaults taken from ``--config`` if given."""
    path = _config_path(argv)
    command = next((t for t in argv if not t.startswith("-")), None)
    subparsers = parser._subparsers._group_actions[0].choices
    if path is None or command not in subparsers:
        return parser.parse_args(argv)
    sub = subparsers[command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(path).items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown option {key!r} in config file")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[key] = (action.type or str)(raw)
            except ValueError:
                raise UsageError(f"config option {key}: bad value {raw!r}") from None
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"config option {key}: {raw!r} is not one of {list(action.choices)}")
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "replicates", 1) < 1 or getattr(args, "threads", 1) < 1:
            raise UsageError("--replicates and --threads must be positive")
        args.command_line = "bondperc " + shlex.join(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"bondperc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ClusterFormatError as exc:
        print(f"bondperc: error: malformed cluster file: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapacityError as exc:
        print(f"bondperc: error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (DomainError, ValueError, OSError) as exc:
        print(f"bondperc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
