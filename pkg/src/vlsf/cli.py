"""Command-line front end.

Exit codes: 0 on success, 1 on computation errors, 2 on usage errors.  All
numeric output is CSV with a fixed "%.12g" float format, so a rerun with the
same flags and seed is byte-identical regardless of the worker count
(``--threads`` or the VLSF_THREADS environment variable).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .errors import VlsfError


def _fmt(value) -> str:
    return "%.12g" % value


def _parse_pair(args):
    from .channel import optimize_common_input, parse_channel

    w1 = parse_channel(args.channel1)
    w2 = parse_channel(args.channel2)
    return optimize_common_input(w1, w2, tolerance=args.maximizer_tol)


def _add_pair_flags(sub):
    sub.add_argument("--channel1", required=True, help="channel spec (bsc:p, bec:e, zchan:d, JSON, or path)")
    sub.add_argument("--channel2", required=True, help="channel spec for the second decoder")
    sub.add_argument(
        "--maximizer-tol",
        type=float,
        default=1e-4,
        help="allowed sup-norm gap between the two capacity-achieving inputs",
    )


def _add_thread_flag(sub):
    sub.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads for Monte Carlo (default: VLSF_THREADS or 1)",
    )


# ---------------------------------------------------------------------------
# channel
# ---------------------------------------------------------------------------


def _cmd_channel_validate(args) -> int:
    from .channel import parse_channel

    w = parse_channel(args.channel)
    print(f"ok: {w.input_size} inputs, {w.output_size} outputs, rows sum to 1")
    return 0


def _cmd_channel_info(args) -> int:
    from .channel import InputDistribution, channel_statistics, parse_channel

    unit = math.log(2.0) if args.bits else 1.0
    name = "bits" if args.bits else "nats"
    if args.channel2 is None:
        w = parse_channel(args.channel1)
        stats = channel_statistics(InputDistribution.uniform(w.input_size), w)
        print(f"channel: {w.input_size}x{w.output_size}")
        print(f"uniform-input mutual information: {_fmt(stats.mutual_information / unit)} {name}")
        print(f"uniform-input density variance:   {_fmt(stats.info_variance / unit**2)} {name}^2")
        return 0
    pair = _parse_pair(args)
    print(f"common input: {[round(float(v), 10) for v in pair.pstar.probs]}")
    print(f"maximizer gap: {_fmt(pair.common_maximizer_gap)}")
    print(f"capacity: {_fmt(pair.capacity / unit)} {name}  (link rates {_fmt(pair.c1 / unit)}, {_fmt(pair.c2 / unit)})")
    print(f"dispersions: {_fmt(pair.v1 / unit**2)}, {_fmt(pair.v2 / unit**2)} {name}^2")
    print(f"dispersion ratios: rho1={_fmt(pair.rho1)}, rho2={_fmt(pair.rho2)}")
    return 0


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def _cmd_bounds_converse(args) -> int:
    from .converse import max_log_codebook

    pair = _parse_pair(args)
    mode = "clt" if args.clt else "exact"
    result = max_log_codebook(
        args.l,
        args.eps,
        pair,
        delta=args.delta,
        tail_mode=mode,
        step=args.step,
    )
    print("l,log_m_nats,log_m_bits,mode,certified")
    print(
        ",".join(
            [
                _fmt(args.l),
                _fmt(result.log_m),
                _fmt(result.log_m / math.log(2.0)),
                mode,
                str(result.certified).lower(),
            ]
        )
    )
    return 0


def _cmd_bounds_achiev(args) -> int:
    from .achieve import design_achievable_point

    pair = _parse_pair(args)
    point = design_achievable_point(
        pair,
        args.lprime,
        args.eps,
        r=args.r,
        b1=args.b1,
        trials=args.trials,
        seed=args.seed,
        threads=args.threads,
    )
    print("l,log_m_nats,eps_bound,mean_max_tau,stderr,seed")
    print(
        ",".join(
            [
                _fmt(point.point.avg_blocklength),
                _fmt(point.log_m),
                _fmt(point.error_bound),
                _fmt(point.estimate.mean_max_tau),
                _fmt(point.estimate.std_error),
                str(args.seed),
            ]
        )
    )
    if not point.budget_respected:
        print("warning: measured E[max tau] exceeded l'", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------


def _cmd_asym_curve(args) -> int:
    import numpy as np

    from .asym import second_order_curves

    pair = _parse_pair(args)
    grid = np.linspace(args.lmin, args.lmax, args.points)
    lower, upper = second_order_curves(pair, args.eps, grid)
    print("l,lower_logm,upper_logm")
    for l, lo, hi in zip(grid, lower, upper):
        print(f"{_fmt(l)},{_fmt(lo)},{_fmt(hi)}")
    return 0


def _cmd_asym_critical(args) -> int:
    from .asym import critical_epsilon_symmetric

    print(_fmt(critical_epsilon_symmetric()))
    return 0


# ---------------------------------------------------------------------------
# simulate / randwalk
# ---------------------------------------------------------------------------


def _cmd_simulate_vlsf(args) -> int:
    from .achieve import SimConfig, simulate_stopping

    pair = _parse_pair(args)
    gamma1 = args.gamma if args.gamma1 is None else args.gamma1
    gamma2 = args.gamma if args.gamma2 is None else args.gamma2
    if gamma1 is None or gamma2 is None:
        raise UsageError("pass --gamma or both --gamma1 and --gamma2")
    cfg = SimConfig(
        gamma1=gamma1,
        gamma2=gamma2,
        q=args.q,
        trials=args.trials,
        seed=args.seed,
        max_steps=args.max_steps,
    )
    est = simulate_stopping(pair, cfg, threads=args.threads)
    print("l,log_m_nats,eps_bound,mean_max_tau,stderr,seed")
    print(
        ",".join(
            [
                _fmt((1.0 - args.q) * est.mean_max_tau),
                "nan",
                "nan",
                _fmt(est.mean_max_tau),
                _fmt(est.std_error),
                str(args.seed),
            ]
        )
    )
    if not est.valid:
        print(
            f"warning: {est.censored_fraction:.3%} of trials hit the step cap; estimates flagged",
            file=sys.stderr,
        )
    return 0


def _load_walk_spec(path: str):
    from .walks import WalkSpec

    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return WalkSpec(tuple((a[0], a[1], a[2]) for a in obj["atoms"]), r_moment=obj.get("r_moment", 3))


def _cmd_randwalk_verify(args) -> int:
    from .walks import expansion_upper_bound, simulate_walk_pair

    spec = _load_walk_spec(args.spec)
    gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
    if not gammas:
        raise UsageError("--gammas must list at least one threshold")
    print("gamma,mean_max,stderr,bound")
    for gamma in gammas:
        stats = simulate_walk_pair(spec, gamma, args.trials, args.seed, threads=args.threads)
        bound = expansion_upper_bound(spec, gamma)
        print(f"{_fmt(gamma)},{_fmt(stats.mean_max)},{_fmt(stats.std_error)},{_fmt(bound)}")
    return 0


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------


def _solve_budget(l_target: float, eps: float) -> float:
    """Nominal per-trial budget l' whose discounted value recovers l_target."""
    disc = l_target * l_target - 4.0 * l_target * (1.0 - eps)
    if disc <= 0.0:
        raise VlsfError(f"target blocklength {l_target} too small for eps={eps}")
    return (l_target + math.sqrt(disc)) / (2.0 * (1.0 - eps))


def _cmd_experiment_run(args) -> int:
    import numpy as np

    from .achieve import design_achievable_point
    from .asym import second_order_curves
    from .converse import max_log_codebook

    grid = [float(v) for v in args.l.split(",") if v.strip()]
    if not grid:
        raise UsageError("the --l grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("the --l grid must be strictly increasing")
    pair = _parse_pair(args)
    mode = "clt" if args.clt else "exact"
    rows = []
    for i, l_target in enumerate(grid):
        conv = max_log_codebook(
            l_target, args.eps, pair, delta=args.delta, tail_mode=mode, step=args.step
        )
        point = design_achievable_point(
            pair,
            _solve_budget(l_target, args.eps),
            args.eps,
            r=args.r,
            b1=args.b1,
            trials=args.trials,
            seed=args.seed + i,
            threads=args.threads,
        )
        lower, upper = second_order_curves(pair, args.eps, np.array([l_target]))
        rows.append(
            ",".join(
                [
                    _fmt(l_target),
                    _fmt(conv.log_m),
                    _fmt(point.log_m),
                    _fmt(point.l_std_error),
                    _fmt(float(lower[0])),
                    _fmt(float(upper[0])),
                    _fmt(args.eps),
                    str(args.seed),
                ]
            )
        )
    labels = (
        f"# converse_mode={mode} converse_certified={str(conv.certified).lower()} "
        "achiev=monte-carlo-uncertified asym=asymptotic-only\n"
    )
    header = "l,converse_logm,achiev_logm,achiev_stderr,asym_lower,asym_upper,eps,seed\n"
    body = labels + header + "\n".join(rows) + "\n"
    tmp = args.out + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
        os.replace(tmp, args.out)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    _write_plot_script(args.out)
    print(f"wrote {args.out} and {args.out}.gp")
    return 0


def _write_plot_script(csv_path: str) -> None:
    script = "\n".join(
        [
            "# gnuplot script; run: gnuplot -p " + csv_path + ".gp",
            'set datafile separator ","',
            'set xlabel "average blocklength l"',
            'set ylabel "log M (nats)"',
            "set key left top",
            f'plot "{csv_path}" using 1:2 with linespoints title "converse", \\',
            f'     "{csv_path}" using 1:3 with linespoints title "achievable", \\',
            f'     "{csv_path}" using 1:5 with lines title "asym lower", \\',
            f'     "{csv_path}" using 1:6 with lines title "asym upper"',
            "",
        ]
    )
    with open(csv_path + ".gp", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(script)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlsf",
        description="Bounds and simulators for two-decoder stop-feedback coding",
    )
    top = parser.add_subparsers(dest="command", required=True)

    chan = top.add_parser("channel", help="inspect channel definitions")
    chan_sub = chan.add_subparsers(dest="subcommand", required=True)
    validate = chan_sub.add_parser("validate", help="parse and validate one channel")
    validate.add_argument("--channel", required=True)
    validate.set_defaults(func=_cmd_channel_validate)
    info = chan_sub.add_parser("info", help="print channel statistics")
    info.add_argument("--channel1", required=True)
    info.add_argument("--channel2", default=None)
    info.add_argument("--maximizer-tol", type=float, default=1e-4)
    info.add_argument("--bits", action="store_true", help="display rates in bits")
    info.set_defaults(func=_cmd_channel_info)

    bounds = top.add_parser("bounds", help="nonasymptotic bounds")
    bounds_sub = bounds.add_subparsers(dest="subcommand", required=True)
    conv = bounds_sub.add_parser("converse", help="upper bound on log M at a target l")
    _add_pair_flags(conv)
    conv.add_argument("--eps", type=float, required=True)
    conv.add_argument("--l", type=float, required=True)
    group = conv.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="certified tails (default)")
    group.add_argument("--clt", action="store_true", help="fast approximate tails")
    conv.add_argument("--step", type=float, default=1e-5, help="value grid step in nats")
    conv.add_argument("--delta", type=float, default=1e-3, help="threshold slack in nats")
    conv.set_defaults(func=_cmd_bounds_converse)
    ach = bounds_sub.add_parser("achiev", help="achievable point from the design recipe")
    _add_pair_flags(ach)
    _add_thread_flag(ach)
    ach.add_argument("--eps", type=float, required=True)
    ach.add_argument("--lprime", type=float, required=True, help="per-trial budget l'")
    ach.add_argument("--b1", type=float, default=1.0)
    ach.add_argument("--r", type=int, default=3)
    ach.add_argument("--trials", type=int, default=10_000)
    ach.add_argument("--seed", type=int, default=0)
    ach.set_defaults(func=_cmd_bounds_achiev)

    asym = top.add_parser("asymptotics", help="second-order expansion")
    asym_sub = asym.add_subparsers(dest="subcommand", required=True)
    curve = asym_sub.add_parser("curve", help="lower/upper asymptotic curves")
    _add_pair_flags(curve)
    curve.add_argument("--eps", type=float, required=True)
    curve.add_argument("--lmin", type=float, required=True)
    curve.add_argument("--lmax", type=float, required=True)
    curve.add_argument("--points", type=int, default=20)
    curve.set_defaults(func=_cmd_asym_curve)
    crit = asym_sub.add_parser("critical-eps", help="sign change of the symmetric bracket")
    crit.set_defaults(func=_cmd_asym_critical)

    sim = top.add_parser("simulate", help="Monte Carlo simulators")
    sim_sub = sim.add_subparsers(dest="subcommand", required=True)
    vlsf_sim = sim_sub.add_parser("vlsf", help="two-decoder stopping-time simulation")
    _add_pair_flags(vlsf_sim)
    _add_thread_flag(vlsf_sim)
    vlsf_sim.add_argument("--gamma", type=float, default=None, help="common threshold")
    vlsf_sim.add_argument("--gamma1", type=float, default=None)
    vlsf_sim.add_argument("--gamma2", type=float, default=None)
    vlsf_sim.add_argument("--q", type=float, default=0.0, help="early-stop coin bias")
    vlsf_sim.add_argument("--trials", type=int, default=10_000)
    vlsf_sim.add_argument("--seed", type=int, default=0)
    vlsf_sim.add_argument("--max-steps", type=int, default=None)
    vlsf_sim.set_defaults(func=_cmd_simulate_vlsf)

    walk = top.add_parser("randwalk", help="two-walk crossing experiments")
    walk_sub = walk.add_subparsers(dest="subcommand", required=True)
    verify = walk_sub.add_parser("verify", help="mean max crossing vs expansion bound")
    _add_thread_flag(verify)
    verify.add_argument("--spec", required=True, help="JSON file with {'atoms': [[w,z,p],...]}")
    verify.add_argument("--gammas", required=True, help="comma-separated thresholds")
    verify.add_argument("--trials", type=int, default=10_000)
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(func=_cmd_randwalk_verify)

    exp = top.add_parser("experiment", help="full bound/simulation sweeps")
    exp_sub = exp.add_subparsers(dest="subcommand", required=True)
    run = exp_sub.add_parser("run", help="converse/achievable/asymptotic sweep to CSV")
    _add_pair_flags(run)
    _add_thread_flag(run)
    run.add_argument("--eps", type=float, required=True)
    run.add_argument("--l", required=True, help="comma-separated, strictly increasing grid")
    run.add_argument("--trials", type=int, default=10_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="CSV output path")
    group = run.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true")
    group.add_argument("--clt", action="store_true")
    run.add_argument("--step", type=float, default=1e-5)
    run.add_argument("--delta", type=float, default=1e-3)
    run.add_argument("--b1", type=float, default=1.0)
    run.add_argument("--r", type=int, default=3)
    run.set_defaults(func=_cmd_experiment_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"usage error: {exc}\n")
    except (VlsfError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
