"""Command-line frontend.

Subcommands: simulate, density, predict, blocks, occupancy, partition,
voyage, cladogram, check.  Output is CSV by default (headers, UTF-8, '.'
decimal point) or JSON via --format json; floats are written with repr so
identical invocations produce byte-identical files.

Exit codes: 0 success (and every check passed), 1 internal error or a
failed check suite, 2 validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import bulk, stats
from . import cladogram as clad
from .density import log_density_pilgrim
from .exponent import CharacteristicExponent, ModelParams, continuity_check, index_from_continuity
from .monopoly import predictive_survival, simulate, taxes_only_survival
from .partitions import (
    OrderedPartition,
    esf_logprob,
    extract_ordered_partition,
    induced_partition_prob,
    ordered_partition_logprob,
    ordered_partition_total_prob,
    tv_distance_to_esf,
)
from .voyage import ibp_pattern_probs, simulate_voyage, voyage_pattern_probs

__all__ = ["main"]


class ValidationError(Exception):
    pass


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _emit(rows: list[dict], fieldnames: list[str], out: str | None, fmt: str) -> None:
    if fmt == "json":
        text = json.dumps([{k: r[k] for k in fieldnames} for r in rows])
        if out:
            with open(out, "w") as f:
                f.write(text + "\n")
        else:
            print(text)
        return
    f = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(f)
        w.writerow(fieldnames)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in fieldnames])
    finally:
        if out:
            f.close()


def _emit_obj(obj: dict, out: str | None, fmt: str) -> None:
    if fmt == "csv":
        rows = [{"key": k, "value": v} for k, v in obj.items()]
        _emit(rows, ["key", "value"], out, "csv")
        return
    text = json.dumps(obj)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)


def _read_times(path: str) -> np.ndarray:
    """Event times from a single-column file or a CSV with a 'time' column."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValidationError(f"{path}: empty history file")
    header = rows[0]
    try:
        float(header[0])
        col = 0
        data = rows
    except ValueError:
        if "time" not in header:
            raise ValidationError(f"{path}: no 'time' column and first row is not numeric")
        col = header.index("time")
        data = rows[1:]
    try:
        return np.array([float(r[col]) for r in data if r])
    except ValueError as e:
        raise ValidationError(f"{path}: {e}")


def _params(args) -> ModelParams:
    try:
        return ModelParams(rho=args.rho, beta=args.beta, nu=args.nu)
    except ValueError as e:
        raise ValidationError(str(e))


def _parse_blocks(text: str) -> OrderedPartition:
    blocks = []
    for part in text.split("|"):
        items = [s for s in part.replace(",", " ").split() if s]
        if not items:
            raise ValidationError("empty block in --blocks")
        blocks.append([int(s) for s in items])
    try:
        return OrderedPartition.of(blocks)
    except ValueError as e:
        raise ValidationError(str(e))


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    params = _params(args)
    _, ledger = simulate(args.n, params, args.seed)
    rows = ledger.pilgrim_table()
    _emit(rows, ["pilgrim", "time", "hotel_index", "funds", "toll_paid", "tax_paid",
                 "forfeit"], args.out, args.format)
    return 0


def _cmd_density(args) -> int:
    params = _params(args)
    times = _read_times(args.history)
    if args.family == "pilgrim":
        if params.beta == 0.0:
            val = log_density_pilgrim(times, params)
        else:
            from .density import log_density_general

            val = log_density_general(times, params.exponent())
        exponent = "generalized" if params.beta else "pilgrim"
    else:
        from .density import log_density_general

        val = log_density_general(times, CharacteristicExponent.gamma(params.rho))
        exponent = "gamma"
    _emit_obj({"n": int(times.size), "exponent": exponent, "log_density": val},
              args.out, args.format)
    return 0


def _cmd_predict(args) -> int:
    params = _params(args)
    times = _read_times(args.history)
    curve = predictive_survival(times, params)
    km = taxes_only_survival(times, 0.0)
    hi = float(times.max()) * 1.25
    grid = np.unique(np.concatenate((np.linspace(0.0, hi, args.grid), times)))
    rows = [
        {"t": float(t), "conditional_survival": float(curve.survival(t)),
         "kaplan_meier": float(km(t))}
        for t in grid
    ]
    _emit(rows, ["t", "conditional_survival", "kaplan_meier"], args.out, args.format)
    return 0


def _cmd_blocks(args) -> int:
    params = _params(args)
    mu_rec = stats.expected_blocks_recursion(args.n, params)
    mu_ex = stats.expected_blocks_exact(args.n, params)
    mc = se = None
    if args.reps:
        traj = np.empty((args.reps, args.n))
        for r in range(args.reps):
            K, _ = bulk.simulate_trajectory(args.n, params, args.seed, replicate=r)
            traj[r] = K
        mc = traj.mean(axis=0)
        se = traj.std(axis=0, ddof=1) / np.sqrt(args.reps)
    rows = []
    for m in range(args.n):
        row = {"n": m + 1, "mu_recursion": float(mu_rec[m]), "mu_exact": float(mu_ex[m])}
        if mc is not None:
            row["mu_mc"] = float(mc[m])
            row["mc_se"] = float(se[m])
        rows.append(row)
    fields = list(rows[0].keys())
    _emit(rows, fields, args.out, args.format)
    return 0


def _cmd_occupancy(args) -> int:
    params = _params(args)
    if args.reps < 2:
        raise ValidationError("occupancy needs --reps >= 2")
    bs = bulk.simulate_block_stats(args.n, params, args.reps, args.seed, j_max=args.jmax)
    spec = stats.occupancy_spectrum(bs.spectrum)
    _emit(spec.rows(), ["size", "mean_count", "var_count", "dispersion", "se_mean"],
          args.out, args.format)
    return 0


def _cmd_partition(args) -> int:
    params = _params(args)
    if args.blocks:
        A = _parse_blocks(args.blocks)
    elif args.history:
        A = extract_ordered_partition(_read_times(args.history))
    else:
        raise ValidationError("partition needs --blocks or --history")
    B = A.partition()
    obj = {
        "ordered_blocks": A.to_lists(),
        "blocks": B.to_lists(),
        "ordered_logprob": ordered_partition_logprob(A, params),
        "partition_prob": induced_partition_prob(B, params),
        "esf_logprob_theta_rho": esf_logprob(B, params.rho),
    }
    _emit_obj(obj, args.out, args.format)
    return 0


def _cmd_voyage(args) -> int:
    params = _params(args)
    _, fa = simulate_voyage(args.n, args.horizon, params, args.seed)
    inc = fa.incidence_matrix()
    rows = []
    for i in range(args.n):
        row = {"pilgrim": i + 1}
        for j in range(fa.k):
            row[f"feature_{j + 1}"] = int(inc[i, j])
        rows.append(row)
    fields = ["pilgrim"] + [f"feature_{j + 1}" for j in range(fa.k)]
    _emit(rows, fields, args.out, args.format)
    return 0


def _cmd_cladogram(args) -> int:
    if args.n < 2:
        raise ValidationError("cladogram needs --n >= 2")
    tree = clad.sample_cladogram(args.n, args.beta, lambda2=args.lambda2, seed=args.seed)
    text = clad.to_newick(tree)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    if args.stats_out:
        w = clad.beta_split_weights(args.n, args.beta)
        rows = [{"left_size": i + 1, "probability": float(w[i])} for i in range(args.n - 1)]
        _emit(rows, ["left_size", "probability"], args.stats_out, args.format)
    return 0


def _check_continuity(args) -> tuple[bool, list[str]]:
    n_max = max(args.n, 3)
    rep_p = continuity_check(CharacteristicExponent.pilgrim(args.rho), n_max=n_max)
    rep_g = continuity_check(CharacteristicExponent.gamma(args.rho), n_max=n_max)
    c = args.rho / (1.0 + args.rho)
    idx = index_from_continuity(1.0, c, min(n_max, 20))
    target = (np.array([float(v) for v in
                        CharacteristicExponent.pilgrim(args.rho).index(min(n_max, 20))[1:]])
              / (1.0 / args.rho))
    rec_err = float(np.max(np.abs(idx - target) / target))
    ok = rep_p.max_violation < 1e-10 and rep_g.max_violation > 1e-3 and rec_err < 1e-8
    lines = [
        f"harmonic index max violation (n<={n_max}): {rep_p.max_violation:.3e}",
        f"gamma index max violation (n<={n_max}): {rep_g.max_violation:.3e}",
        f"index reconstruction relative error: {rec_err:.3e}",
    ]
    return ok, lines


def _check_normalization(args) -> tuple[bool, list[str]]:
    lines = []
    ok = True
    for beta in (-0.5, 0.0, 1.0):
        for rho in (0.5, 1.0, 4.0):
            params = ModelParams(rho=rho, beta=beta)
            worst = max(abs(ordered_partition_total_prob(n, params) - 1.0)
                        for n in range(1, 6))
            ok &= worst < 1e-10
            lines.append(f"ordered-partition mass, rho={rho} beta={beta}: |1-sum|={worst:.2e}")
    from .exponent import splitting_normalization

    worst = max(abs(splitting_normalization(ModelParams(rho=args.rho, beta=args.beta), n) - 1.0)
                for n in range(1, 31))
    ok &= worst < 1e-10
    lines.append(f"splitting-rule binomial normalization (n<=30): |1-sum|={worst:.2e}")
    return ok, lines


def _check_theorem3(args) -> tuple[bool, list[str]]:
    lines = []
    ok = True
    n = min(args.n, 6) if args.n else 6
    for rho in ([args.rho] if args.rho != 1.0 else [0.5, 1.0, 4.0]):
        tv = tv_distance_to_esf(n, ModelParams(rho=rho, beta=1.0))
        ok &= tv < 1e-10
        lines.append(f"max TV distance to the Ewens formula (n={n}, rho={rho}): {tv:.2e}")
    return ok, lines


def _check_theorem4(args) -> tuple[bool, list[str]]:
    params = _params(args)
    gamma, theta, alpha = params.nu / params.rho, params.rho, 0.0
    worst = 0.0
    for n in (1, 2, 3):
        pv = voyage_pattern_probs(n, params, horizon=1.0)
        pi = ibp_pattern_probs(n, gamma, theta, alpha)
        keys = set(pv) | set(pi)
        worst = max(worst, max(abs(pv.get(k, 0.0) - pi.get(k, 0.0)) for k in keys))
    ok = worst < 1e-12
    lines = [f"max feature-pattern probability gap (n<=3): {worst:.2e}"]
    return ok, lines


def _cmd_check(args) -> int:
    suites = {
        "continuity": _check_continuity,
        "normalization": _check_normalization,
        "theorem3": _check_theorem3,
        "theorem4": _check_theorem4,
    }
    if args.suite not in suites:
        raise ValidationError(f"unknown suite {args.suite!r}; choose from {sorted(suites)}")
    ok, lines = suites[args.suite](args)
    for line in lines:
        print(line)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rho", type=float, default=1.0, help="baseline toll parameter (> 0)")
    common.add_argument("--beta", type=float, default=0.0, help="tie-structure parameter (> -1)")
    common.add_argument("--nu", type=float, default=1.0, help="time scale (> 0)")
    common.add_argument("--n", type=int, default=100, help="number of units")
    common.add_argument("--seed", type=int, default=0, help="64-bit seed")
    common.add_argument("--reps", type=int, default=0, help="Monte Carlo replicates")
    common.add_argument("--out", type=str, default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="pilgrim",
                                description="pilgrim-process simulation and exact checks")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common],
                   help="simulate event times and the money ledger")

    d = sub.add_parser("density", parents=[common], help="log-density of a times file")
    d.add_argument("--history", required=True, help="CSV of event times")
    d.add_argument("--family", choices=("pilgrim", "gamma"), default="pilgrim")

    pr = sub.add_parser("predict", parents=[common],
                        help="conditional survival curve with Kaplan-Meier overlay")
    pr.add_argument("--history", required=True, help="CSV of observed times")
    pr.add_argument("--grid", type=int, default=200, help="evaluation grid size")

    sub.add_parser("blocks", parents=[common],
                   help="expected block counts: recursion, exact, Monte Carlo")

    oc = sub.add_parser("occupancy", parents=[common], help="size-j hotel count spectrum")
    oc.add_argument("--jmax", type=int, default=10)

    pa = sub.add_parser("partition", parents=[common],
                        help="ordered/unordered partition probabilities and the Ewens formula")
    pa.add_argument("--blocks", type=str, default=None, help="e.g. '1 2|3' (ranked blocks)")
    pa.add_argument("--history", type=str, default=None, help="CSV of event times")

    vo = sub.add_parser("voyage", parents=[common],
                        help="recurrent-event incidence matrix")
    vo.add_argument("--horizon", type=float, default=1.0)

    cl = sub.add_parser("cladogram", parents=[common], help="sample a tree as Newick text")
    cl.add_argument("--lambda2", type=float, default=1.0, help="rate of the two-leaf split")
    cl.add_argument("--stats-out", type=str, default=None, help="write split probabilities here")

    ch = sub.add_parser("check", parents=[common], help="exact verification suites")
    ch.add_argument("--suite", required=True,
                    help="continuity | normalization | theorem3 | theorem4")
    return p


_HANDLERS = {
    "simulate": _cmd_simulate,
    "density": _cmd_density,
    "predict": _cmd_predict,
    "blocks": _cmd_blocks,
    "occupancy": _cmd_occupancy,
    "partition": _cmd_partition,
    "voyage": _cmd_voyage,
    "cladogram": _cmd_cladogram,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # internal failure
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
