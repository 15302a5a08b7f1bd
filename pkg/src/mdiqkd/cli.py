"""Command-line front end: single-point analysis, loss sweeps, crossover
location, and attack-certification runs, all emitting CSV.

Flags may be preloaded from a plain ``key=value`` config file; explicit
flags override file values.  All output is deterministic for a fixed
invocation: identical runs produce byte-identical CSV.
"""

from __future__ import annotations

import argparse
import os
import sys

from .eve import certification_trials
from .security import OptimizerConfig, analyze
from .tables import ChannelParams, channel_table, eta_from_loss_db

SWEEP_COLUMNS = (
    "loss_db", "eta", "dim", "mode", "qs", "epsilon", "qp_bound",
    "r_sifted", "r_total", "feasible_found", "optimizer_seed",
)
CROSSOVER_COLUMNS = ("quantity", "loss_db", "bracket_lo", "bracket_hi", "found")
CERTIFY_COLUMNS = (
    "trial", "dim", "seed", "strength", "qs", "epsilon", "qp_direct", "qp_bound",
    "ok_identity", "ok_linearity", "ok_bell_split", "ok_phase_envelope",
    "ok_bar_expansion", "ok_branch_bounds", "ok_constraints", "ok_end_to_end",
    "all_ok",
)

CROSSOVER_RESOLUTION_DB = 0.05

_CONFIG_TYPES = {
    "loss_db": float,
    "loss_db_start": float,
    "loss_db_end": float,
    "loss_db_step": float,
    "dark": float,
    "dim": str,
    "mode": str,
    "quantity": str,
    "grid_points": int,
    "multistarts": int,
    "seed": int,
    "n": int,
    "out": str,
}


class UsageError(ValueError):
    """Invalid flag or config combination (exit code 2)."""


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _csv(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _parse_dims(value: str) -> tuple[int, ...]:
    if value == "both":
        return (2, 3)
    if value in ("2", "3"):
        return (int(value),)
    raise UsageError(f"invalid dim {value!r}; expected 2, 3, or both")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("QKD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"QKD_SEED must be an integer, got {env!r}") from exc
    return 0


def _optimizer_config(args, seed: int) -> OptimizerConfig:
    return OptimizerConfig(
        grid_points=args.grid_points,
        multistarts=args.multistarts,
        seed=seed,
    )


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        dest = key.strip().replace("-", "_")
        if dest not in _CONFIG_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown config key {key.strip()!r}")
        try:
            values[dest] = _CONFIG_TYPES[dest](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key.strip()!r}") from exc
    return values


def _point_row(loss_db: float, dark: float, dim: int, mode: str,
               config: OptimizerConfig) -> dict:
    eta = eta_from_loss_db(loss_db)
    table = channel_table(ChannelParams(eta=eta, dark=dark), dim)
    report = analyze(table, config, mode)
    err = report.error_report
    return {
        "loss_db": loss_db,
        "eta": eta,
        "dim": dim,
        "mode": mode,
        "qs": err.qs,
        "epsilon": err.epsilon,
        "qp_bound": err.qp_bound,
        "r_sifted": report.r_sifted,
        "r_total": report.r_total,
        "feasible_found": err.feasible_found,
        "optimizer_seed": config.seed,
    }


def _sweep_losses(start: float, end: float, step: float) -> list[float]:
    if step <= 0.0:
        raise UsageError("loss-db-step must be > 0")
    if start > end:
        raise UsageError("loss-db-start must be <= loss-db-end")
    n = int((end - start) / step + 1e-9) + 1
    return [start + i * step for i in range(n)]


def _cmd_analyze(args) -> int:
    dims = _parse_dims(args.dim)
    seed = _resolve_seed(args)
    config = _optimizer_config(args, seed)
    rows = [_point_row(args.loss_db, args.dark, d, args.mode, config)
            for d in sorted(dims)]
    _write(_csv(SWEEP_COLUMNS, rows), args.out)
    return 0


def _cmd_sweep(args) -> int:
    dims = sorted(_parse_dims(args.dim))
    seed = _resolve_seed(args)
    config = _optimizer_config(args, seed)
    losses = _sweep_losses(args.loss_db_start, args.loss_db_end, args.loss_db_step)
    rows = [
        _point_row(loss, args.dark, d, args.mode, config)
        for loss in losses
        for d in dims
    ]
    _write(_csv(SWEEP_COLUMNS, rows), args.out)
    return 0


def _rate_gap(loss_db: float, dark: float, quantity: str,
              config: OptimizerConfig) -> float:
    high = _point_row(loss_db, dark, 3, "uncharacterized", config)
    low = _point_row(loss_db, dark, 2, "uncharacterized", config)
    return high[quantity] - low[quantity]


def find_crossover(loss_db_start: float, loss_db_end: float, loss_db_step: float,
                   dark: float, quantity: str,
                   config: OptimizerConfig | None = None) -> dict:
    """Locate the first loss value where the qutrit-minus-qubit rate gap
    changes sign, to 0.05 dB, by scan plus bisection."""
    if quantity not in ("r_sifted", "r_total"):
        raise UsageError(f"invalid quantity {quantity!r}")
    if config is None:
        config = OptimizerConfig()
    losses = _sweep_losses(loss_db_start, loss_db_end, loss_db_step)
    gaps = [_rate_gap(loss, dark, quantity, config) for loss in losses]
    bracket = None
    for i in range(len(losses) - 1):
        if gaps[i] == 0.0:
            bracket = (losses[i], losses[i])
            break
        if gaps[i] * gaps[i + 1] < 0.0:
            bracket = (losses[i], losses[i + 1])
            break
    if bracket is None:
        if gaps and gaps[-1] == 0.0:
            bracket = (losses[-1], losses[-1])
        else:
            return {"quantity": quantity, "loss_db": float("nan"),
                    "bracket_lo": float("nan"), "bracket_hi": float("nan"),
                    "found": False}
    lo, hi = bracket
    gap_lo = _rate_gap(lo, dark, quantity, config) if lo != hi else 0.0
    while hi - lo > CROSSOVER_RESOLUTION_DB:
        mid = 0.5 * (lo + hi)
        gap_mid = _rate_gap(mid, dark, quantity, config)
        if gap_mid == 0.0:
            lo = hi = mid
            break
        if gap_lo * gap_mid < 0.0:
            hi = mid
        else:
            lo, gap_lo = mid, gap_mid
    return {"quantity": quantity, "loss_db": 0.5 * (lo + hi),
            "bracket_lo": lo, "bracket_hi": hi, "found": True}


def _cmd_crossover(args) -> int:
    seed = _resolve_seed(args)
    config = _optimizer_config(args, seed)
    result = find_crossover(args.loss_db_start, args.loss_db_end,
                            args.loss_db_step, args.dark, args.quantity, config)
    _write(_csv(CROSSOVER_COLUMNS, [result]), args.out)
    if not result["found"]:
        print(f"no {args.quantity} sign change in "
              f"[{args.loss_db_start}, {args.loss_db_end}] dB",
              file=sys.stderr)
    return 0


def _cmd_certify(args) -> int:
    if args.n < 1:
        raise UsageError("certify needs n >= 1")
    dims = sorted(_parse_dims(args.dim))
    seed = _resolve_seed(args)
    rows = []
    violations = []
    trial = 0
    for dim in dims:
        for report in certification_trials(args.n, seed=seed, dim=dim):
            row = {"trial": trial, "dim": dim, "seed": report.seed,
                   "strength": report.strength, "qs": report.qs,
                   "epsilon": report.epsilon, "qp_direct": report.qp_direct,
                   "qp_bound": report.qp_bound, "all_ok": report.all_ok}
            for name in CERTIFY_COLUMNS:
                if name.startswith("ok_"):
                    row[name] = getattr(report, name)
            rows.append(row)
            if not report.all_ok:
                violations.append(report.seed)
            trial += 1
    _write(_csv(CERTIFY_COLUMNS, rows), args.out)
    if violations:
        print("certification violations at attack seeds: "
              + ", ".join(str(s) for s in violations), file=sys.stderr)
        return 1
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dark", type=float, default=1e-5,
                        help="dark count probability per pulse per detector")
    parser.add_argument("--dim", default="both", choices=("2", "3", "both"))
    parser.add_argument("--grid-points", type=int, default=9)
    parser.add_argument("--multistarts", type=int, default=8)
    parser.add_argument("--seed", type=int, default=None,
                        help="optimizer/trial seed (falls back to QKD_SEED, then 0)")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--config", default=None,
                        help="key=value file supplying flag defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdiqkd",
        description="Key-rate certification and simulation for qutrit and "
                    "qubit measurement-device-independent QKD.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="single-point key-rate analysis")
    p.add_argument("--loss-db", type=float, default=0.0)
    p.add_argument("--mode", default="uncharacterized",
                   choices=("ideal", "uncharacterized"))
    _add_common(p)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("sweep", help="key rates over a loss range")
    p.add_argument("--loss-db-start", type=float, default=0.0)
    p.add_argument("--loss-db-end", type=float, default=40.0)
    p.add_argument("--loss-db-step", type=float, default=1.0)
    p.add_argument("--mode", default="uncharacterized",
                   choices=("ideal", "uncharacterized"))
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("crossover",
                       help="loss where the qutrit and qubit rates cross")
    p.add_argument("--loss-db-start", type=float, default=0.0)
    p.add_argument("--loss-db-end", type=float, default=40.0)
    p.add_argument("--loss-db-step", type=float, default=1.0)
    p.add_argument("--quantity", default="r_sifted",
                   choices=("r_sifted", "r_total"))
    _add_common(p)
    p.set_defaults(func=_cmd_crossover)

    p = sub.add_parser("certify", help="random-attack bound certification")
    p.add_argument("--n", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=_cmd_certify)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()

    # Pre-scan for --config so file values become defaults that explicit
    # flags then override.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config is not None:
            file_values = _load_config_file(known.config)
            for action in parser._subparsers._group_actions[0].choices.values():
                usable = {k: v for k, v in file_values.items()
                          if any(a.dest == k for a in action._actions)}
                action.set_defaults(**usable)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
