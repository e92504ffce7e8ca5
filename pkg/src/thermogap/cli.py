"""Command-line front end.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines (``#``
starts a comment); command-line flags override file values and unknown keys
are rejected.  Output is a JSON record ``{"meta": ..., "rows": [...]}`` or a
CSV table, with floats written at 17 significant digits.

Exit codes: 0 success, 1 malformed input, 2 validation failure, 3 closed gap
or non-unique steady state.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from . import bounds as kb
from .classical import KineticParamsKI, build_ki1d
from .models import (
    LMGModel,
    LMGParams,
    SweepSpec,
    ki_chain,
    ki_gap,
    ki_ground_sector_gap,
    ki_problem,
    run_sweep,
)
from .operators import GibbsState
from .optimize import CLASSICAL, QUANTUM, optimize, single_body_optimal
from .quantum import detailed_balance_residual
from .spectral import ZERO_RTOL, NonUniqueSteadyState
from .validate import all_passed, run_suite

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_GAP = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class ValidationFailed(Exception):
    def __init__(self, rows):
        self.rows = rows
        super().__init__("validation failed")


# -- parsing helpers ---------------------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included within half a step) or a comma-separated list."""
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if step == 0 or not all(map(math.isfinite, (start, stop, step))):
            raise UsageError(f"grid {text!r} needs a finite nonzero step")
        if (stop - start) * step < 0:
            raise UsageError(f"grid {text!r}: step points away from stop")
        count = int(math.floor((stop - start) / step + 0.5)) + 1
        return [start + i * step for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def read_config(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (x.strip() for x in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _plain(obj):
    """Convert numpy scalars/arrays to JSON-ready values (complex matrices split into real/imag)."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"real": _plain(obj.real.tolist()), "imag": _plain(obj.imag.tolist())}
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    return obj


def _json_text(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_text(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(str(obj))


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return _fmt(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(v, (dict, list)):
        return _json_text(v)
    if v is None:
        return ""
    return str(v)


def render(rows: list[dict], meta: dict, fmt: str) -> str:
    rows = [_plain(r) for r in rows]
    if fmt == "json":
        return _json_text({"meta": _plain(meta), "rows": rows}) + "\n"
    columns: list[str] = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_csv_cell(r.get(c)) for c in columns])
    return buf.getvalue()


# -- commands --------------------------------------------------------------------------------


def _lmg_params(a) -> LMGParams:
    return LMGParams(a.s, a.hz, a.jx, a.jy, a.beta_tilde, a.gamma)


def _kinetic(text: str) -> np.ndarray:
    """``identity``, three diagonal entries, or nine row-major real entries."""
    if text in ("identity", "canonical"):
        return np.eye(3)
    vals = [float(x) for x in text.split(",")]
    if len(vals) == 3:
        return np.diag(vals)
    if len(vals) == 9:
        return np.array(vals).reshape(3, 3)
    raise UsageError("kinetic matrix must be 'identity', 3 diagonal or 9 row-major entries")


def cmd_lmg_gap(a):
    p = _lmg_params(a)
    model = LMGModel(p)
    gamma = _kinetic(a.kinetic)
    rep = model.gap_report(gamma, method=a.method, zero_rtol=a.zero_rtol)
    if rep.non_unique:
        raise NonUniqueSteadyState(rep)
    row = {"s": float(p.s), "h_z": p.h_z, "J_x": p.j_x, "J_y": p.j_y, "beta_tilde": p.beta_tilde,
           "gap": rep.gap, "cost": rep.cost, "zero_mode_residual": rep.zero_mode_residual}
    if p.dim**2 <= 1024:
        row["db_residual"] = detailed_balance_residual(model.assembly(gamma))
    return [row]


def cmd_lmg_optimize(a):
    p = _lmg_params(a)
    model = LMGModel(p)
    res = optimize(model.problem(restarts=a.restarts, seed=a.seed, budget=a.budget, threads=a.threads))
    gamma = res.best_params
    return [{
        "s": float(p.s), "h_z": p.h_z, "J_x": p.j_x, "J_y": p.j_y, "beta_tilde": p.beta_tilde,
        "canonical_gap": res.canonical_gap, "optimized_gap": res.best_gap,
        "ratio": res.best_gap / res.canonical_gap, "cost": model.family.cost(gamma),
        "gamma_opt": np.asarray(gamma, dtype=complex), "evaluations": len(res.trace),
    }]


def _eta_eps(a):
    if (a.eta is None) == (a.epsilon is None):
        raise UsageError("give exactly one of --eta and --epsilon")
    if a.eta is not None:
        return a.eta, None
    return kb.eta_from_epsilon(a.epsilon), a.epsilon


def cmd_ki_gap(a):
    eta, eps = _eta_eps(a)
    chain = ki_chain(a.n, eta=a.eta, epsilon=a.epsilon)
    gen = build_ki1d(chain, KineticParamsKI(a.gamma, a.delta))
    if a.sector == "ground":
        rep = ki_ground_sector_gap(gen, a.n, zero_rtol=a.zero_rtol)
    else:
        rep = ki_gap(gen, a.n, method=a.method, zero_rtol=a.zero_rtol)
    if rep.non_unique:
        raise NonUniqueSteadyState(rep)
    row = {"N": a.n, "eta": eta, "epsilon": chain.epsilon, "delta": a.delta, "Gamma": a.gamma,
           "gap": rep.gap, "sector": str(rep.sector) if rep.sector is not None else "full"}
    if eta < 1:
        row.update(kb.analytic_bounds(eta, a.delta, a.n, a.gamma).as_dict())
    return [row]


def cmd_ki_bounds(a):
    eta, _ = _eta_eps(a)
    rows = []
    for d in parse_grid(a.delta_grid):
        b = kb.analytic_bounds(eta, d, a.n, a.gamma)
        rows.append({"delta": d, "Delta12": b.delta12, "Delta3": b.delta3, "Delta4": b.delta4,
                     "full_min": b.full_min})
    return rows


def cmd_ki_optimize(a):
    eta, _ = _eta_eps(a)
    res = optimize(ki_problem(eta, objective=a.objective, n=a.n, gamma=a.gamma, restarts=a.restarts,
                              seed=a.seed, budget=a.budget, threads=a.threads))
    row = {"eta": eta, "objective": a.objective, "delta_opt": float(res.best_params), "gap_opt": res.best_gap,
           "canonical_gap": res.canonical_gap}
    if 0 <= eta < 1:
        d_cf, g_cf = kb.optimal_coefficients(eta)
        row["stationary_delta"] = d_cf
        row["stationary_gap"] = g_cf * a.gamma
    return [row]


def cmd_single_body(a):
    rng = np.random.default_rng(a.seed)
    if a.energies:
        h = np.diag(parse_grid(a.energies))
    else:
        m = rng.normal(size=(a.dim, a.dim))
        h = m + m.T
    d = h.shape[0]
    g = GibbsState.from_hamiltonian(h, a.beta)
    kind = QUANTUM if a.kind == "quantum" else CLASSICAL
    opt = single_body_optimal(g, a.gamma, kind)
    expected = a.gamma * (d * d / (d * d - 1) if kind == QUANTUM else d / (d - 1))
    return [{"dim": d, "kind": a.kind, "beta": a.beta, "gap": opt.gap, "expected_gap": expected,
             "cost": opt.cost}]


def cmd_validate(a):
    results = run_suite(a.suite, a.seed)
    rows = [r.as_row() for r in results]
    if not all_passed(results):
        raise ValidationFailed(rows)
    return rows


_SWEEP_KEYS = {"s", "h_z", "J_x", "J_y", "beta_tilde", "Gamma", "optimize", "seed", "restarts",
               "N", "ed", "delta", "epsilon", "eta"}


def _set_value(key: str, text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"bad value for {key!r}: {text!r}") from None


def cmd_sweep(a):
    fixed = {}
    for item in (a.set or "").split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise UsageError(f"--set entries must be key=value, got {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        if k not in _SWEEP_KEYS:
            raise UsageError(f"unknown sweep parameter {k!r}; choose from {sorted(_SWEEP_KEYS)}")
        fixed[k] = _set_value(k, v)
    spec = SweepSpec(a.model, a.axis, parse_grid(a.grid), fixed, axis2=a.axis2,
                     grid2=parse_grid(a.grid2) if a.grid2 else [])
    return run_sweep(spec, threads=a.threads)


# -- parser ------------------------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(p):
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), help="output format (default from --out suffix, else json)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=_positive_int, default=None, help="worker threads (default THERMOGAP_THREADS or 1)")
    p.add_argument("--zero-rtol", type=float, default=ZERO_RTOL, help="relative tolerance for zero modes (gap commands)")


def _lmg_args(p):
    p.add_argument("--s", type=float, default=20.0, help="spin (half-integer)")
    p.add_argument("--hz", type=float, default=1.0)
    p.add_argument("--jx", type=float, default=1.0)
    p.add_argument("--jy", type=float, default=0.0)
    p.add_argument("--beta-tilde", type=float, default=5.0)
    p.add_argument("--gamma", type=float, default=1.0, help="rate unit")


def _ki_args(p, delta=True):
    p.add_argument("--n", type=int, default=10, help="chain length")
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    if delta:
        p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0, help="rate unit")


def _opt_args(p, budget):
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--budget", type=int, default=budget, help="evaluations per restart")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thermogap", description="Relaxation gaps of detailed-balance generators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lmg-gap", help="gap of an LMG Lindbladian")
    _common(p)
    _lmg_args(p)
    p.add_argument("--kinetic", default="identity", help="identity | a,b,c | nine row-major entries")
    p.add_argument("--method", choices=("auto", "sectors", "lanczos", "dense"), default="auto")
    p.set_defaults(func=cmd_lmg_gap)

    p = sub.add_parser("lmg-optimize", help="optimize LMG kinetic coefficients")
    _common(p)
    _lmg_args(p)
    _opt_args(p, 150)
    p.set_defaults(func=cmd_lmg_optimize)

    p = sub.add_parser("ki-gap", help="gap of the kinetic Ising chain")
    _common(p)
    _ki_args(p)
    p.add_argument("--sector", choices=("full", "ground"), default="full")
    p.add_argument("--method", choices=("sectors", "dense"), default="sectors")
    p.set_defaults(func=cmd_ki_gap)

    p = sub.add_parser("ki-bounds", help="variational bounds on a delta grid")
    _common(p)
    _ki_args(p, delta=False)
    p.add_argument("--delta-grid", default="-1:1:0.01")
    p.set_defaults(func=cmd_ki_bounds)

    p = sub.add_parser("ki-optimize", help="optimize the kinetic coefficient delta")
    _common(p)
    _ki_args(p, delta=False)
    _opt_args(p, 200)
    p.add_argument("--objective", choices=("delta12", "full_min", "ed"), default="delta12")
    p.set_defaults(func=cmd_ki_optimize)

    p = sub.add_parser("single-body-opt", help="optimal single-body generator")
    _common(p)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--energies", default="", help="comma list or grid of energies (overrides --dim)")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--kind", choices=("quantum", "classical"), default="quantum")
    p.add_argument("--gamma", type=float, default=1.0, help="rate unit")
    p.set_defaults(func=cmd_single_body)

    p = sub.add_parser("validate", help="run invariant suites")
    _common(p)
    p.add_argument("--suite", default="all")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="parameter sweep")
    _common(p)
    p.add_argument("--model", choices=("lmg", "ki"), required=False, default="ki")
    p.add_argument("--axis", default="delta")
    p.add_argument("--grid", default="")
    p.add_argument("--axis2", default=None)
    p.add_argument("--grid2", default="")
    p.add_argument("--set", default="", help="fixed parameters as k=v,k=v")
    p.set_defaults(func=cmd_sweep)
    return parser


_NOT_CONFIGURABLE = {"config", "out", "format", "func", "command", "help", "version"}


def _apply_config(parser, sub, argv):
    """Reparse ``argv`` with config-file values as defaults of the chosen subparser."""
    first = parser.parse_args(argv)
    if not first.config:
        return first
    try:
        values = read_config(first.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    actions = {a.dest: a for a in sub[first.command]._actions}
    defaults = {}
    for key, raw in values.items():
        if key in ("command",):
            if raw != first.command:
                raise UsageError(f"config is for command {raw!r}, not {first.command!r}")
            continue
        if key not in actions or key in _NOT_CONFIGURABLE:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        if raw.lower() == "none" and act.default is None:
            defaults[key] = None
            continue
        try:
            val = act.type(raw) if act.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {key!r}: {raw!r}") from exc
        if act.choices and val not in act.choices:
            raise UsageError(f"bad value for {key!r}: {raw!r}")
        defaults[key] = val
    sub[first.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def _config_echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIGURABLE or k == "command"}


_VALUE_FLAGS = ("--delta-grid", "--grid", "--grid2", "--energies", "--set", "--kinetic")


def _glue_values(argv):
    """Attach values such as ``-1:1:0.01`` to their flag so argparse does not read them as options."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and not argv[i + 1].startswith("--"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = _glue_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    sub = {name: p for a in parser._actions if isinstance(a, argparse._SubParsersAction) for name, p in a.choices.items()}
    try:
        args = _apply_config(parser, sub, argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.threads is None:
        env = os.environ.get("THERMOGAP_THREADS")
        if env is not None:
            try:
                args.threads = _positive_int(env)
            except (ValueError, argparse.ArgumentTypeError):
                print(f"error: THERMOGAP_THREADS must be a positive integer, got {env!r}", file=sys.stderr)
                return EXIT_USAGE
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")

    code = EXIT_OK
    try:
        rows = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailed as exc:
        rows, code = exc.rows, EXIT_VALIDATION
        failed = [r["check"] for r in rows if not r["passed"]]
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
    except (NonUniqueSteadyState, kb.ZeroTemperatureError) as exc:
        print(f"gap closed: {exc}", file=sys.stderr)
        return EXIT_GAP
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    meta = {"version": __version__, "seed": args.seed, "config": _config_echo(args)}
    text = render(rows, meta, fmt)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
