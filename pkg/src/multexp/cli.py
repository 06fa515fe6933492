"""Command line front end.

Every report is a JSON object with sorted keys carrying the seed, the
effective configuration, the tool version and a short description of the
computed quantity.  Exit codes: 0 success, 2 malformed input, 3 budget
overrun.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

from . import __version__
from .constructions import auto_depth, build_prescribed
from .correspondence import estimate_gamma, omega_times_from_gamma
from .exterior import BudgetExceeded as ExteriorBudget
from .exterior import check_rank2_bound
from .hyperplane import parse_coefficient, parse_spec, predict, verify_by_sampling
from .lattice import apply_flow, lattice_report, u_of_y
from .nondiv import BudgetExceeded as NondivBudget
from .nondiv import borel_cantelli_probe, equal_split_flows, escape_table, sublevel_fraction
from .numerics import DEFAULT_BITS, PrecisionReal
from .polynomials import parse_map, parse_polynomial
from .witnesses import BudgetExceeded as WitnessBudget
from .witnesses import estimate

EXIT_OK = 0
EXIT_SPEC = 2
EXIT_BUDGET = 3

BUDGET_ERRORS = (WitnessBudget, ExteriorBudget, NondivBudget)


class SpecError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# parsing helpers


def parse_point(text: str, bits: int = DEFAULT_BITS, field: str = "point") -> tuple:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise SpecError(field, "empty")
    out = []
    for i, p in enumerate(parts):
        try:
            c = parse_coefficient(p, bits)
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"{field}[{i}]", str(exc)) from None
        out.append(c.value)
    return tuple(out)


def parse_flow(text: str, field: str = "t") -> tuple:
    try:
        vals = tuple(Fraction(p.strip()) for p in text.split(",") if p.strip())
    except (ValueError, ZeroDivisionError):
        raise SpecError(field, f"cannot parse {text!r}") from None
    if not vals:
        raise SpecError(field, "empty")
    if any(v < 0 for v in vals):
        raise SpecError(field, "entries must be nonnegative")
    return vals


def parse_ladder(text: str, field: str = "eps-ladder") -> tuple[float, ...]:
    """``0.25,0.125`` or a dyadic range ``2^-2..2^-8``."""
    s = text.strip()
    try:
        if ".." in s and "^" in s:
            lo, hi = s.split("..")
            b1, e1 = lo.split("^")
            b2, e2 = hi.split("^")
            if float(b1) != float(b2):
                raise ValueError
            base = float(b1)
            a, b = int(e1), int(e2)
            step = 1 if b >= a else -1
            return tuple(base ** k for k in range(a, b + step, step))
        vals = tuple(float(Fraction(p.strip())) for p in s.split(",") if p.strip())
    except (ValueError, ZeroDivisionError):
        raise SpecError(field, f"cannot parse {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise SpecError(field, "entries must be positive")
    return vals


def read_config(path: str) -> dict:
    """Plain key=value lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecError(f"config line {lineno}", "expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


# ---------------------------------------------------------------------------
# JSON emission


def _clean(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, Fraction):
        return str(obj) if obj.denominator != 1 else int(obj)
    if isinstance(obj, PrecisionReal):
        return obj.to_decimal(40)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def envelope(command: str, args: argparse.Namespace, quantity: str, result: dict) -> dict:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "output", "config") and v is not None}
    return {
        "tool": "multexp",
        "version": __version__,
        "command": command,
        "seed": args.seed,
        "config": config,
        "quantity": quantity,
        "result": result,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_estimate(args):
    y = parse_point(args.point, args.mantissa_bits)
    kw = {}
    if args.height_cap is not None:
        kw["height_cap"] = args.height_cap
    est = estimate(args.mode, y, args.qmax, **kw)
    quantity = {
        "omega": "omega(y), sup-norm linear form exponent",
        "omegax": "omega_times(y), multiplicative linear form exponent",
        "sigma": "sigma(a), simultaneous approximation exponent",
    }[args.mode]
    return quantity, est.to_json(), None


def cmd_construct(args):
    try:
        tau = Fraction(args.tau)
    except (ValueError, ZeroDivisionError):
        raise SpecError("tau", f"cannot parse {args.tau!r}") from None
    depth = args.depth if args.depth is not None else auto_depth(tau)
    try:
        num = build_prescribed(tau, depth)
    except ValueError as exc:
        raise SpecError("tau/depth", str(exc)) from None
    from .constructions import measured_sigma

    res = num.to_json()
    res["measured_sigma"] = measured_sigma(num)
    return "number with prescribed simultaneous exponent tau", res, None


def cmd_flow(args):
    y = parse_point(args.point, args.mantissa_bits)
    t = parse_flow(args.t)
    if len(t) != len(y):
        raise SpecError("t", f"needs {len(y)} entries")
    L = apply_flow(u_of_y(y), t, args.mantissa_bits)
    eps = parse_ladder(args.eps_ladder) if args.eps_ladder else ()
    return "shortest vector of g_t u_y Z^(n+1)", lattice_report(L, eps), None


def cmd_gamma(args):
    y = parse_point(args.point, args.mantissa_bits)
    table = estimate_gamma(y, args.tmax)
    from_gamma = omega_times_from_gamma(table)
    direct = estimate("omegax", y, args.qmax, height_cap=args.qmax)
    diff = None
    if not (from_gamma == math.inf or direct.window_estimate == math.inf):
        diff = abs(float(from_gamma) - direct.window_estimate)
    res = {
        "gamma_table": table.to_json(),
        "omega_times_from_gamma": from_gamma,
        "direct_estimate": direct.window_estimate,
        "direct_q_max": args.qmax,
        "abs_difference": diff,
    }
    return "gamma_k(y) and the omega_times(y) assembled from them", res, None


def cmd_hyperplane(args):
    try:
        spec = parse_spec(args.coeffs)
    except ValueError as exc:
        raise SpecError("coeffs", str(exc)) from None
    pred = predict(spec)
    res = {"spec": spec.to_json(), "prediction": pred.to_json()}
    csv_text = None
    if args.verify:
        sub = None
        if args.submanifold:
            try:
                sub = parse_map(args.submanifold)
            except ValueError as exc:
                raise SpecError("submanifold", str(exc)) from None
        rep = verify_by_sampling(spec, args.samples, args.qmax, submanifold=sub, seed=args.seed,
                                 tolerance=args.tolerance)
        res["verification"] = rep.to_json()
        csv_text = rep.to_csv()
    return "omega_times(L) and omega(L) for an affine hyperplane", res, csv_text


def cmd_exterior_check(args):
    import random

    rng = random.Random(args.seed)
    a_list = [tuple(Fraction(rng.randint(-50, 50), rng.randint(1, 20)) for _ in range(args.n))
              for _ in range(args.a_count)]
    viol = check_rank2_bound(args.n, args.j, args.bound, a_list)
    res = {
        "n": args.n, "j": args.j, "bound": args.bound, "a_count": args.a_count,
        "violations": len(viol),
        "examples": [{"a": [str(x) for x in v.a], "w": v.w.to_json(), "norm_sq": str(v.norm_sq)}
                     for v in viol[:10]],
    }
    print(f"violations: {len(viol)}", file=sys.stderr)
    return "||R_0 c(w)|| >= 1 for integer multivectors of degree j >= 2", res, None


def cmd_nondiv(args):
    eps = parse_ladder(args.eps_ladder)
    try:
        f = parse_map(args.curve)
    except ValueError as exc:
        raise SpecError("curve", str(exc)) from None
    if args.kind == "sublevel":
        if f.dim != 1:
            raise SpecError("curve", "sublevel probes take a single polynomial")
        try:
            rep = sublevel_fraction(parse_polynomial(args.curve, f.nvars), eps_ladder=eps,
                                    samples=args.samples, seed=args.seed)
        except ValueError as exc:
            raise SpecError("curve", str(exc)) from None
        return "sublevel measure of |f| < eps on the unit box", rep.to_json(), _sublevel_csv(rep)
    if args.kind == "borel-cantelli":
        rep = borel_cantelli_probe(f, args.k, args.d, args.tmax, samples=args.samples,
                                   seed=args.seed)
        return "partial sums of escape measures over admissible flows", rep.to_json(), None
    flows = equal_split_flows(f.dim, range(0, args.tmax + 1))
    rep = escape_table(f, flows, eps, samples=args.samples, seed=args.seed)
    return "escape fraction of g_t u_f(x) Z^(n+1) from K_eps", rep.to_json(), rep.to_csv()


def _sublevel_csv(rep) -> str:
    lines = ["epsilon,fraction,ci_halfwidth,samples"]
    for e, p, h in zip(rep.eps_ladder, rep.fractions, rep.halfwidths):
        lines.append(f"{e!r},{p!r},{h!r},{rep.samples}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mantissa-bits", type=int, default=DEFAULT_BITS)
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; work runs sequentially")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", default=None)
    common.add_argument("--config", default=None, help="key=value file")

    p = argparse.ArgumentParser(prog="multexp", description="Diophantine exponent experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("estimate", parents=[common])
    s.add_argument("--mode", choices=("omega", "omegax", "sigma"), required=True)
    s.add_argument("--point", required=True)
    s.add_argument("--qmax", type=int, required=True)
    s.add_argument("--height-cap", type=int, default=None)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("construct", parents=[common])
    s.add_argument("--tau", required=True)
    s.add_argument("--depth", type=int, default=None)
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("flow", parents=[common])
    s.add_argument("--point", required=True)
    s.add_argument("--t", required=True)
    s.add_argument("--eps-ladder", default=None)
    s.set_defaults(func=cmd_flow)

    s = sub.add_parser("gamma", parents=[common])
    s.add_argument("--point", required=True)
    s.add_argument("--tmax", type=int, required=True)
    s.add_argument("--qmax", type=int, default=10 ** 5)
    s.set_defaults(func=cmd_gamma)

    s = sub.add_parser("hyperplane", parents=[common])
    s.add_argument("--coeffs", required=True)
    s.add_argument("--verify", action="store_true")
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--qmax", type=int, default=10 ** 5)
    s.add_argument("--tolerance", type=float, default=0.5)
    s.add_argument("--submanifold", default=None)
    s.set_defaults(func=cmd_hyperplane)

    s = sub.add_parser("exterior-check", parents=[common])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--bound", type=int, required=True)
    s.add_argument("--a-count", type=int, default=100)
    s.set_defaults(func=cmd_exterior_check)

    s = sub.add_parser("nondiv", parents=[common])
    s.add_argument("--curve", required=True)
    s.add_argument("--kind", choices=("escape", "sublevel", "borel-cantelli"), default="escape")
    s.add_argument("--tmax", type=int, default=8)
    s.add_argument("--eps-ladder", default="2^-2..2^-8")
    s.add_argument("--samples", type=int, default=2000)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--d", type=float, default=0.121)
    s.set_defaults(func=cmd_nondiv)
    return p


def _positive(args):
    for name in ("qmax", "tmax", "samples", "mantissa_bits", "bound", "a_count", "height_cap"):
        v = getattr(args, name, None)
        if v is not None and v <= 0 and not (name == "tmax" and v == 0):
            raise SpecError(name.replace("_", "-"), "must be positive")


def _apply_config(parser, argv):
    """Re-parse with defaults taken from --config, so explicit flags win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    command = next((tok for tok in argv if not tok.startswith("-")), None)
    choices = parser._subparsers._group_actions[0].choices
    if path is None or command not in choices:
        return parser.parse_args(argv)
    cfg = read_config(path)
    sub = choices[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in cfg.items():
        if k not in known:
            raise SpecError(f"config key {k}", "unknown option")
        act = known[k]
        if act.type is not None:
            try:
                v = act.type(v)
            except ValueError:
                raise SpecError(f"config key {k}", f"bad value {v!r}") from None
        elif act.const is True:
            v = v.lower() in ("1", "true", "yes", "on")
        defaults[k] = v
    sub.set_defaults(**defaults)
    for act in sub._actions:
        if act.dest in defaults:
            act.required = False
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        _positive(args)
        quantity, result, csv_text = args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except BUDGET_ERRORS as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    if args.format == "csv":
        if csv_text is None:
            print(f"error: format: csv is not available for {args.command}", file=sys.stderr)
            return EXIT_SPEC
        text = csv_text
    else:
        text = dumps(envelope(args.command, args, quantity, result))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
