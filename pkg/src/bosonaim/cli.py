"""Command-line front end: ``solve``, ``oracle``, ``compare`` and ``table``.

Exit codes: 0 on success, 1 for configuration errors, 2 when a run finishes
but some requested level did not converge or a comparison exceeded its
tolerance.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .aim import AimOptions, EigenResult, ParityChain, decompose_chains, solve
from .algebra import OperatorExpression, OperatorWord, build_recurrence
from .models import (
    AnharmonicParams,
    BistableParams,
    Su2Model,
    TwoModeParams,
    UnsupportedReductionError,
    anharmonic_spec,
    bistable_spec,
    exact_reference,
    two_mode_to_su2,
)
from .oracle import eig_general, single_mode_matrix, su2_block, two_mode_block, two_mode_charge
from .tables import build_table, fmt_value, parse_number

__all__ = ["ConfigError", "RunConfig", "main"]

MODELS = ("anharmonic", "bistable", "su2", "two-mode", "custom")
OUTPUTS = ("text", "json", "csv")
PRECISION_ENV = "AIM_PRECISION"

# parameter name -> (models that use it, parser, default or None when required)
_PARAMS = {
    "alpha": (("anharmonic",), parse_number, None),
    "omega": (("bistable", "su2", "two-mode"), parse_number, 1.0),
    "kappa": (("bistable", "su2", "two-mode"), parse_number, 0.0),
    "Omega": (("bistable",), parse_number, 0.0),
    "j": (("su2",), None, None),
    "s": (("su2", "two-mode"), None, 1),
    "r": (("two-mode",), None, 1),
    "N": (("two-mode",), None, None),
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    model: str = "anharmonic"
    parameters: dict = field(default_factory=dict)
    aim: AimOptions = field(default_factory=lambda: AimOptions(depth=40))
    oracle_n_max: int = 200
    levels: int = 6
    output: str = "text"
    seed_file: str | None = None
    tol: float = 1e-6

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model: unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if self.levels < 1:
            raise ConfigError(f"levels: must be at least 1, got {self.levels}")
        if self.oracle_n_max < 1:
            raise ConfigError(f"oracle_n_max: must be positive, got {self.oracle_n_max}")
        if self.output not in OUTPUTS:
            raise ConfigError(f"output: expected one of {', '.join(OUTPUTS)}, got {self.output!r}")
        if not self.tol > 0:
            raise ConfigError(f"tol: must be positive, got {self.tol}")
        if self.model == "custom":
            if not self.seed_file:
                raise ConfigError("seed_file: required when model is custom")
            if not Path(self.seed_file).is_file():
                raise ConfigError(f"seed_file: no such file {self.seed_file!r}")


def _int(name: str, value) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"parameters.{name}: expected an integer, got {value!r}")
    try:
        f = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"parameters.{name}: expected an integer, got {value!r}") from None
    if f.denominator != 1:
        raise ConfigError(f"parameters.{name}: expected an integer, got {value!r}")
    return int(f)


def _spin(value) -> Fraction:
    try:
        f = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"parameters.j: expected an integer or half-integer, got {value!r}") from None
    if (2 * f).denominator != 1 or f < 0:
        raise ConfigError(f"parameters.j: expected a nonnegative integer or half-integer, got {value!r}")
    return f


def resolve_parameters(model: str, raw: dict) -> dict:
    """Check names against the model, parse values and fill defaults."""
    out = {}
    for name, value in raw.items():
        if name not in _PARAMS:
            raise ConfigError(f"parameters.{name}: unknown parameter")
        users, parser, _ = _PARAMS[name]
        if model not in users:
            raise ConfigError(f"parameters.{name}: not a parameter of model {model!r}")
        if name == "j":
            out[name] = _spin(value)
        elif parser is None:
            out[name] = _int(name, value)
        else:
            try:
                out[name] = parser(value)
            except (ValueError, TypeError, ZeroDivisionError, OverflowError) as exc:
                raise ConfigError(f"parameters.{name}: {exc}") from None
    for name, (users, _, default) in _PARAMS.items():
        if model in users and name not in out:
            if default is None:
                raise ConfigError(f"parameters.{name}: required for model {model!r}")
            out[name] = default
    return out


def load_custom(path: str) -> OperatorExpression:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"seed_file: cannot read {path!r}: {exc}") from None
    terms = data.get("terms") if isinstance(data, dict) else None
    if not isinstance(terms, list) or not terms:
        raise ConfigError("seed_file.terms: expected a non-empty list of {coeff, word} objects")
    pairs = []
    for i, t in enumerate(terms):
        if not isinstance(t, dict) or set(t) != {"coeff", "word"}:
            raise ConfigError(f"seed_file.terms[{i}]: expected exactly the keys coeff and word")
        try:
            coeff = parse_number(t["coeff"])
            word = OperatorWord.parse(str(t["word"]))
        except ValueError as exc:
            raise ConfigError(f"seed_file.terms[{i}]: {exc}") from None
        pairs.append((coeff, word))
    expr = OperatorExpression.from_words(pairs)
    if len(expr) == 0:
        raise ConfigError("seed_file.terms: all terms cancel")
    return expr


def _env_precision() -> str | None:
    value = os.environ.get(PRECISION_ENV)
    if value is None or value == "":
        return None
    if value not in ("standard", "extended"):
        raise ConfigError(f"{PRECISION_ENV}: expected standard or extended, got {value!r}")
    return value


def _aim_options(raw: dict) -> AimOptions:
    known = {f.name for f in dataclasses.fields(AimOptions)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"aim.{key}: unknown option")
    kwargs = dict(raw)
    kwargs.setdefault("depth", 40)
    if "precision_mode" not in kwargs:
        kwargs["precision_mode"] = _env_precision() or "standard"
    if kwargs.get("root_interval") is not None:
        ri = kwargs["root_interval"]
        if not isinstance(ri, (list, tuple)) or len(ri) != 2:
            raise ConfigError(f"aim.root_interval: expected [lo, hi], got {ri!r}")
        kwargs["root_interval"] = tuple(float(x) for x in ri)
    try:
        return AimOptions(**kwargs)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        name = next((k for k in kwargs if msg.startswith(k)), None)
        raise ConfigError(f"aim.{name}: {msg}" if name else f"aim: {msg}") from None


_CONFIG_KEYS = {"model", "parameters", "aim", "oracle_n_max", "levels", "output", "seed_file", "tol"}


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional JSON config file with command-line flags (flags win)."""
    data: dict = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config!r}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        for key in data:
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{key}: unknown configuration field")
    model = args.model or data.get("model", "anharmonic")
    params = dict(data.get("parameters") or {})
    if not isinstance(params, dict):
        raise ConfigError("parameters: expected an object")
    for name in _PARAMS:
        value = getattr(args, "p_" + name)
        if value is not None:
            params[name] = value

    aim = dict(data.get("aim") or {})
    if args.depth is not None:
        aim["depth"] = args.depth
    if args.precision is not None:
        aim["precision_mode"] = args.precision
    if args.command == "solve" and args.tol is not None:
        aim["convergence_tol"] = args.tol

    def pick(flag, key, default, kind):
        value = flag if flag is not None else data.get(key, default)
        if value is None:
            return None
        if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key}: expected a number, got {value!r}")
            return float(value)
        if kind is str and not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value

    cfg = RunConfig(
        model=model,
        parameters=resolve_parameters(model, params),
        aim=_aim_options(aim),
        oracle_n_max=pick(args.nmax, "oracle_n_max", 200, int),
        levels=pick(args.levels, "levels", 6, int),
        output=pick(args.output, "output", "text", str),
        seed_file=pick(args.seed_file, "seed_file", None, str),
        tol=pick(args.tol if args.command == "compare" else None, "tol", 1e-6, float),
    )
    return cfg


# ---------------------------------------------------------------- model setup


def boson_expression(cfg: RunConfig) -> OperatorExpression:
    p = cfg.parameters
    if cfg.model == "anharmonic":
        return anharmonic_spec(AnharmonicParams(p["alpha"]))
    if cfg.model == "bistable":
        return bistable_spec(BistableParams(p["omega"], p["kappa"], p["Omega"]))
    return load_custom(cfg.seed_file)


def su2_model(cfg: RunConfig) -> Su2Model:
    p = cfg.parameters
    if cfg.model == "su2":
        if p["s"] < 1:
            raise ConfigError(f"parameters.s: must be positive, got {p['s']}")
        return Su2Model(j=p["j"], s=p["s"], omega=p["omega"], kappa=p["kappa"])
    tm = two_mode_params(cfg)
    try:
        return two_mode_to_su2(tm, p["N"])
    except UnsupportedReductionError as exc:
        raise ConfigError(f"parameters.r: {exc}; run the oracle subcommand instead") from None
    except ValueError as exc:
        raise ConfigError(f"parameters.N: {exc}") from None


def two_mode_params(cfg: RunConfig) -> TwoModeParams:
    p = cfg.parameters
    try:
        return TwoModeParams(p["omega"], p["kappa"], p["r"], p["s"])
    except ValueError as exc:
        raise ConfigError(f"parameters.r: {exc}") from None


def _exact(cfg: RunConfig):
    """Closed-form level function when the configured model is exactly solvable."""
    p = cfg.parameters
    if cfg.model == "anharmonic" and p["alpha"] == 0.0:
        params, name = AnharmonicParams(0.0), "anharmonic"
    elif cfg.model == "bistable" and p["Omega"] == 0.0 and p["omega"] > 0.0:
        params, name = BistableParams(p["omega"], p["kappa"], 0.0), "bistable"
    elif cfg.model in ("su2", "two-mode") and p["s"] == 1:
        try:
            params, name = su2_model(cfg), "su2"
        except ConfigError:
            return None
    else:
        return None
    return lambda n: exact_reference(name, params, n)


def run_aim(cfg: RunConfig) -> EigenResult:
    model = su2_model(cfg) if cfg.model in ("su2", "two-mode") else boson_expression(cfg)
    return solve(model, cfg.aim)


def run_oracle(cfg: RunConfig) -> tuple[np.ndarray, str, float]:
    """Eigenvalues (complex, sorted), a truncation description and a residual bound."""
    if cfg.model == "su2":
        rep = eig_general(su2_block(su2_model(cfg)), "full su(2) irrep")
        return rep.eigenvalues, rep.truncation, rep.residual_bound
    if cfg.model == "two-mode":
        p = cfg.parameters
        tm = two_mode_params(cfg)
        if p["N"] < 0:
            raise ConfigError(f"parameters.N: must be nonnegative, got {p['N']}")
        charge = two_mode_charge(tm.r, tm.s, p["N"])
        try:
            block = two_mode_block(tm, charge)
        except ValueError as exc:
            raise ConfigError(f"parameters.N: {exc}") from None
        rep = eig_general(block, f"block {tm.r} n_a + {tm.s} n_b = {charge}, dim {block.dimension}")
        return rep.eigenvalues, rep.truncation, rep.residual_bound
    expr = boson_expression(cfg)
    chains = decompose_chains(build_recurrence(expr)) or [ParityChain(1, 0, (0,), label="all")]
    values, bound = [], 0.0
    for chain in chains:
        try:
            rep = eig_general(single_mode_matrix(expr, chain, cfg.oracle_n_max))
        except ValueError as exc:
            raise ConfigError(f"oracle_n_max: {exc}") from None
        values.append(rep.eigenvalues)
        bound = max(bound, rep.residual_bound)
    ev = np.concatenate(values)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    return ev, f"n <= {cfg.oracle_n_max}", bound


# ---------------------------------------------------------------- rendering


def _fmt_delta(d: float) -> str:
    return "n/a" if math.isinf(d) else f"{d:.3e}"


def _table_text(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _csv(headers: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    w.writerows(rows)
    return buf.getvalue().rstrip("\n")


def _describe(cfg: RunConfig) -> str:
    parts = [f"{k}={v}" for k, v in sorted(cfg.parameters.items())]
    if cfg.model == "custom":
        parts.append(f"file={cfg.seed_file}")
    return f"{cfg.model} " + " ".join(parts)


def _json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=False, default=str)


def cmd_solve(cfg: RunConfig) -> tuple[str, int]:
    result = run_aim(cfg)
    shown = result.lowest(cfg.levels)
    ok = len(shown) == cfg.levels and all(r.converged for r in shown)
    reported = EigenResult(tuple(shown))
    if cfg.output == "json":
        payload = {
            "command": "solve",
            "model": cfg.model,
            "parameters": {k: str(v) for k, v in cfg.parameters.items()},
            "depth": cfg.aim.depth,
            "precision": cfg.aim.precision_mode,
            "levels_requested": cfg.levels,
            "all_converged": ok,
            "result": reported.to_dict(),
        }
        return _json(payload), 0 if ok else 2
    headers = ["n", "energy", "delta", "converged", "chain"]
    if cfg.output == "csv":
        rows = [[i, repr(r.value), repr(r.delta), r.converged, r.chain] for i, r in enumerate(shown)]
        return _csv(headers, rows), 0 if ok else 2
    rows = [
        [str(i), fmt_value(r.value), _fmt_delta(r.delta), "yes" if r.converged else "no", r.chain]
        for i, r in enumerate(shown)
    ]
    head = [
        f"# aim {_describe(cfg)}",
        f"# depth {cfg.aim.depth}, precision {cfg.aim.precision_mode}, convergence_tol {cfg.aim.convergence_tol:g}",
    ]
    tail = []
    if len(shown) < cfg.levels:
        tail.append(f"# only {len(shown)} of {cfg.levels} requested levels found in the search interval")
    if not ok:
        tail.append("# some requested levels did not converge")
    return "\n".join(head + [_table_text(headers, rows)] + tail), 0 if ok else 2


def cmd_oracle(cfg: RunConfig) -> tuple[str, int]:
    ev, truncation, bound = run_oracle(cfg)
    shown = ev[: cfg.levels]
    if cfg.output == "json":
        payload = {
            "command": "oracle",
            "model": cfg.model,
            "parameters": {k: str(v) for k, v in cfg.parameters.items()},
            "truncation": truncation,
            "residual_bound": bound,
            "eigenvalues": [{"real": float(z.real), "imag": float(z.imag)} for z in shown],
        }
        return _json(payload), 0
    headers = ["n", "real", "imag"]
    if cfg.output == "csv":
        return _csv(headers, [[i, repr(float(z.real)), repr(float(z.imag))] for i, z in enumerate(shown)]), 0
    rows = [[str(i), fmt_value(float(z.real)), fmt_value(float(z.imag))] for i, z in enumerate(shown)]
    head = [f"# oracle {_describe(cfg)}", f"# truncation {truncation}, residual bound {bound:.3e}"]
    return "\n".join(head + [_table_text(headers, rows)]), 0


def cmd_compare(cfg: RunConfig) -> tuple[str, int]:
    aim = run_aim(cfg).lowest(cfg.levels)
    ev, truncation, _ = run_oracle(cfg)
    exact = _exact(cfg)
    rows = []
    worst_rel = 0.0
    failed = len(aim) < cfg.levels or len(ev) < cfg.levels
    for n in range(min(cfg.levels, len(aim), len(ev))):
        a = aim[n].value
        o = float(ev[n].real)
        ref = o
        x = None
        if exact is not None:
            try:
                x = exact(n)
                ref = x
            except ValueError:
                x = None
        dev = abs(a - ref)
        rel = dev / abs(ref) if ref != 0 else dev
        worst_rel = max(worst_rel, rel)
        if dev > cfg.tol * max(1.0, abs(ref)) or abs(ev[n].imag) > cfg.tol * max(1.0, abs(o)):
            failed = True
        rows.append((n, a, o, x, dev, rel, aim[n].chain))
    code = 2 if failed else 0
    if cfg.output == "json":
        payload = {
            "command": "compare",
            "model": cfg.model,
            "parameters": {k: str(v) for k, v in cfg.parameters.items()},
            "tolerance": cfg.tol,
            "truncation": truncation,
            "within_tolerance": not failed,
            "rows": [
                {"n": n, "aim": a, "oracle": o, "exact": x, "abs_dev": d, "rel_dev": r, "chain": c}
                for n, a, o, x, d, r, c in rows
            ],
        }
        return _json(payload), code
    headers = ["n", "aim", "oracle", "exact", "abs_dev", "rel_dev", "chain"]
    if cfg.output == "csv":
        return _csv(headers, [[n, repr(a), repr(o), "" if x is None else repr(x), repr(d), repr(r), c]
                              for n, a, o, x, d, r, c in rows]), code
    text_rows = [
        [str(n), fmt_value(a), fmt_value(o), "-" if x is None else fmt_value(x), f"{d:.3e}", f"{r:.3e}", c]
        for n, a, o, x, d, r, c in rows
    ]
    against = "exact" if exact is not None else "oracle"
    head = [
        f"# compare {_describe(cfg)}",
        f"# aim depth {cfg.aim.depth} ({cfg.aim.precision_mode}), oracle {truncation}, deviations against {against}",
    ]
    tail = [f"# max relative deviation {worst_rel:.3e}, tolerance {cfg.tol:g}: {'FAIL' if failed else 'ok'}"]
    return "\n".join(head + [_table_text(headers, text_rows)] + tail), code


def cmd_table(which: str, output: str) -> tuple[str, int]:
    rep = build_table(which)
    if output == "json":
        return _json(rep.to_dict()), 0

    def cell(v):
        if isinstance(v, float):
            return fmt_value(v)
        return str(v)

    if output == "csv":
        return _csv(rep.headers, [[repr(v) if isinstance(v, float) else v for v in r] for r in rep.rows]), 0
    rows = [[cell(v) for v in r] for r in rep.rows]
    if rep.name == "I":
        for r, raw in zip(rows, rep.rows):
            r[-1] = f"{raw[-1]:.2f}"
    body = _table_text(rep.headers, rows)
    footer = f"# {rep.deviation_label}: {rep.max_deviation:.3e}"
    return "\n".join([f"# table {rep.name}: {rep.title}", body, footer]), 0


# ---------------------------------------------------------------- argparse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring the run configuration")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--alpha", dest="p_alpha", help="quartic coupling")
    p.add_argument("--omega", dest="p_omega", help="linear frequency")
    p.add_argument("--kappa", dest="p_kappa", help="coupling strength; accepts expressions like sqrt(3)/2")
    p.add_argument("--Omega", dest="p_Omega", help="Kerr-type coefficient of the bistable model")
    p.add_argument("--j", dest="p_j", help="spin, integer or half-integer (e.g. 3/2)")
    p.add_argument("--s", dest="p_s", help="ladder power (su2) or mode-b exponent (two-mode)")
    p.add_argument("--r", dest="p_r", help="mode-a exponent of the two-mode coupling")
    p.add_argument("--N", dest="p_N", help="block label of the two-mode model; total boson number when r == s")
    p.add_argument("--depth", type=int, help="iteration depth (default 40)")
    p.add_argument("--nmax", type=int, help="oracle truncation occupation (default 200)")
    p.add_argument("--levels", type=int, help="number of levels to report (default 6)")
    p.add_argument("--tol", type=float, help="solve: convergence tolerance; compare: deviation tolerance")
    p.add_argument("--precision", choices=("standard", "extended"), help=f"overrides {PRECISION_ENV}")
    p.add_argument("--seed-file", dest="seed_file", help="custom Hamiltonian JSON for --model custom")
    p.add_argument("--output", choices=OUTPUTS)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bosonaim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in (
        ("solve", "eigenvalues from the asymptotic iteration"),
        ("oracle", "eigenvalues from direct diagonalization"),
        ("compare", "iteration vs diagonalization vs closed form"),
    ):
        _add_run_flags(sub.add_parser(name, help=help_text))
    t = sub.add_parser("table", help="regenerate reference table I, II or III")
    t.add_argument("which", type=str.upper, choices=("I", "II", "III"))
    t.add_argument("--output", choices=OUTPUTS, default="text")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        if args.command == "table":
            text, code = cmd_table(args.which, args.output)
        else:
            cfg = build_config(args)
            text, code = {"solve": cmd_solve, "oracle": cmd_oracle, "compare": cmd_compare}[args.command](cfg)
    except ConfigError as exc:
        print(f"bosonaim: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"bosonaim: error: parameters: {exc}", file=sys.stderr)
        return 1
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
