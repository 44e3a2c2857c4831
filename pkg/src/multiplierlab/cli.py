"""Command-line front end.

    multiplierlab norms {schur,fourier,cb} --group G --symbol S --p LIST ...
    multiplierlab verify {thm42,corner,folner-curve,equality,lemma23,defect,convexity,free-contrast} ...

Exit codes: 0 success, 1 input error, 2 an optimizer did not converge,
3 a verification check failed.  Output is JSON (sorted keys, no
timestamps) or CSV, written to ``--out``, to ``$MULTIPLIERLAB_OUT/<name>``
when that variable is set, or to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .engine import EngineOptions, cb_norm_est, fourier_norm_est, plateau, schur_norm_est
from .grouplp import (
    GroupAlgebraElement,
    MultiplierSymbol,
    OracleError,
    SymbolLookupError,
    builtin_element,
    builtin_symbol,
    load_element,
    load_symbol,
)
from .groups import FiniteGroup, FreeGroup, GroupError, builtin_group, folner_set
from .schatten import MatrixError, as_pnorm
from .verify import (
    CheckReport,
    ConvexityTestVector,
    check_amenable_equality,
    check_corner_bound,
    check_defect_decay,
    check_folner_curve,
    check_lemma_2_3_chain,
    check_log_convexity,
    check_transference_identity,
    free_defect_contrast,
    free_group_contrast,
    lemma_sweep,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2
EXIT_CHECK_FAILED = 3

ENV_OUT = "MULTIPLIERLAB_OUT"

VERIFY_CHECKS = ("thm42", "corner", "folner-curve", "equality", "lemma23", "defect", "convexity", "free-contrast")

# option defaults; a config file fills anything not given on the command line
DEFAULTS: dict[str, Any] = {
    "group": None,
    "symbol": None,
    "x": None,
    "p": None,
    "radii": None,
    "radius": None,
    "levels": "1,2,3",
    "kind": None,
    "k": None,
    "trials": 1,
    "samples": 100,
    "dim": 3,
    "delta": 0.5,
    "gamma": None,
    "s": None,
    "mode": "plain",
    "gap": 0.01,
    "threshold": None,
    "seed": 0,
    "restarts": EngineOptions.restarts,
    "max_iters": EngineOptions.max_iters,
    "polish_iters": EngineOptions.polish_iters,
    "tol": EngineOptions.tol,
    "surrogate_p": EngineOptions.surrogate_p,
    "format": "json",
    "out": None,
}


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def _list(text: Any, what: str) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    items = [t.strip() for t in str(text).split(",")]
    if not items or any(not t for t in items):
        raise InputError(f"malformed {what} list {text!r}")
    return items


def _ints(text: Any, what: str) -> list[int]:
    try:
        return [int(t) for t in _list(text, what)]
    except ValueError as exc:
        raise InputError(f"malformed {what} list {text!r}") from exc


def _pnorms(text: Any):
    try:
        return [as_pnorm(t) for t in _list(text, "p")]
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _symbol(group, spec: str | None, seed: int) -> MultiplierSymbol:
    if spec is None:
        raise InputError("--symbol is required")
    if spec.startswith("builtin:"):
        return builtin_symbol(group, spec[len("builtin:") :], seed=seed)
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"symbol file {spec} does not exist")
    return load_symbol(group, path)


def _element(group, spec: str | None, seed: int) -> GroupAlgebraElement:
    if spec is None:
        raise InputError("--x is required")
    if spec.startswith("builtin:"):
        return builtin_element(group, spec[len("builtin:") :], seed=seed)
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"element file {spec} does not exist")
    return load_element(group, path)


def _group(spec: str | None, default: str | None = None):
    spec = spec or default
    if spec is None:
        raise InputError("--group is required")
    return builtin_group(spec)


def _finite(group) -> FiniteGroup:
    if not isinstance(group, FiniteGroup):
        raise InputError(f"this command needs a finite group, got {group.name}")
    return group


def _opts(cfg: dict) -> EngineOptions:
    try:
        return EngineOptions(
            restarts=int(cfg["restarts"]),
            max_iters=int(cfg["max_iters"]),
            polish_iters=int(cfg["polish_iters"]),
            tol=float(cfg["tol"]),
            seed=int(cfg["seed"]),
            surrogate_p=float(cfg["surrogate_p"]),
        )
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad optimizer option: {exc}") from exc


def _read_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise InputError(f"{path}:1: config must be a JSON object")
    out = {}
    for key, value in obj.items():
        k = key.replace("-", "_")
        if k not in DEFAULTS:
            line = next((i + 1 for i, ln in enumerate(text.splitlines()) if f'"{key}"' in ln), 1)
            raise InputError(f"{path}:{line}: unknown config key {key!r}")
        out[k] = value
    return out


def resolve_config(args: argparse.Namespace) -> dict:
    """Command line over config file over defaults."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(_read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["format"] not in ("json", "csv"):
        raise InputError(f"unknown format {cfg['format']!r}")
    return cfg


# ---------------------------------------------------------------------------
# output


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _csv(rows: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _emit(text: str, cfg: dict, name: str) -> None:
    out = cfg["out"]
    if out is None and os.environ.get(ENV_OUT):
        out = str(Path(os.environ[ENV_OUT]) / f"{name}.{cfg['format']}")
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _config_record(cfg: dict, command: str) -> dict:
    rec = {k: v for k, v in cfg.items() if k not in ("out",) and v is not None}
    rec["command"] = command
    return rec


# ---------------------------------------------------------------------------
# norms


ESTIMATE_FIELDS = ("kind", "domain", "p", "level", "value", "converged", "restarts_used", "iterations", "seed")


def cmd_norms(cfg: dict, kind: str) -> int:
    group = _group(cfg["group"])
    phi = _symbol(group, cfg["symbol"], cfg["seed"])
    ps = _pnorms(cfg["p"] if cfg["p"] is not None else "2")
    opts = _opts(cfg)
    estimates = []
    plateaus = []
    for p in ps:
        if kind == "schur":
            estimates.append(schur_norm_est(phi, _schur_domain(group, cfg), p, opts))
        elif kind == "fourier":
            estimates.append(fourier_norm_est(phi, _finite(group), p, opts))
        else:
            which = cfg["kind"] or "fourier"
            if which not in ("schur", "fourier"):
                raise InputError(f"--kind must be schur or fourier, got {which!r}")
            domain = _schur_domain(group, cfg) if which == "schur" else _finite(group)
            levels = _ints(cfg["levels"], "levels")
            ests = cb_norm_est(which, phi, domain, p, levels, opts)
            estimates.extend(ests)
            plateaus.append({"p": str(p), "cb_value": max(e.value for e in ests), "plateau": plateau(ests)})
    converged = all(e.converged for e in estimates)
    if cfg["format"] == "json":
        doc = {
            "config": _config_record(cfg, f"norms {kind}"),
            "estimates": [e.to_dict() for e in estimates],
            "converged": converged,
        }
        if plateaus:
            doc["cb"] = plateaus
        text = _dumps(doc)
    else:
        rows = []
        for e in estimates:
            d = e.to_dict(with_certificate=False)
            rows.append({k: (repr(d[k]) if isinstance(d[k], float) else d[k]) for k in ESTIMATE_FIELDS})
        text = _csv(rows, ESTIMATE_FIELDS)
    _emit(text, cfg, f"norms-{kind}")
    return EXIT_OK if converged else EXIT_NONCONVERGED


def _schur_domain(group, cfg: dict):
    if isinstance(group, FiniteGroup):
        return folner_set(group, 0)
    if cfg["radius"] is None:
        raise InputError(f"--radius is required for Schur multipliers on {group.name}")
    return folner_set(group, int(cfg["radius"]))


# ---------------------------------------------------------------------------
# verify


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _verify_thm42(cfg: dict) -> list[CheckReport]:
    G = _finite(_group(cfg["group"]))
    seed = int(cfg["seed"])
    k = min(3, G.order) if cfg["k"] is None else int(cfg["k"])
    if not 1 <= k <= G.order:
        raise InputError(f"--k must lie in 1..{G.order}")
    reports = []
    for trial in range(int(cfg["trials"])):
        rng = _rng(seed, 42, trial)
        pts = [int(v) for v in rng.choice(G.order, size=k, replace=False)]
        a = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        b = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        if cfg["symbol"] is None:
            phi = MultiplierSymbol.from_array(G, rng.standard_normal(G.order) + 1j * rng.standard_normal(G.order))
        else:
            phi = _symbol(G, cfg["symbol"], seed)
        for p in _pnorms(cfg["p"] or "4"):
            reports.append(check_transference_identity(phi, G, pts, a, b, p, seed=seed))
    return reports


def _verify_corner(cfg: dict) -> list[CheckReport]:
    group = _group(cfg["group"])
    x = _element(group, cfg["x"], cfg["seed"])
    radii = _ints(cfg["radii"] or "0", "radii")
    return [check_corner_bound(x, folner_set(group, r), p) for p in _pnorms(cfg["p"] or "4") for r in radii]


def _verify_folner(cfg: dict) -> list[CheckReport]:
    group = _group(cfg["group"])
    x = _element(group, cfg["x"], cfg["seed"])
    radii = _ints(cfg["radii"] or "64,128,256,512", "radii")
    thr = None if cfg["threshold"] is None else float(cfg["threshold"])
    return [check_folner_curve(x, p, radii, threshold=thr) for p in _pnorms(cfg["p"] or "4")]


def _verify_equality(cfg: dict) -> list[CheckReport]:
    G = _finite(_group(cfg["group"]))
    phi = _symbol(G, cfg["symbol"], cfg["seed"])
    opts = _opts(cfg)
    if cfg["mode"] not in ("plain", "cb"):
        raise InputError(f"--mode must be plain or cb, got {cfg['mode']!r}")
    levels = _ints(cfg["levels"], "levels")
    return [
        check_amenable_equality(phi, G, p, opts, gap=float(cfg["gap"]), mode=cfg["mode"], levels=levels)
        for p in _pnorms(cfg["p"] or "1,4/3,2,3,4,inf")
    ]


def _verify_lemma(cfg: dict) -> list[CheckReport]:
    group = _group(cfg["group"], "zmod:6")
    seed = int(cfg["seed"])
    delta = float(cfg["delta"])
    if not 0 < delta <= 1:
        raise InputError("--delta must lie in (0, 1]")
    dim = int(cfg["dim"])
    sweep = lemma_sweep(group, int(cfg["samples"]), _rng(seed, 23), max_dim=dim, delta=delta, seed=seed)
    rng = _rng(seed, 23, 1)
    pool = list(folner_set(group, 2 if isinstance(group, FreeGroup) else 8).elements)[:8]
    s = pool[int(rng.integers(len(pool)))] if cfg["s"] is None else group.parse(cfg["s"])
    xi1 = {g: rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)) for g in pool}
    cov = check_lemma_2_3_chain(ConvexityTestVector.covariant(group, xi1, s), delta)
    q = cov.quantities
    exact = abs(q["re_tr"] - 1) <= 1e-10 and q["conclusion"] <= 1e-10
    cov = CheckReport("lemma23-covariant", cov.inputs, q, cov.passed and exact, 1e-10, seed)
    return [sweep, cov]


def _verify_defect(cfg: dict) -> list[CheckReport]:
    group = _group(cfg["group"])
    if isinstance(group, FreeGroup):
        return [free_defect_contrast(_ints(cfg["radii"] or "1,2,3,4", "radii"))]
    if isinstance(group, FiniteGroup):
        raise InputError("defects are defined along the boxes of zd:d or the balls of free:k")
    gamma = group.identity if cfg["gamma"] is None else group.parse(cfg["gamma"])
    s = group.generators()[0] if cfg["s"] is None else group.parse(cfg["s"])
    return [check_defect_decay(group, _ints(cfg["radii"] or "8,16,32,64", "radii"), gamma, s)]


def _verify_convexity(cfg: dict) -> list[CheckReport]:
    G = _finite(_group(cfg["group"], "zmod:6"))
    spec = cfg["symbol"] or "builtin:random"
    phi = _symbol(G, spec, cfg["seed"])
    kind = cfg["kind"] or "schur"
    if kind not in ("schur", "fourier"):
        raise InputError(f"--kind must be schur or fourier, got {kind!r}")
    ps = _list(cfg["p"] or "1,4/3,2,4,inf", "p")
    try:
        return [check_log_convexity(phi, G, ps, _opts(cfg), kind=kind)]
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _verify_free(cfg: dict) -> list[CheckReport]:
    group = _group(cfg["group"], "free:2")
    if not isinstance(group, FreeGroup):
        raise InputError(f"free-contrast needs a free group, got {group.name}")
    x = _element(group, cfg["x"] or "builtin:gens", cfg["seed"])
    radii = _ints(cfg["radii"] or "1,2,3", "radii")
    return [free_group_contrast(x, p, radii) for p in _pnorms(cfg["p"] or "4")]


_VERIFY = {
    "thm42": _verify_thm42,
    "corner": _verify_corner,
    "folner-curve": _verify_folner,
    "equality": _verify_equality,
    "lemma23": _verify_lemma,
    "defect": _verify_defect,
    "convexity": _verify_convexity,
    "free-contrast": _verify_free,
}


def cmd_verify(cfg: dict, check: str) -> int:
    reports = _VERIFY[check](cfg)
    failed = [r for r in reports if not r.report_only and not r.passed]
    if cfg["format"] == "json":
        doc = {
            "config": _config_record(cfg, f"verify {check}"),
            "reports": [r.to_dict() for r in reports],
            "all_pass": not failed,
        }
        text = _dumps(doc)
    else:
        text = _csv([r.csv_row() for r in reports], CheckReport.CSV_FIELDS)
    _emit(text, cfg, f"verify-{check}")
    if not failed:
        return EXIT_OK
    if all(r.status == "under-converged" for r in failed):
        return EXIT_NONCONVERGED
    return EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# argument parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group", help="group spec: zmod:n, dihedral:n, sym:n, zd:d, free:k, csv:PATH, G*H ...")
    p.add_argument("--symbol", help="builtin:NAME or a JSON symbol file")
    p.add_argument("--x", help="builtin:NAME or a JSON element file")
    p.add_argument("--p", help="comma-separated exponents, e.g. 1,4/3,2,inf")
    p.add_argument("--radii", help="comma-separated radii")
    p.add_argument("--radius", type=int, help="radius of the Schur domain on infinite groups")
    p.add_argument("--levels", help="amplification levels, e.g. 1,2,3")
    p.add_argument("--kind", help="schur or fourier (cb and convexity)")
    p.add_argument("--k", type=int, help="number of points (thm42; default min(3, |G|))")
    p.add_argument("--trials", type=int, help="number of random instances (thm42)")
    p.add_argument("--samples", type=int, help="number of test vectors (lemma23)")
    p.add_argument("--dim", type=int, help="largest matrix size of test vectors (lemma23)")
    p.add_argument("--delta", type=float, help="hypothesis slack (lemma23)")
    p.add_argument("--gamma", help="corner element (defect)")
    p.add_argument("--s", help="shift element (defect, lemma23)")
    p.add_argument("--mode", help="plain or cb (equality)")
    p.add_argument("--gap", type=float, help="relative gap allowed (equality)")
    p.add_argument("--threshold", type=float, help="lower bound for the last ratio (folner-curve)")
    p.add_argument("--seed", type=int, help="master seed (default 0, always recorded)")
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--polish-iters", dest="polish_iters", type=int, help="extra steps for unconverged leading restarts")
    p.add_argument("--tol", type=float)
    p.add_argument("--surrogate-p", dest="surrogate_p", type=float)
    p.add_argument("--config", help="JSON file whose keys mirror the flags")
    p.add_argument("--out", help="output file (default: $MULTIPLIERLAB_OUT/<command>.<format> or stdout)")
    p.add_argument("--format", choices=("json", "csv"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiplierlab", description="Schur and Fourier multiplier norms and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    norms = sub.add_parser("norms", help="estimate multiplier norms")
    nsub = norms.add_subparsers(dest="which", required=True)
    for name in ("schur", "fourier", "cb"):
        _add_common(nsub.add_parser(name))
    verify = sub.add_parser("verify", help="run verification checks")
    vsub = verify.add_subparsers(dest="which", required=True)
    for name in VERIFY_CHECKS:
        _add_common(vsub.add_parser(name))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = resolve_config(args)
        if args.command == "norms":
            return cmd_norms(cfg, args.which)
        return cmd_verify(cfg, args.which)
    except (InputError, GroupError, SymbolLookupError, OracleError, MatrixError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"multiplierlab: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
