"""Command-line front end.

Every command prints one :class:`RunRecord` (JSON by default, or the
record's ``rows`` as CSV / an aligned table).  Exit codes: 0 success,
2 invalid input, 3 optimizer non-convergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, serialize
from .constants import compute_c, compute_kappa, divergence_diagnostic, grid_oracle
from .hardy import aumd_base_ratio
from .martingale import search_umd_lower_bound, stein_ratio
from .measure import FiniteProbSpace, dyadic_filtration
from .mixed_norm import MixedNormChain, build_E_n, format_exponent, parse_exponent, reduce_monotone_runs
from .search import OptimizerConfig
from .witness import certified_lower_bound

EXIT_OK, EXIT_INPUT, EXIT_NONCONV, EXIT_VERIFY = 0, 2, 3, 4


@dataclass
class RunRecord:
    command: list
    config: dict
    seed: int
    outputs: dict
    wall_time: float = 0.0
    version: str = __version__
    rows: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return format_exponent(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


# -- config ------------------------------------------------------------------


def read_config_file(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k] = v
    return out


def build_config(args) -> OptimizerConfig:
    d = read_config_file(args.config) if args.config else {}
    if args.seed is not None:
        d["master_seed"] = args.seed
    if args.restarts is not None:
        d["restarts"] = args.restarts
    if getattr(args, "max_iters", None) is not None:
        d["max_iters"] = args.max_iters
    return OptimizerConfig.from_dict(d)


def _chain(args) -> MixedNormChain:
    """``E_n(p, q)`` (probability weighting for L_s spaces) or scalars if ``--p`` is absent."""
    if args.p is None:
        return MixedNormChain(())
    q = args.q if args.q is not None else args.p
    return build_E_n(args.p, q, args.n or 1, "counting")


# -- commands ----------------------------------------------------------------


def cmd_constant(args, cfg):
    fn = compute_c if args.kind == "c" else compute_kappa
    est = fn(args.p, args.q, cfg)
    out = {"estimate": est.to_record()}
    row = {"kind": args.kind, "p": args.p, "q": args.q, "value": est.value,
           "certified_ratio": est.certified_ratio}
    if args.grid:
        g = grid_oracle(args.kind, args.p, args.q, cfg)
        out["grid"] = g.to_record()
        out["agreement"] = abs(g.value - est.value)
        row.update(grid_value=g.value, agreement=out["agreement"])
    return out, [row], est.converged


def cmd_lower_bound(args, cfg):
    n = args.n or 1
    lb = certified_lower_bound(args.p, args.q, n, cfg)
    est, c = lb.estimate, lb.c_estimate.value
    out = {"estimate": est.to_record(), "c": c}
    if args.out:
        serialize.dump(serialize.certificate(lb.witness, est.value), args.out)
        out["certificate"] = str(args.out)
    rows = [{"n": n, "ratio": est.value, "c^n": c**n, "slack": est.value - c**n}]
    return out, rows, est.converged


def cmd_umd_search(args, cfg):
    chain = _chain(args)
    est, m = search_umd_lower_bound(chain, args.s, args.depth, cfg)
    out = {"estimate": est.to_record(), "chain_shape": list(chain.shape),
           "label": "numerical lower bound for C_s (implementation artifact)"}
    if args.out:
        serialize.dump(serialize.certificate(m, est.certified_ratio, args.s), args.out)
        out["certificate"] = str(args.out)
    rows = [{"depth": args.depth, "s": args.s, "ratio": est.value, "certified_ratio": est.certified_ratio}]
    return out, rows, est.converged


def cmd_stein(args, cfg):
    chain = _chain(args)
    depth = args.depth
    filt = dyadic_filtration(depth)
    space = FiniteProbSpace.uniform(2**depth)
    rows = []
    for i in range(args.samples):
        rng = cfg.rng(i)
        F = rng.standard_normal((depth + 1, 2**depth, chain.dim))
        rows.append({"instance": i, "ratio": stein_ratio(F, filt, args.s, chain, space)})
    ratios = [r["ratio"] for r in rows]
    out = {"max_ratio": max(ratios), "mean_ratio": float(np.mean(ratios)), "samples": args.samples}
    return out, rows, True


def cmd_seq(args, cfg):
    seq = [parse_exponent(e) for e in args.exponents]
    if args.action == "reduce":
        red = reduce_monotone_runs(seq)
        return {"input": seq, "reduced": red}, [{"index": i, "p": p} for i, p in enumerate(red)], True
    products, cache = divergence_diagnostic(seq, cfg)
    rows = [{"k": k + 1, "pair": f"{format_exponent(seq[k])},{format_exponent(seq[k + 1])}",
             "partial_product": v} for k, v in enumerate(products)]
    pairs = {f"{format_exponent(a)},{format_exponent(b)}": e.value for (a, b), e in cache.items()}
    conv = all(e.converged for e in cache.values())
    return {"input": seq, "partial_products": products, "constants": pairs}, rows, conv


def cmd_hardy(args, cfg):
    if None in (args.u, args.v, args.w, args.t):
        est = compute_kappa(args.p, args.q, cfg)
        u, v, w, t = est.witness_params
        conv, source = est.converged, "kappa witness"
    else:
        u, v, w, t = args.u, args.v, args.w, args.t
        conv, source = True, "user"
    r = aumd_base_ratio(args.p, args.q, u, v, w, t, args.N)
    rel = abs(r.grid_value - r.two_atom_value) / r.two_atom_value
    out = {"params": [u, v, w, t], "params_source": source, "N": args.N,
           "grid_value": r.grid_value, "two_atom_value": r.two_atom_value, "relative_gap": rel}
    return out, [{"N": args.N, "grid_value": r.grid_value, "two_atom_value": r.two_atom_value,
                  "relative_gap": rel}], conv


def cmd_verify(args, cfg):
    res = serialize.verify(serialize.load(args.file))
    out = {"file": str(args.file), "type": res.kind, "claimed": res.claimed,
           "recomputed": res.recomputed, "ok": res.ok}
    return out, [out], True


COMMANDS = {
    "constant": cmd_constant,
    "lower-bound": cmd_lower_bound,
    "umd-search": cmd_umd_search,
    "stein": cmd_stein,
    "seq": cmd_seq,
    "hardy": cmd_hardy,
    "verify": cmd_verify,
}


# -- parser ------------------------------------------------------------------


def _common(p, exps=True):
    if exps:
        p.add_argument("--p", type=parse_exponent)
        p.add_argument("--q", type=parse_exponent)
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--config", help="key=value optimizer config file (flags override)")
    p.add_argument("--format", choices=("json", "csv", "table"), default="json")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="umdlpq", description="UMD lower bounds for iterated L_p(L_q) spaces.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constant", help="estimate c(p,q) or kappa(p,q)")
    p.add_argument("kind", choices=("c", "kappa"))
    _common(p)
    p.add_argument("--grid", action="store_true", help="also run the exhaustive grid oracle")

    p = sub.add_parser("lower-bound", help="certified lower bound for S(E_n)")
    _common(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--out", type=Path, help="write the witness certificate here")

    p = sub.add_parser("umd-search", help="search dyadic martingales in E_n(p,q) (scalars without --p)")
    _common(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--s", type=parse_exponent, default=2.0)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--out", type=Path, help="write the martingale certificate here")

    p = sub.add_parser("stein", help="exact Stein ratios on random dyadic instances")
    _common(p)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--s", type=parse_exponent, default=2.0)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--samples", type=int, default=10)

    p = sub.add_parser("seq", help="reduce or diagnose an exponent sequence")
    p.add_argument("action", choices=("reduce", "diagnose"))
    p.add_argument("exponents", nargs="+")
    _common(p, exps=False)

    p = sub.add_parser("hardy", help="analytic base ratio on the discrete torus")
    _common(p)
    p.add_argument("--N", type=int, default=256)
    for name in ("u", "v", "w", "t"):
        p.add_argument(f"--{name}", type=float)

    p = sub.add_parser("verify", help="recompute a certificate")
    p.add_argument("file", type=Path)
    _common(p, exps=False)
    return ap


def _check(args):
    need_pq = {"constant", "lower-bound", "hardy"}
    if args.command in need_pq and (args.p is None or args.q is None):
        raise ValueError(f"{args.command} needs --p and --q")
    if getattr(args, "n", None) is not None and args.n < 1:
        raise ValueError("--n must be >= 1")


def _render(rec: RunRecord, fmt: str) -> str:
    if fmt == "json":
        return rec.to_json()
    rows = rec.rows
    if not rows:
        return ""
    keys = list(dict.fromkeys(k for r in rows for k in r))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue().rstrip("\n")
    cells = [[str(r.get(k, "")) for k in keys] for r in rows]
    widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
    lines = ["  ".join(k.rjust(w) for k, w in zip(keys, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(cs, widths)) for cs in cells]
    return "\n".join(lines)


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help / --version (0) or usage errors (2)
        return int(exc.code or 0)
    t0 = time.perf_counter()
    try:
        _check(args)
        cfg = build_config(args)
        outputs, rows, converged = COMMANDS[args.command](args, cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    echo = {k: v for k, v in vars(args).items() if k not in ("format",)}
    rec = RunRecord(
        command=argv, config=_jsonable({"optimizer": cfg.to_dict(), "args": {k: str(v) if isinstance(v, Path) else v for k, v in echo.items()}}),
        seed=cfg.master_seed, outputs=_jsonable(outputs), rows=_jsonable(rows),
        wall_time=time.perf_counter() - t0,
    )
    print(_render(rec, args.format), file=stdout)
    if args.command == "verify" and not outputs["ok"]:
        return EXIT_VERIFY
    if not converged:
        print("warning: optimizer did not converge; reporting best-so-far", file=sys.stderr)
        return EXIT_NONCONV
    return EXIT_OK


def main() -> None:
    sys.exit(run())
