"""Command-line interface: ``lipd <command> [flags]``.

Every command prints a JSON summary on stdout and, with ``--out DIR``, writes
its CSV/JSON artifacts into ``DIR``.  Exit codes: 0 success, 1 numerical
failure (JSON diagnostic on stdout), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import traceback
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import fbi
from . import io as lio
from .forward import (DriftPerturbation, StabilityError, bump, duhamel_forward, solve_base_U0,
                      solve_nonlinear)
from .inversion import (InversionError, assemble_forward_matrix, injectivity_certificate,
                        tikhonov_solve)
from .kernels import weight_w
from .model import Field, Grid, ModelParams, ParameterError, derive_transformed, gauge_v_from_V
from .symbols import ResolutionError, SymbolAccuracyError

NUMERICAL_ERRORS = (InversionError, StabilityError, fbi.FBIOverflowError, ResolutionError, SymbolAccuracyError,
                    FloatingPointError, np.linalg.LinAlgError, ArithmeticError)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _interval(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi' with lo < hi, got {text!r}")
    return vals


def _lam(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"lambda must be 'auto' or a number, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = ModelParams()
    g = p.add_argument_group("model and numerics")
    g.add_argument("--sigma0", type=float, default=d.sigma0)
    g.add_argument("--mu0", type=float, default=d.mu0)
    g.add_argument("--r", type=float, default=d.r)
    g.add_argument("--tau-star", type=float, default=d.tau_star, help="time to maturity in years")
    g.add_argument("--debt", type=float, default=d.debt)
    g.add_argument("--grid-min", type=float, default=-8.0)
    g.add_argument("--grid-max", type=float, default=8.0)
    g.add_argument("--grid-n", type=int, default=512)
    g.add_argument("--tau0", type=float, default=None, help="split time in years (default tau*/2)")
    g.add_argument("--h-list", type=_float_list, default=None)
    g.add_argument("--lambda", dest="lam", type=_lam, default="auto")
    g.add_argument("--noise", type=float, default=0.0, help="noise std relative to max|data|")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--mask", type=_interval, default=None, help="observed interval 'lo,hi' in y")
    g.add_argument("--out", type=Path, default=None, help="output directory")
    g.add_argument("--config", type=Path, default=None, help="key=value file mirroring the flags")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="lipd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("params", parents=[common], help="print the gauge constants")
    p = sub.add_parser("w", parents=[common], help="tabulate the weight w(tau, y)")
    p.add_argument("--tau", type=float, default=None, help="years (default tau*)")
    for name, text in (("forward", "Duhamel map f -> v(tau*)"),
                       ("synth", "nonlinear synthetic prices with noise"),
                       ("demo-uniqueness", "run the uniqueness pipeline on a perturbation")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--f", type=Path, default=None, help="perturbation field CSV (default: smooth bump)")
        p.add_argument("--L", type=float, default=None, help="support bound, f = 0 left of -L")
        if name == "synth":
            p.add_argument("--nt", type=int, default=400)
    p = sub.add_parser("invert", parents=[common], help="Tikhonov reconstruction of f")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--v", type=Path, help="gauged response field CSV")
    src.add_argument("--market", type=Path, help="market CSV with columns A,u")
    p.add_argument("--support-min", type=float, default=None, help="restrict the unknown to y >= value")
    p = sub.add_parser("fbi", parents=[common], help="FBI transform or wave-front scan of a field")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--scan", action="store_true")
    p.add_argument("--xi-range", type=_interval, default=(-4.0, 4.0))
    sub.add_parser("verify-lemmas", parents=[common], help="run the estimate suite")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse ``argv``; a ``--config`` file supplies defaults that explicit flags override."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = lio.read_config(args.config)
    except (OSError, lio.ParseError) as exc:
        parser.error(str(exc))
    cfg = {("lam" if k == "lambda" else k): v for k, v in cfg.items()}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    unknown = sorted(set(cfg) - set(known) - {"config", "command"})
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**cfg)  # argparse converts string defaults with each flag's type
    return parser.parse_args(argv)


# --- helpers --------------------------------------------------------------------


def _params(args) -> ModelParams:
    return ModelParams(sigma0=args.sigma0, mu0=args.mu0, r=args.r, tau_star=args.tau_star, debt=args.debt)


def _grid(args) -> Grid:
    return Grid(args.grid_min, args.grid_max, args.grid_n)


def _perturbation(args, grid: Grid) -> DriftPerturbation:
    f = lio.read_field_csv(args.f) if args.f else bump(grid, 0.5, 1.0, 0.05)
    if args.L is not None:
        return DriftPerturbation(f, args.L)
    nz = np.flatnonzero(np.abs(f.values) > 1e-14)
    return DriftPerturbation(f, max(0.0, -float(f.y[nz[0]])) if nz.size else 0.0)


def _mask(args, grid: Grid) -> np.ndarray:
    if args.mask is None:
        return np.ones(grid.n, dtype=bool)
    y = grid.nodes
    mask = (y >= args.mask[0]) & (y <= args.mask[1])
    if not mask.any():
        raise ParameterError("mask interval contains no grid node")
    return mask


def _outdir(args) -> Path | None:
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    return args.out


# --- commands -------------------------------------------------------------------


def cmd_params(args) -> dict:
    tp = derive_transformed(_params(args))
    return {"a0": tp.a0, "b0": tp.b0, "a": tp.a, "tau_norm": tp.tau_norm}


def cmd_w(args) -> dict:
    params, grid = _params(args), _grid(args)
    tau = params.tau_star if args.tau is None else args.tau
    if tau <= 0:
        raise ParameterError("tau must be positive")
    tp = derive_transformed(params)
    field = Field(grid, weight_w(params.time_scale * tau, grid.nodes, tp.a))
    if (out := _outdir(args)) is not None:
        lio.write_field_csv(field, out / "w.csv")
    return {"tau": tau, "tau_norm": params.time_scale * tau, "a": tp.a, "max": float(np.max(field.values)),
            "min": float(np.min(field.values))}


def cmd_forward(args) -> dict:
    params = _params(args)
    f = _perturbation(args, _grid(args))
    v = duhamel_forward(f, params).v_final
    if (out := _outdir(args)) is not None:
        lio.write_field_csv(v, out / "v.csv")
    return {"norm_f": f.f.norm(), "norm_v": v.norm(), "L": f.L}


def cmd_synth(args) -> dict:
    """Nonlinear prices for drift ``mu0 + f`` on the mask, as market rows.

    Noise has standard deviation ``--noise`` times ``max|U - U0|`` on the mask
    (both from the same solver).  Negative noisy prices are clipped to 0; no
    upper clip, since with drift above ``r`` a price can exceed ``A``.
    """
    params = _params(args)
    grid = _grid(args)
    if not grid.has_node_at(0.0):
        raise ParameterError("synth needs a grid node at y = 0 (use an odd --grid-n on a symmetric grid)")
    f = _perturbation(args, grid)
    U = solve_nonlinear(Field(grid, params.mu0 + np.real(f.f.values)), params, args.nt)
    mask = _mask(args, grid)
    A = params.debt * np.exp(grid.nodes[mask])
    u = params.debt * np.asarray(U.values)[mask]
    std, clipped = 0.0, 0
    if args.noise > 0:
        U0 = solve_nonlinear(Field(grid, np.full(grid.n, params.mu0)), params, args.nt)
        dV = params.debt * np.asarray((U - U0).values)[mask]
        rng = np.random.default_rng(args.seed)
        std = args.noise * float(np.max(np.abs(dV)))
        noisy = u + std * rng.standard_normal(u.size)
        u = np.maximum(noisy, 0.0)
        clipped = int(np.count_nonzero(u != noisy))
    if (out := _outdir(args)) is not None:
        lio.write_market_csv(A, u, out / "market.csv")
        lio.write_field_csv(f.f, out / "f_true.csv")
    return {"rows": int(mask.sum()), "noise_std": std, "clipped_rows": clipped, "seed": args.seed,
            "norm_f": f.f.norm()}


def cmd_invert(args) -> dict:
    params = _params(args)
    tp = derive_transformed(params)
    if args.v is not None:
        v = lio.read_field_csv(args.v)
        grid = v.grid
        mask = _mask(args, grid)
        vals = np.real(np.asarray(v.values))
        noise_profile = np.full(grid.n, float(np.max(np.abs(vals[mask]))))
    else:
        grid = _grid(args)
        data = lio.ingest_market_csv(args.market, params, grid)
        V = data.U_star - solve_base_U0(params, params.tau_star, grid)
        mask = data.mask & _mask(args, grid)
        vals = np.asarray(gauge_v_from_V(V, params.tau_star, tp).values)
        # price noise is homoscedastic; the gauge rescales it by exp(-y + b0 tau*)
        noise_profile = np.exp(-grid.nodes + tp.b0 * params.tau_star) * float(np.max(np.abs(V.values[mask])))
    Amat = assemble_forward_matrix(params, grid, mask, support_min=args.support_min)
    v_obs = vals[mask]
    noise_norm = None
    if args.lam == "auto":
        if args.noise <= 0:
            raise ParameterError("--lambda auto needs the relative noise level --noise > 0")
        std = args.noise * noise_profile[mask]
        noise_norm = float(np.sqrt(np.sum(Amat.obs_weights * std**2)))
    rep = tikhonov_solve(Amat, v_obs, lam=args.lam, noise_norm=noise_norm)
    cert = injectivity_certificate(Amat)
    summary = rep.to_dict() | {"norm_f_hat": rep.f_hat.norm(), "n_obs": int(mask.sum()),
                               "n_unknowns": int(Amat.support.sum())}
    summary["certificate"] = {k: v for k, v in cert.items() if k != "singular_values"}
    if (out := _outdir(args)) is not None:
        lio.write_field_csv(rep.f_hat, out / "f_hat.csv")
        lio.write_json(summary | {"singular_values": cert["singular_values"]}, out / "inversion.json")
    return summary


def cmd_fbi(args) -> dict:
    u = lio.read_field_csv(args.input)
    h_list = args.h_list or fbi.DEFAULT_H_LIST
    out = _outdir(args)
    if args.scan:
        tiles = fbi.wavefront_scan(u, h_list)
        rows = [t.row() | {"status": t.fit.status} for t in tiles]
        if out is not None:
            lio.write_json({"h_list": list(h_list), "tiles": rows}, out / "scan.json")
            lio.write_delta_map_csv(tiles, out / "delta_map.csv")
        return {"tiles": len(rows), "min_delta": float(min(t.fit.delta for t in tiles))}
    y = u.y
    summary = {"transforms": []}
    for h in h_list:
        pg = fbi.PhaseGrid.uniform((float(y[0]) + 3 * math.sqrt(h), float(y[-1]) - 3 * math.sqrt(h)),
                                   args.xi_range, h)
        pf = fbi.fbi_transform(u, pg)
        if out is not None:
            lio.write_phase_csv(pf, out / f"fbi_h{h:g}.csv")
        summary["transforms"].append({"h": h, "norm": pf.norm(), "boundary_mass": pf.meta.get("boundary_mass")})
    return summary


def cmd_verify_lemmas(args) -> dict:
    params = _params(args)
    cfg = ex.SuiteConfig(**({"tau0": args.tau0} if args.tau0 is not None else {}))
    reports = ex.run_lemma_suite(params, cfg)
    ledger = ex.suite_ledger(reports)
    if (out := _outdir(args)) is not None:
        lio.write_json({"ledger": ledger}, out / "lemmas.json")
    summary = {"passed": all(r.passed for r in reports),
               "results": {r.lemma_id: r.passed for r in reports}}
    if not summary["passed"]:
        raise _Failed(summary)
    return summary


def cmd_demo_uniqueness(args) -> dict:
    params = _params(args)
    grid = Grid(args.grid_min, args.grid_max, max(args.grid_n, 2048))
    f = _perturbation(args, grid)
    kwargs = {"h_list": args.h_list} if args.h_list else {}
    if args.tau0 is not None:
        kwargs["tau0"] = args.tau0
    res = ex.uniqueness_pipeline_demo(f, params, **kwargs)
    if (out := _outdir(args)) is not None:
        lio.write_json(res, out / "uniqueness.json")
    return {k: v for k, v in res.items() if k != "per_h"}


class _Failed(Exception):
    def __init__(self, payload):
        super().__init__("check failed")
        self.payload = payload


COMMANDS = {"params": cmd_params, "w": cmd_w, "forward": cmd_forward, "synth": cmd_synth, "invert": cmd_invert,
            "fbi": cmd_fbi, "verify-lemmas": cmd_verify_lemmas, "demo-uniqueness": cmd_demo_uniqueness}


def _emit(payload: dict, stream=None) -> None:
    print(json.dumps(lio.to_jsonable(payload), indent=2), file=stream or sys.stdout)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with np.errstate(over="ignore", under="ignore"):
            payload = COMMANDS[args.command](args)
    except _Failed as exc:
        _emit({"status": "failed", "command": args.command, **exc.payload})
        return 1
    except (ParameterError, OSError) as exc:
        _emit({"status": "usage-error", "command": args.command, "error": str(exc)}, sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        _emit({"status": "numerical-failure", "command": args.command, "error_type": type(exc).__name__,
               "error": str(exc), "trace": traceback.format_exc(limit=3)})
        return 1
    _emit({"status": "ok", "command": args.command, **payload})
    return 0


if __name__ == "__main__":
    sys.exit(main())
