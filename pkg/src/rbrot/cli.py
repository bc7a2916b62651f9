"""Command line interface.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, NumericalError


def thermo_check(cfg, out_dir: Path | None) -> str:
    from .thermo import check_hypotheses, coefficients, identity_suite, verify_gibbs

    eos = cfg.eos
    bg = coefficients(eos, cfg.background.rho_bar, cfg.background.theta_bar)
    rows = [("alpha", bg.alpha), ("c_v", bg.c_v), ("c_p", bg.c_p), ("lambda", bg.lam),
            ("p_rho", bg.p_rho), ("p_theta", bg.p_theta), ("e_theta", bg.e_theta),
            ("sound_speed", float(eos.sound_speed_sq(bg.rho_bar, bg.theta_bar)) ** 0.5)]
    rows += [(f"identity_{k}", v) for k, v in identity_suite(bg, eos).items()]
    rows.append(("gibbs_residual", verify_gibbs(eos)))
    for k, v in check_hypotheses(eos).items():
        rows.append((f"check_{k}", float(v)))
    text = "\n".join(f"{k:>32s}  {v:.6e}" for k, v in rows) + "\n"
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "thermo_check.csv", "w", encoding="ascii") as fh:
            fh.write("quantity,value\n")
            for k, v in rows:
                fh.write(f"{k},{v:.17g}\n")
    return text


def _out(args, cfg, sub=None):
    root = Path(args.out) if args.out else Path(cfg.output.directory)
    return root / sub if sub else root


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="rbrot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thermo-check", help="equation-of-state residual report")
    p.add_argument("config")
    p.add_argument("--out", default=None)

    p = sub.add_parser("run-limit", help="integrate the limit system")
    p.add_argument("config")
    p.add_argument("--out", default=None)

    p = sub.add_parser("run-primitive", help="integrate the compressible system at one eps")
    p.add_argument("config")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="limit run plus one primitive run per eps, with report")
    p.add_argument("config")
    p.add_argument("--out", default=None)

    p = sub.add_parser("compare", help="diagnostics from stored primitive and limit runs")
    p.add_argument("prim_manifest")
    p.add_argument("limit_manifest")
    p.add_argument("--csv", default="compare.csv")

    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            from .sweep import compare
            recs = compare(args.prim_manifest, args.limit_manifest, args.csv)
            print(f"wrote {len(recs)} records to {args.csv}")
            return 0
        cfg = load_config(args.config)
        if args.command == "thermo-check":
            print(thermo_check(cfg, Path(args.out) if args.out else None), end="")
            return 0
        from . import sweep
        if args.command == "run-limit":
            m = sweep.run_limit(cfg, _out(args, cfg, "limit"))
            print(f"limit run finished: {len(m['files'])} files")
            return 0
        if args.command == "run-primitive":
            m = sweep.run_primitive(cfg, args.eps, _out(args, cfg, sweep.run_dir_name(args.eps)))
            print(f"primitive run eps={args.eps} finished: {len(m['files'])} files")
            return 0
        m = sweep.run_sweep(cfg, _out(args, cfg))
        if m["report"] is not None:
            print(m["report"].table(), end="")
        for r in m["runs"]:
            if r["status"] != "ok":
                print(f"run eps={r['eps']} failed: {r.get('error')}", file=sys.stderr)
        return 0 if m["status"] == "ok" else 3
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
