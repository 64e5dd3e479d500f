"""Batch front end: seeded, file-based experiment runner.

Subcommands
    verify     lattice-scan certificates (phase lower bound, weight upper
               bound, partial-sum growth regimes, divisor bound)
    simulate   one trajectory with conservation diagnostics
    energy     ensemble scan of the derivative-bound ratios per truncation
    measure    moments | convergence | pushforward | jacobian | gauge
    report     summarize previously written CSV files

Common flags: --config JSON (flag values win over config values), --out
prefix, --seed, --threads.  Outputs are RFC-4180 CSV with a '#'-prefixed
schema comment as the first line, plus JSON-lines for trajectories; floats
are written with 17 significant digits so they round-trip exactly.

Exit codes: 0 success, 1 failed check or degenerate estimator, 2 invalid or
unsupported parameters, 3 blowup (time reported on stderr).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import measure as ms
from .dynamics import SimParams, conservation_report, evolve
from .energy import in_estimate_regime
from .errors import (
    BlowupError,
    DegenerateEstimatorError,
    InvalidParameterError,
    UnsupportedRegimeError,
)
from .measure import Ensemble, RegionSpec
from .resonance import (
    divisor_counts_upto,
    varphi_regime_bounds,
    verify_dmvt_bound,
    verify_phase_lower_bound,
)
from .spectral import SpectralField

__all__ = ["main"]


def _f17(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: str, schema: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={schema}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_f17(v) if isinstance(v, float) else v for v in row])


def _load_field(path: str) -> SpectralField:
    with open(path) as fh:
        data = json.load(fh)
    coeffs = np.array([re + 1j * im for re, im in data["coeffs"]])
    return SpectralField(int(data["cutoff"]), coeffs)


def save_field(f: SpectralField, path: str) -> None:
    data = {
        "cutoff": f.cutoff,
        "coeffs": [[float(c.real), float(c.imag)] for c in f.coeffs],
    }
    with open(path, "w") as fh:
        json.dump(data, fh)


def _parse_int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _parse_float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


# ----------------------------------------------------------------------
# subcommand bodies


def _cmd_verify(args) -> int:
    if args.alpha <= 0.5:
        print(f"alpha = {args.alpha} <= 1/2: no dispersion, scans undefined", file=sys.stderr)
        return 2
    if args.s <= 1.0:
        print(f"s = {args.s} <= 1: weight upper bound undefined", file=sys.stderr)
        return 2
    rows = []
    ok = True

    rep = verify_phase_lower_bound(args.alpha, args.radius)
    ok &= rep.min_ratio > 0 and math.isfinite(rep.max_ratio)
    rows.append(
        ["phase_lower_bound", "alpha", float(args.alpha), rep.scan_radius,
         rep.min_ratio, rep.max_ratio,
         " ".join(map(str, rep.argmin_quad.as_tuple())), int(rep.min_ratio > 0)]
    )
    rep = verify_dmvt_bound(args.s, args.radius)
    ok &= math.isfinite(rep.max_ratio)
    rows.append(
        ["weight_upper_bound", "s", float(args.s), rep.scan_radius,
         rep.min_ratio, rep.max_ratio,
         " ".join(map(str, rep.argmax_quad.as_tuple())), int(math.isfinite(rep.max_ratio))]
    )
    for beta in (0.5, 1.0, 2.0):
        lo, hi = varphi_regime_bounds(beta, args.kmax)
        good = 0 < lo <= hi < math.inf
        ok &= good
        rows.append(
            ["partial_sum_regime", "beta", beta, args.kmax, lo, hi, "", int(good)]
        )
    counts = divisor_counts_upto(args.kmax)
    n = np.arange(1, args.kmax + 1, dtype=float)
    ratios = counts[1:] / np.sqrt(n)
    worst = int(np.argmax(ratios)) + 1
    good = bool(np.isfinite(ratios).all())
    ok &= good
    rows.append(
        ["divisor_bound", "delta", 0.5, args.kmax,
         float(np.min(ratios)), float(np.max(ratios)), str(worst), int(good)]
    )

    _write_csv(args.out + ".csv", "fnlslab/verify/v1",
               ["check", "param", "value", "radius", "min_ratio", "max_ratio",
                "witness", "pass"], rows)
    return 0 if ok else 1


def _cmd_simulate(args) -> int:
    p = SimParams(alpha=args.alpha, s=args.s, N=args.N, eps=args.eps,
                  sign=args.sign, dt=args.dt, horizon=args.horizon)
    if args.initial:
        f0 = _load_field(args.initial)
        if f0.cutoff < p.N:
            f0 = f0.project(p.N)
    else:
        f0 = ms.sample_mu(p, args.seed, 0)
    tr = evolve(f0, p, record_every=args.record_every)

    with open(args.out + ".trajectory.jsonl", "w") as fh:
        for t, f in zip(tr.times, tr.states):
            snap = {
                "time": float(t),
                "coeffs": [[float(c.real), float(c.imag)] for c in f.coeffs],
            }
            fh.write(json.dumps(snap) + "\n")

    from .dynamics import truncated_energy, truncated_mass

    m0 = truncated_mass(tr.states[0])
    e0 = truncated_energy(tr.states[0], p)
    rows = []
    for t, f in zip(tr.times, tr.states):
        m = truncated_mass(f)
        en = truncated_energy(f, p)
        rows.append([float(t), m, en,
                     abs(m - m0) / max(1.0, abs(m0)),
                     abs(en - e0) / max(1.0, abs(e0))])
    _write_csv(args.out + ".conservation.csv", "fnlslab/simulate/v1",
               ["time", "mass", "energy", "mass_drift", "energy_drift"], rows)
    rep = conservation_report(tr, p)
    print(f"mass drift {rep['mass_drift']:.3e}, energy drift {rep['energy_drift']:.3e}")
    return 0


def _cmd_energy(args) -> int:
    base = SimParams(alpha=args.alpha, s=args.s, N=max(args.N_list or [1]),
                     eps=args.eps)
    if not in_estimate_regime(args.alpha, args.s):
        print(f"note: (alpha, s) = ({args.alpha}, {args.s}) is outside the "
              "proved estimate regime; scanning anyway", file=sys.stderr)
    rows = []
    worst_residual = 0.0
    fd_step = args.fd_step if args.fd_step else None  # 0 disables the FD column
    scan = ms.ratio_scan(base, args.N_list, args.samples, args.seed,
                         eps_tilde=args.eps_tilde, fd_step=fd_step,
                         threads=args.threads)
    per_n_strong: dict[int, float] = {}
    per_n_weak: dict[int, float] = {}
    for row in scan:
        res = row.fd_residual if row.fd_residual is not None else ""
        if row.fd_residual is not None:
            worst_residual = max(worst_residual, row.fd_residual)
        rows.append([row.N, row.index, row.strong, row.weak, *row.terms, res])
        per_n_strong[row.N] = max(per_n_strong.get(row.N, 0.0), row.strong)
        per_n_weak[row.N] = max(per_n_weak.get(row.N, 0.0), row.weak)
    for N in sorted(per_n_strong):
        rows.append([N, "max", per_n_strong[N], per_n_weak[N], "", "", "", "", ""])
    _write_csv(args.out + ".csv", "fnlslab/energy/v1",
               ["N", "sample", "strong_ratio", "weak_ratio",
                "term_n1", "term_r1", "term_n2", "term_r2", "fd_residual"], rows)
    if worst_residual > 1e-4:
        print(f"finite-difference residual {worst_residual:.3e} exceeds 1e-4",
              file=sys.stderr)
        return 1
    return 0


def _cmd_measure(args) -> int:
    p = SimParams(alpha=args.alpha, s=args.s, N=args.N, eps=args.eps)
    out = args.out + ".csv"
    ok = True

    if args.experiment == "moments":
        e = Ensemble(p, args.seed, args.samples)
        rows = []
        for q in args.p:
            val, se = ms.lp_moment(args.stat, q, e, weight=args.weight_r)
            rows.append([args.stat, float(q), val, se])
        _write_csv(out, "fnlslab/measure-moments/v1",
                   ["stat", "p", "value", "stderr"], rows)

    elif args.experiment == "convergence":
        n_max = max(args.N_list)
        pp = replace(p, N=n_max)
        e = Ensemble(pp, args.seed, args.samples)
        table = ms.r_convergence(pp, e, args.N_list, p_norm=args.p_norm)
        rows = [[N, v] for N, v in table]
        _write_csv(out, "fnlslab/measure-convergence/v1",
                   ["N", "lp_distance_to_largest"], rows)
        diffs = [v for _, v in table]
        ok &= all(a > b for a, b in zip(diffs, diffs[1:])) or len(diffs) < 2

    elif args.experiment == "pushforward":
        e = Ensemble(p, args.seed, args.samples)
        region = RegionSpec(
            sigma=args.ball_sigma,
            radius=args.ball_radius,
            halfspace_mode=args.halfspace_mode,
        )
        r = args.r if args.r is not None else ms.default_radius(p)
        rows = []
        for t in args.t:
            chk = ms.pushforward_check(region, p, r, t, e)
            rows.append([float(t), chk.lhs, chk.lhs_ci[0], chk.lhs_ci[1],
                         chk.rhs, chk.rhs_ci[0], chk.rhs_ci[1], chk.ratio,
                         chk.samples_in_region, int(chk.cis_overlap)])
            ok &= chk.cis_overlap
        _write_csv(out, "fnlslab/measure-pushforward/v1",
                   ["t", "lhs", "lhs_lo", "lhs_hi", "rhs", "rhs_lo", "rhs_hi",
                    "ratio", "in_region", "pass"], rows)

    elif args.experiment == "jacobian":
        f0 = ms.sample_mu(p, args.seed, 0)
        rows = []
        for t in args.t:
            det = ms.flow_jacobian_det(f0, p, t)
            good = abs(det - 1.0) <= 1e-4
            ok &= good
            rows.append([float(t), det, int(good)])
        _write_csv(out, "fnlslab/measure-jacobian/v1", ["t", "det", "pass"], rows)

    elif args.experiment == "gauge":
        e = Ensemble(p, args.seed, args.samples)
        rows = []
        for t in args.t:
            chk = ms.gauge_invariance_check(p, t, e)
            for name, d in chk.stats:
                rows.append([float(t), name, d, chk.critical_1pct,
                             int(d < chk.critical_1pct)])
            ok &= chk.max_ks < chk.critical_1pct
        _write_csv(out, "fnlslab/measure-gauge/v1",
                   ["t", "stat", "ks_distance", "critical_1pct", "pass"], rows)

    else:
        raise InvalidParameterError(f"unknown measure experiment {args.experiment!r}")
    return 0 if ok else 1


def _cmd_report(args) -> int:
    code = 0
    for path in args.inputs:
        try:
            with open(path) as fh:
                first = fh.readline().strip()
                reader = csv.reader(fh)
                header = next(reader, [])
                data = list(reader)
        except FileNotFoundError:
            print(f"{path}: not found", file=sys.stderr)
            code = 2
            continue
        print(f"{path}: {first}")
        print(f"  rows: {len(data)}, columns: {', '.join(header)}")
        if "pass" in header:
            j = header.index("pass")
            passes = [row[j] for row in data if row[j] != ""]
            fails = sum(1 for v in passes if v not in ("1", "1.0", "True"))
            print(f"  pass column: {len(passes) - fails}/{len(passes)} passing")
            if fails:
                code = max(code, 1)
    return code


# ----------------------------------------------------------------------
# argument plumbing


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fnlslab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", help="JSON file of default flag values")
    ap.add_argument("--out", help="output path prefix")
    ap.add_argument("--seed", type=int, help="ensemble seed (64-bit)")
    ap.add_argument("--threads", type=int, help="worker pool size (default 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="lattice-scan certificates")
    v.add_argument("--alpha", type=float)
    v.add_argument("--s", type=float)
    v.add_argument("--radius", type=int)
    v.add_argument("--kmax", type=int)

    s = sub.add_parser("simulate", help="one trajectory + conservation")
    s.add_argument("--alpha", type=float)
    s.add_argument("--s", type=float)
    s.add_argument("--N", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--horizon", type=float)
    s.add_argument("--eps", type=float)
    s.add_argument("--sign", type=int)
    s.add_argument("--record-every", dest="record_every", type=int)
    s.add_argument("--initial", help="JSON field file (overrides --seed draw)")

    e = sub.add_parser("energy", help="derivative-bound ratio scan")
    e.add_argument("--alpha", type=float)
    e.add_argument("--s", type=float)
    e.add_argument("--eps", type=float)
    e.add_argument("--N-list", dest="N_list", type=_parse_int_list)
    e.add_argument("--samples", type=int)
    e.add_argument("--eps-tilde", dest="eps_tilde", type=float)
    e.add_argument("--fd-step", dest="fd_step", type=float)

    m = sub.add_parser("measure", help="ensemble and transport experiments")
    m.add_argument("experiment",
                   choices=["moments", "convergence", "pushforward", "jacobian", "gauge"])
    m.add_argument("--alpha", type=float)
    m.add_argument("--s", type=float)
    m.add_argument("--N", type=int)
    m.add_argument("--eps", type=float)
    m.add_argument("--samples", type=int)
    m.add_argument("--stat", help="statistic spec, e.g. abs_coeff:0")
    m.add_argument("--p", type=_parse_float_list, help="moment orders")
    m.add_argument("--weight-r", dest="weight_r", type=float)
    m.add_argument("--N-list", dest="N_list", type=_parse_int_list)
    m.add_argument("--p-norm", dest="p_norm", type=float)
    m.add_argument("--t", type=_parse_float_list)
    m.add_argument("--r", type=float)
    m.add_argument("--ball-sigma", dest="ball_sigma", type=float)
    m.add_argument("--ball-radius", dest="ball_radius", type=float)
    m.add_argument("--halfspace-mode", dest="halfspace_mode", type=int)

    r = sub.add_parser("report", help="summarize result CSVs")
    r.add_argument("inputs", nargs="+")
    return ap


_DEFAULTS = {
    "out": "fnlslab_run",
    "seed": 0,
    "threads": 1,
    "s": 1.5,
    "radius": 32,
    "kmax": 100_000,
    "dt": 1e-3,
    "horizon": 1.0,
    "eps": 0.1,
    "sign": 1,
    "record_every": 100,
    "N_list": [8, 16],
    "samples": 100,
    "stat": "abs_coeff:0",
    "p": [2.0],
    "p_norm": 2.0,
    "t": [0.0],
    "N": 8,
    "eps_tilde": None,
    "fd_step": 1e-6,
    "weight_r": None,
    "r": None,
    "ball_sigma": 0.0,
    "ball_radius": None,
    "halfspace_mode": None,
    "initial": None,
}


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    for key, hard in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, config.get(key, hard))
    if hasattr(args, "alpha") and args.alpha is None:
        args.alpha = config.get("alpha")
        if args.alpha is None:
            raise InvalidParameterError("--alpha is required (flag or config)")
    return args


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        args = _apply_config(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "energy":
            return _cmd_energy(args)
        if args.command == "measure":
            return _cmd_measure(args)
        if args.command == "report":
            return _cmd_report(args)
        raise InvalidParameterError(f"unknown command {args.command!r}")
    except BlowupError as err:
        print(f"blowup detected at t={err.time:.6g}", file=sys.stderr)
        return 3
    except (InvalidParameterError, UnsupportedRegimeError) as err:
        print(f"invalid parameters: {err}", file=sys.stderr)
        return 2
    except DegenerateEstimatorError as err:
        print(f"degenerate estimator: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
