"""Command-line front end.

Every subcommand reads one INI experiment file, runs a single analysis,
and writes namespaced artifacts (<name>.json plus <name>-*.csv) into the
output directory. Equal configs produce byte-identical artifacts; no
subcommand touches another's files.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence
(with residual diagnostics on stderr). The suite subcommand additionally
exits 1 when a criterion fails, to keep that distinct from misuse.
"""

import argparse
import os
import sys
from fractions import Fraction

from . import acceptance
from .config import ExperimentConfig, build_map, build_potential
from .errors import ConfigError, ConvergenceError, UnsupportedError
from .fixedpoint import CirclePoint
from .hyperbolic import ht_frequency
from .measures import EmpiricalMeasure, UlamMeasure, empirical
from .orbits import iterate
from .pressure import (
    entropy_spanning,
    pesin_defect,
    pressure_separated,
    pressure_spectral,
)
from .reports import render_report, write_csv, write_json
from .srb import ldp_rate, weak_srb_scan
from .transfer import conformal_solve, gibbs_check, jacobian_check


def _emit(out: str, name: str, cfg: ExperimentConfig, content: dict, tables=()):
    """Write <name>.json and any (suffix, names, rows) CSV companions."""
    write_json(os.path.join(out, f"{name}.json"),
               render_report(cfg.as_dict(), content))
    for suffix, names, rows in tables:
        write_csv(os.path.join(out, f"{name}-{suffix}.csv"), names, rows)


def _require_power_of_2(cfg: ExperimentConfig, section: str, key: str, default: int) -> int:
    n = cfg.get_int(section, key, default)
    # the solver rejects these too, but the config key name belongs here
    if n < 1 or n & (n - 1):
        raise ConfigError(
            f"config key {section}.{key} must be a power of 2, got {n}")
    return n


def _parse_point(raw: str):
    """A start point given as a float literal or an exact fraction p/q."""
    raw = raw.strip()
    if "/" in raw:
        try:
            frac = Fraction(raw)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"config key gibbs.x is not a fraction: {exc}")
        return CirclePoint.from_fraction(frac.numerator, frac.denominator)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"config key gibbs.x must be a float or p/q, got {raw!r}")


def _cmd_pressure(cfg, seed, out):
    m = build_map(cfg)
    phi = build_potential(cfg, m)
    kw = {}
    if cfg.has("pressure", "eps-ladder"):
        kw["eps_ladder"] = cfg.get_floats("pressure", "eps-ladder")
    if cfg.has("pressure", "n-ladder"):
        kw["n_ladder"] = cfg.get_ints("pressure", "n-ladder")
    est = pressure_separated(m, phi, **kw)
    content = {"separated": est.json_summary()}
    if cfg.has("pressure", "n-cells"):
        n_cells = _require_power_of_2(cfg, "pressure", "n-cells", 1 << 12)
        spectral = pressure_spectral(m, phi, n_cells)
        content["spectral"] = spectral.json_summary()
        content["method-gap"] = abs(est.value - spectral.value)
    rows = [
        (eps, n, f"{est.values[a, b]:.17g}", int(est.counts[a, b]))
        for a, eps in enumerate(est.eps_ladder)
        for b, n in enumerate(est.n_ladder)
    ]
    _emit(out, "pressure", cfg, content,
          [("ladder", ("eps", "n", "value", "count"), rows)])
    return 0


def _cmd_conformal(cfg, seed, out):
    m = build_map(cfg)
    phi = build_potential(cfg, m)
    n_cells = _require_power_of_2(cfg, "conformal", "n-cells", 1 << 12)
    kw = {}
    if cfg.has("conformal", "tol"):
        kw["tol"] = cfg.get_float("conformal", "tol")
    if cfg.has("conformal", "max-iter"):
        kw["max_iter"] = cfg.get_int("conformal", "max-iter")
    sol = conformal_solve(m, phi, n_cells, **kw)
    content = sol.json_summary("conformal-cells.csv")
    content["jacobian-error"] = jacobian_check(sol, seed=seed)
    rows = [(i, f"{v:.17g}") for i, v in enumerate(sol.measure.masses)]
    _emit(out, "conformal", cfg, content, [("cells", ("cell", "mass"), rows)])
    return 0


def _cmd_gibbs(cfg, seed, out):
    m = build_map(cfg)
    phi = build_potential(cfg, m)
    n_cells = _require_power_of_2(cfg, "gibbs", "n-cells", 1 << 12)
    sol = conformal_solve(m, phi, n_cells)
    rep = gibbs_check(
        sol,
        _parse_point(cfg.get("gibbs", "x", "1/3")),
        cfg.get_int("gibbs", "n-max", 30),
        cfg.get_float("gibbs", "epsilon", 0.1),
    )
    content = {
        "epsilon": rep.epsilon,
        "pressure": rep.pressure,
        "alpha": rep.alpha,
        "delta-min": rep.delta_min,
        "complete": rep.complete,
        "truncated-at": rep.truncated_at,
    }
    rows = [(int(n), f"{r:.17g}") for n, r in zip(rep.ns, rep.ratios)]
    _emit(out, "gibbs", cfg, content, [("ratios", ("n", "ratio"), rows)])
    return 0


def _cmd_entropy(cfg, seed, out):
    m = build_map(cfg)
    kw = {}
    if cfg.has("entropy", "eps-ladder"):
        kw["eps_ladder"] = cfg.get_floats("entropy", "eps-ladder")
    if cfg.has("entropy", "n-ladder"):
        kw["n_ladder"] = cfg.get_ints("entropy", "n-ladder")
    est = entropy_spanning(m, **kw)
    content = {
        "value": est.value,
        "uncertainty": est.uncertainty,
        "eps-ladder": est.eps_ladder,
        "n-ladder": est.n_ladder,
    }
    rows = [
        (eps, n, f"{est.values[a, b]:.17g}",
         int(est.spanning_counts[a, b]), int(est.separated_counts[a, b]))
        for a, eps in enumerate(est.eps_ladder)
        for b, n in enumerate(est.n_ladder)
    ]
    _emit(out, "entropy", cfg, content,
          [("ladder", ("eps", "n", "value", "spanning", "separated"), rows)])
    return 0


def _cmd_pesin(cfg, seed, out):
    m = build_map(cfg)
    seeds = cfg.get_int("pesin", "seeds", 20)
    n = cfg.get_int("pesin", "n", 100_000)
    kw = {"resolution": cfg.get_int("pesin", "resolution", 2)}
    if cfg.has("pesin", "q-ladder"):
        kw["q_ladder"] = cfg.get_ints("pesin", "q-ladder")
    if cfg.has("pesin", "r-ladder"):
        kw["r_ladder"] = cfg.get_floats("pesin", "r-ladder")
    summaries, rows = [], []
    worst = 0.0
    for i in range(seeds):
        orbit = iterate(m, None, n, seed=(seed, "pesin", i))
        rep = pesin_defect(m, empirical(orbit), **kw)
        summaries.append(rep.json_summary())
        worst = max(worst, abs(rep.defect))
        rows.append((i, f"{rep.entropy:.17g}", f"{rep.psi_integral:.17g}",
                     f"{rep.defect:.17g}"))
    content = {"seeds": seeds, "n": n, "worst-defect": worst,
               "reports": summaries}
    _emit(out, "pesin", cfg, content,
          [("seeds", ("seed", "entropy", "psi-integral", "defect"), rows)])
    return 0


def _cmd_hyp_times(cfg, seed, out):
    rep = ht_frequency(
        build_map(cfg),
        cfg.get_float("hyp-times", "sigma", 0.9),
        cfg.get_int("hyp-times", "n", 10_000),
        samples=cfg.get_int("hyp-times", "samples", 100),
        seed=seed,
    )
    names, rows = rep.csv_table()
    _emit(out, "hyp-times", cfg, rep.json_summary(),
          [("seeds", names, rows)])
    return 0


def _cmd_srb_scan(cfg, seed, out):
    m = build_map(cfg)
    raw = cfg.get("srb-scan", "target", "lebesgue")
    if raw == "lebesgue":
        mu = UlamMeasure.lebesgue(cfg.get_int("srb-scan", "target-cells", 256))
    elif raw.startswith("dirac:"):
        mu = EmpiricalMeasure.dirac(float(raw.split(":", 1)[1]))
    else:
        raise ConfigError(
            f"config key srb-scan.target must be lebesgue or dirac:<x>, got {raw!r}")
    ests, verdict = weak_srb_scan(
        m, mu,
        cfg.get_floats("srb-scan", "eps-ladder", (0.1,)),
        cfg.get_ints("srb-scan", "n-ladder", (500, 1000, 2000, 4000)),
        samples=cfg.get_int("srb-scan", "samples", 200),
        seed=seed,
    )
    content = {
        "verdict": verdict.json_summary(),
        "estimates": [e.json_summary() for e in ests],
    }
    names, rows = ests[0].csv_table()
    _emit(out, "srb-scan", cfg, content, [("dists", names, rows)])
    return 0


def _cmd_ldp(cfg, seed, out):
    m = build_map(cfg)
    kw = {"samples": cfg.get_int("ldp", "samples", 1_000_000), "seed": seed}
    if cfg.has("ldp", "n-ladder"):
        kw["n_ladder"] = cfg.get_ints("ldp", "n-ladder")
    rep = ldp_rate(m, cfg.get_float("ldp", "p0", 0.9), **kw)
    names, rows = rep.csv_table()
    _emit(out, "ldp", cfg, rep.json_summary(), [("ladder", names, rows)])
    return 0


def _cmd_suite(cfg, seed, out):
    numbers = cfg.get_ints("suite", "criteria") if cfg.has("suite", "criteria") else None
    results = acceptance.run_suite(seed, numbers)
    for r in results:
        print(r.line())
    content = {
        "results": [
            {"number": r.number, "title": r.title, "passed": r.passed,
             "details": r.details, "elapsed": round(r.elapsed, 3),
             "budget": r.budget}
            for r in results
        ],
        "all-passed": all(r.passed for r in results),
    }
    rows = [(r.number, r.title, "PASS" if r.passed else "FAIL",
             f"{r.elapsed:.1f}") for r in results]
    _emit(out, "suite", cfg, content,
          [("table", ("criterion", "title", "status", "elapsed"), rows)])
    return 0 if content["all-passed"] else 1


_HANDLERS = {
    "pressure": (_cmd_pressure, "separated-set pressure, optionally vs spectral"),
    "conformal": (_cmd_conformal, "leading eigenpair of the transfer operator"),
    "gibbs": (_cmd_gibbs, "Gibbs-ratio certification along one orbit"),
    "entropy": (_cmd_entropy, "topological entropy from spanning sets"),
    "pesin": (_cmd_pesin, "entropy-formula defect over random seeds"),
    "hyp-times": (_cmd_hyp_times, "hyperbolic-time frequency statistics"),
    "srb-scan": (_cmd_srb_scan, "pseudo-basin decay scan and verdict"),
    "ldp": (_cmd_ldp, "digit-frequency large-deviation rates"),
    "suite": (_cmd_suite, "run the full acceptance battery"),
}


def main(argv=None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="INI experiment file (optional; defaults apply)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="master seed, overrides [run] seed")
    common.add_argument("--out", metavar="DIR",
                        help="artifact directory, overrides [run] out")
    parser = argparse.ArgumentParser(
        prog="ergolab",
        description="conformal measures, pressure, hyperbolic times, and "
                    "physical-measure scans on interval and circle maps",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, (_, blurb) in _HANDLERS.items():
        sub.add_parser(name, parents=[common], help=blurb)
    args = parser.parse_args(argv)

    try:
        if args.config is not None:
            cfg = ExperimentConfig.load(args.config)
        else:
            cfg = ExperimentConfig()
        seed = args.seed if args.seed is not None else cfg.get_int("run", "seed", 0)
        out = args.out if args.out is not None else cfg.get("run", "out", ".")
        # echo the resolved seed so equal effective configs hash equal; the
        # output directory is a destination, not an experiment parameter,
        # so it stays out of the report
        cfg.override("run", "seed", str(seed))
        cfg.drop("run", "out")
        return _HANDLERS[args.subcommand][0](cfg, seed, out)
    except (ConfigError, UnsupportedError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        msg = f"solver did not converge: {exc}"
        if exc.residual is not None:
            msg += f" (residual {exc.residual:.3e} after {exc.iterations} iterations)"
        print(msg, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
