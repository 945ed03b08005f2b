"""Command-line entry point: ``rdbp {simulate,equilibrium,brs,transport}``.

Exit status is 0 on success, 1 on runtime or I/O failure and 2 when the
configuration or arguments fail validation.

Config schema (JSON)::

    {
      "seed": 12345,                      # required, integer >= 0
      "horizon": 300,                     # >= 1, default 300
      "runs": 200,                        # >= 1, default 1
      "population_cap": 1000000,          # >= 1, default 10**6
      "cap_mode": "downsample",           # or "halt"
      "workers": 1,                       # processes for Monte Carlo runs
      "subpopulations": [                 # >= 1 entry; two for equilibrium
        {"label": "h",
         "initial_count": 1000,
         "offspring": {"family": "poisson", "mean": 2.0},
         "resource":  {"family": "deterministic", "value": 0.9},
         "claims":    {"family": "uniform", "lower": 0.0, "upper": 1.0}}
      ],
      "solver": {"upper": null, "grid_points": 4096, "bisection_tol": 1e-12},
      "outputs": {"trace": "trace.csv", "summary": "summary.json",
                  "equilibrium": "equilibrium.json"}
    }

Distribution records:

* claims: ``uniform{lower,upper}``, ``exponential{rate}``,
  ``lognormal{mu,sigma}``, ``point_mass{value}``,
  ``finite_discrete{atoms,probs}``
* offspring: ``poisson{mean}``, ``geometric{mean}``, ``deterministic{k}``,
  ``finite_pmf{counts,probs}``
* resource: ``deterministic{value}``, ``gamma{shape,scale}``,
  ``uniform{lower,upper}``

Command-line ``--seed``, ``--runs`` and ``--horizon`` override the config,
and ``--out``/``--summary`` override ``outputs``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import records
from .brs import brs_check
from .dists import (DistributionError, Uniform, claim_from_record, offspring_from_record,
                    resource_from_record)
from .equilibrium import EquilibriumError, SearchDomain, solve_equilibrium
from .sim import DEFAULT_CAP, DEFAULT_HORIZON, monte_carlo
from .society import SubPopulationSpec
from .transport import (TransportError, brute_force_optimal, check_monge, control_search,
                        northwest_plan, quantile_coupling_cost)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    """Validation failure; the message starts with the offending field."""

    def __init__(self, field_path: str, msg: str):
        super().__init__(f"{field_path}: {msg}")
        self.field = field_path


@dataclass(frozen=True)
class SubPopulationConfig:
    spec: SubPopulationSpec
    initial_count: int


@dataclass(frozen=True)
class ExperimentConfig:
    subpopulations: tuple[SubPopulationConfig, ...]
    seed: int
    horizon: int = DEFAULT_HORIZON
    runs: int = 1
    population_cap: int = DEFAULT_CAP
    cap_mode: str = "downsample"
    workers: int = 1
    domain: SearchDomain = field(default_factory=SearchDomain)
    outputs: Mapping[str, str] = field(default_factory=dict)

    @property
    def specs(self) -> list[SubPopulationSpec]:
        return [s.spec for s in self.subpopulations]

    @property
    def labels(self) -> list[str]:
        return [s.spec.label for s in self.subpopulations]

    @property
    def initial_counts(self) -> list[int]:
        return [s.initial_count for s in self.subpopulations]


def _int(rec: Mapping, key: str, where: str, default=None, minimum: int | None = None,
         required: bool = False) -> int:
    path = f"{where}.{key}" if where else key
    if key not in rec:
        if required:
            raise ConfigError(path, "missing required field")
        return default
    v = rec[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return v


def _law(rec: Any, path: str, parser):
    if not isinstance(rec, Mapping):
        raise ConfigError(path, "expected an object with a 'family' field")
    try:
        return parser(rec)
    except (DistributionError, TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a decoded JSON config; raises :class:`ConfigError`."""
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a JSON object")
    seed = _int(raw, "seed", "", minimum=0, required=True)
    subs = raw.get("subpopulations")
    if not isinstance(subs, list) or not subs:
        raise ConfigError("subpopulations", "need a non-empty list")
    parsed, seen = [], set()
    for k, s in enumerate(subs):
        where = f"subpopulations[{k}]"
        if not isinstance(s, Mapping):
            raise ConfigError(where, "expected an object")
        label = s.get("label", str(k))
        if not isinstance(label, str) or not label:
            raise ConfigError(f"{where}.label", "expected a non-empty string")
        if label in seen:
            raise ConfigError(f"{where}.label", f"duplicate label {label!r}")
        seen.add(label)
        for key in ("offspring", "resource", "claims"):
            if key not in s:
                raise ConfigError(f"{where}.{key}", "missing required field")
        off = _law(s["offspring"], f"{where}.offspring", offspring_from_record)
        res = _law(s["resource"], f"{where}.resource", resource_from_record)
        cl = _law(s["claims"], f"{where}.claims", claim_from_record)
        try:
            spec = SubPopulationSpec(label, off, res, cl)
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
        parsed.append(SubPopulationConfig(spec, _int(s, "initial_count", where, 1, minimum=0)))

    cap_mode = raw.get("cap_mode", "downsample")
    if cap_mode not in ("downsample", "halt"):
        raise ConfigError("cap_mode", f"expected 'downsample' or 'halt', got {cap_mode!r}")

    solver = raw.get("solver", {}) or {}
    if not isinstance(solver, Mapping):
        raise ConfigError("solver", "expected an object")
    upper = solver.get("upper")
    if upper is not None and (isinstance(upper, bool) or not isinstance(upper, (int, float)) or upper <= 0):
        raise ConfigError("solver.upper", f"expected a positive number or null, got {upper!r}")
    tol = solver.get("bisection_tol", 1e-12)
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or tol <= 0:
        raise ConfigError("solver.bisection_tol", f"expected a positive number, got {tol!r}")
    domain = SearchDomain(upper=None if upper is None else float(upper),
                          grid_points=_int(solver, "grid_points", "solver", 4096, minimum=2),
                          bisection_tol=float(tol))

    outputs = raw.get("outputs", {}) or {}
    if not isinstance(outputs, Mapping) or not all(isinstance(v, str) for v in outputs.values()):
        raise ConfigError("outputs", "expected an object of path strings")

    return ExperimentConfig(
        subpopulations=tuple(parsed),
        seed=seed,
        horizon=_int(raw, "horizon", "", DEFAULT_HORIZON, minimum=1),
        runs=_int(raw, "runs", "", 1, minimum=1),
        population_cap=_int(raw, "population_cap", "", DEFAULT_CAP, minimum=1),
        cap_mode=cap_mode,
        workers=_int(raw, "workers", "", 1, minimum=1),
        domain=domain,
        outputs=dict(outputs),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a config file.  I/O errors propagate as ``OSError``."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    return parse_config(raw)


def _override(cfg: ExperimentConfig, seed=None, runs=None, horizon=None) -> ExperimentConfig:
    from dataclasses import replace

    if seed is not None and seed < 0:
        raise ConfigError("--seed", "must be >= 0")
    if runs is not None and runs < 1:
        raise ConfigError("--runs", "must be >= 1")
    if horizon is not None and horizon < 1:
        raise ConfigError("--horizon", "must be >= 1")
    return replace(cfg,
                   seed=cfg.seed if seed is None else seed,
                   runs=cfg.runs if runs is None else runs,
                   horizon=cfg.horizon if horizon is None else horizon)


def _emit_json(obj, out: str | None) -> None:
    text = records.dumps(obj)
    if out:
        records.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _two(cfg: ExperimentConfig):
    if len(cfg.subpopulations) != 2:
        raise ConfigError("subpopulations", f"need exactly two entries (home, immigrant), got "
                                            f"{len(cfg.subpopulations)}")
    return cfg.specs[0], cfg.specs[1]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(config_path, out_trace=None, out_summary=None, seed=None, runs=None,
                 horizon=None, workers=None, backend=None) -> int:
    cfg = _override(load_config(config_path), seed, runs, horizon)
    out_trace = out_trace or cfg.outputs.get("trace")
    out_summary = out_summary or cfg.outputs.get("summary")
    if not out_trace and not out_summary:
        raise ConfigError("outputs", "give a trace and/or summary path (config or --out/--summary)")
    summary = monte_carlo(cfg.specs, cfg.initial_counts, horizon=cfg.horizon, runs=cfg.runs,
                          base_seed=cfg.seed, population_cap=cfg.population_cap,
                          cap_mode=cfg.cap_mode, keep_traces=bool(out_trace),
                          workers=workers or cfg.workers, backend=backend)
    if out_trace:
        records.write_trace_csv(out_trace, summary.outcomes, cfg.labels)
    if out_summary:
        records.atomic_write(out_summary, records.dumps(records.summary_record(summary, cfg.labels, cfg.horizon)))
    return EXIT_OK


def cmd_equilibrium(config_path, out_json=None) -> int:
    cfg = load_config(config_path)
    spec_h, spec_i = _two(cfg)
    dropped: list = []
    try:
        sols = solve_equilibrium(spec_h, spec_i, cfg.domain, diagnostics=dropped)
    except EquilibriumError as exc:
        raise ConfigError("subpopulations", str(exc)) from None
    _emit_json({"solutions": [s.to_record() for s in sols], "dropped": dropped},
               out_json or cfg.outputs.get("equilibrium"))
    return EXIT_OK


def _law_arg(text: str, flag: str):
    """A claim law given inline as JSON or as a path to a JSON file."""
    p = Path(text)
    try:
        raw = json.loads(p.read_text() if not text.lstrip().startswith("{") and p.exists() else text)
    except json.JSONDecodeError as exc:
        raise ConfigError(flag, f"invalid JSON ({exc.msg} at column {exc.colno})") from None
    return _law(raw, flag, claim_from_record)


def cmd_brs(dist: str, n: int, budget: float, runs: int, seed: int, out=None, backend=None) -> int:
    law = _law_arg(dist, "--dist")
    if n < 1:
        raise ConfigError("--n", "must be >= 1")
    if not (budget >= 0):
        raise ConfigError("--budget", "must be >= 0")
    if runs < 100:
        raise ConfigError("--runs", f"must be >= 100, got {runs}")
    if seed < 0:
        raise ConfigError("--seed", "must be >= 0")
    res = brs_check(law, n, budget, runs, seed, backend=backend)
    _emit_json(res.to_record(), out)
    return EXIT_OK


def _grid(path):
    try:
        return records.read_transport_csv(path)
    except ValueError as exc:
        raise ConfigError("--input", str(exc)) from None


def cmd_transport(args) -> int:
    sub = args.transport_cmd
    if sub == "nw":
        a, b, cost = _grid(args.input)
        try:
            plan = northwest_plan(a, b, cost, normalize=args.normalize)
        except TransportError as exc:
            raise ConfigError("--input", str(exc)) from None
        sidecar = args.sidecar or f"{args.out}.json"
        side = {"cost": plan.total_cost, "monge": check_monge(cost, args.monge_tol),
                "sparsity": plan.sparsity}
        records.write_matrix_csv(args.out, plan.flows)
        records.atomic_write(sidecar, records.dumps(side))
        return EXIT_OK
    if sub == "check-monge":
        _, _, cost = _grid(args.input)
        _emit_json({"monge": check_monge(cost, args.monge_tol)}, args.out)
        return EXIT_OK
    if sub == "oracle":
        a, b, cost = _grid(args.input)
        try:
            best = brute_force_optimal(a, b, cost, mass_unit=args.mass_unit)
        except TransportError as exc:
            raise ConfigError("--input", str(exc)) from None
        _emit_json({"cost": best}, args.out)
        return EXIT_OK
    if sub == "quantile-cost":
        src = _law_arg(args.src, "--src")
        dst = _law_arg(args.dst, "--dst")
        if args.p < 1:
            raise ConfigError("--p", "must be >= 1")
        cost = quantile_coupling_cost(src, dst, args.p, args.quad_points)
        _emit_json({"cost": cost, "p": args.p}, args.out)
        return EXIT_OK
    if sub == "control":
        cfg = load_config(args.config)
        spec_h, spec_i = _two(cfg)
        if args.uniform_upper is not None:
            lo, hi, count = args.uniform_upper
            count = int(count)
            if not (0 < lo <= hi) or count < 1:
                raise ConfigError("--uniform-upper", "need 0 < LO <= HI and COUNT >= 1")
            cands = [({"family": "uniform", "lower": 0.0, "upper": float(t)}, Uniform(0.0, float(t)))
                     for t in np.linspace(lo, hi, count)]
        elif args.candidates is not None:
            raw = json.loads(Path(args.candidates).read_text())
            if not isinstance(raw, list) or not raw:
                raise ConfigError("--candidates", "expected a non-empty JSON list of claim records")
            cands = [(rec, _law(rec, f"--candidates[{k}]", claim_from_record)) for k, rec in enumerate(raw)]
        else:
            raise ConfigError("--candidates", "give --candidates FILE or --uniform-upper LO HI COUNT")
        try:
            ranked = control_search(spec_h.claims, cands, spec_h, spec_i, args.p, cfg.domain,
                                    args.quad_points)
        except (TransportError, EquilibriumError) as exc:
            raise ConfigError("--candidates", str(exc)) from None
        _emit_json({
            "source": spec_h.claims.to_record(),
            "p": args.p,
            "ranked": [{"params": c.params, "cost": c.cost, "tau": c.demand.tau_tilde,
                        "alpha": c.demand.alpha_tilde, "effective_mean": c.demand.effective_mean}
                       for c in ranked],
        }, args.out)
        return EXIT_OK
    raise ConfigError("transport", f"unknown subcommand {sub!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdbp", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--backend", choices=["compiled", "python"], default=None,
                   help="kernel backend (default: compiled when available)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo trajectories")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="trace CSV path")
    s.add_argument("--summary", help="summary JSON path")
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--workers", type=int)

    e = sub.add_parser("equilibrium", help="solve for (tau, alpha) equilibria")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="solutions JSON path (default stdout)")

    b = sub.add_parser("brs", help="check the BRS bound by Monte Carlo")
    b.add_argument("--dist", required=True, help="claim law as JSON or a JSON file path")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--budget", type=float, required=True)
    b.add_argument("--runs", type=int, default=10_000)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--out")

    t = sub.add_parser("transport", help="transport plans and costs")
    tsub = t.add_subparsers(dest="transport_cmd", required=True)
    nw = tsub.add_parser("nw", help="northwest-corner plan")
    nw.add_argument("--input", required=True, help="grid CSV: first row b, first column a, body cost")
    nw.add_argument("--out", required=True, help="flow matrix CSV")
    nw.add_argument("--sidecar", help="JSON sidecar path (default OUT.json)")
    nw.add_argument("--normalize", action="store_true", help="rescale b to the total of a")
    nw.add_argument("--monge-tol", type=float, default=0.0)
    cm = tsub.add_parser("check-monge", help="adjacent-minor Monge test")
    cm.add_argument("--input", required=True)
    cm.add_argument("--monge-tol", type=float, default=0.0)
    cm.add_argument("--out")
    orc = tsub.add_parser("oracle", help="brute-force optimal cost (small instances)")
    orc.add_argument("--input", required=True)
    orc.add_argument("--mass-unit", type=float, default=1.0)
    orc.add_argument("--out")
    qc = tsub.add_parser("quantile-cost", help="quantile-coupling cost between two laws")
    qc.add_argument("--src", required=True)
    qc.add_argument("--dst", required=True)
    qc.add_argument("--p", type=float, default=2.0)
    qc.add_argument("--quad-points", type=int, default=512)
    qc.add_argument("--out")
    ct = tsub.add_parser("control", help="rank admissible demand laws by transport cost")
    ct.add_argument("--config", required=True, help="two-population config; home claims are the source")
    g = ct.add_mutually_exclusive_group()
    g.add_argument("--candidates", help="JSON list of claim records")
    g.add_argument("--uniform-upper", nargs=3, type=float, metavar=("LO", "HI", "COUNT"),
                   help="grid of Uniform(0, theta) laws")
    ct.add_argument("--p", type=float, default=2.0)
    ct.add_argument("--quad-points", type=int, default=512)
    ct.add_argument("--out")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.summary, args.seed, args.runs,
                                args.horizon, args.workers, args.backend)
        if args.command == "equilibrium":
            return cmd_equilibrium(args.config, args.out)
        if args.command == "brs":
            return cmd_brs(args.dist, args.n, args.budget, args.runs, args.seed, args.out, args.backend)
        return cmd_transport(args)
    except ConfigError as exc:
        print(f"rdbp: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"rdbp: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - map any runtime failure to exit 1
        logger.debug("runtime failure", exc_info=True)
        print(f"rdbp: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
