"""Command line entry point: ``aptsp <subcommand> ...``; every subcommand writes JSON."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import (AprioriConfig, BudgetExceeded, SamplingPolicy, low_activity_cap,
                         sample_master_set, build_master_route_tour, solve_apriori_traced,
                         solve_low_activity)
from .derand import derandomized_master_route_traced
from .evaluation import (expected_cost_bruteforce, expected_cost_monte_carlo,
                         expected_tour_cost_exact, ExpectedCostReport)
from .instance import Instance, Tour, validate_instance
from .lowerbounds import (MrrLbParams, SamplingLbParams, alpha_from_text, gen_mrr_lb_instance,
                          gen_sampling_lb_instance, mrr_lb_ratio, optimize_gamma_sigma)
from .lp.certificate import (CertificateError, DualCertificate, certificate_from_values,
                             verify_certificate)
from .lp.model import LpBudgetError, export_lp, solve_lp
from .lp.mrr import MrrLpConfig, build_mrr_dual, build_mrr_lp
from .lp.sampling import SamplingLpConfig, build_sampling_dual, build_sampling_lp
from .tsp import TSP_KINDS

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INFEASIBLE = 0, 1, 2, 3


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    """Parsed and range-checked arguments of one invocation."""

    subcommand: str
    args: dict = field(default_factory=dict)
    output: Path | None = None
    threads: int = 1

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        args = {k: v for k, v in vars(ns).items() if k not in ("command", "output", "threads")}
        threads = ns.threads if ns.threads is not None else int(os.environ.get("APTSP_THREADS", "1"))
        cfg = cls(ns.command, args, Path(ns.output) if ns.output else None, threads)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        a = self.args
        if self.threads < 1:
            raise InputError("--threads must be at least 1")
        for key in ("epsilon", "beta", "sigma"):
            if a.get(key) is not None and not a[key] > 0:
                raise InputError(f"--{key} must be positive")
        for key in ("samples", "N", "n", "m", "plateau"):
            if a.get(key) is not None and a[key] < 1:
                raise InputError(f"--{key} must be at least 1")
        if a.get("a") is not None and (a["a"] < 1 or a["a"] % 2 == 0):
            raise InputError("--a must be a positive odd integer")
        if a.get("gamma") is not None and not 1.0 <= a["gamma"] <= 2.0:
            raise InputError("--gamma must lie in [1, 2]")


def _stamp(kind: str, payload: dict) -> dict:
    return {"schema": f"aptsp/{kind}", "version": __version__, **payload}


def _emit(cfg: RunConfig, kind: str, payload: dict) -> None:
    text = json.dumps(_stamp(kind, payload), indent=1, default=_json_default)
    if cfg.output is not None:
        cfg.output.write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _load_instance(path) -> Instance:
    try:
        inst = Instance.from_json(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid instance {path}: {exc}") from None
    report = validate_instance(inst)
    if not report.ok:
        raise InputError(f"instance {path} fails validation: {'; '.join(report.violations)}")
    return inst


# -- solve ------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    a = cfg.args
    inst = _load_instance(a["instance"])
    try:
        policy = SamplingPolicy.parse(a["policy"])
    except ValueError as exc:
        raise InputError(str(exc)) from None
    algo, tsp = a["algo"], a["tsp"]
    trace: dict = {}
    if algo == "sampling":
        s = sample_master_set(inst, policy, a["seed"])
        tour, sol = build_master_route_tour(inst, s, tsp)
        trace = {"branch": "depot", "policy": str(policy), "seed": a["seed"],
                 "master_set": sorted(sol.master_set), "master_size": len(sol.master_set)}
    elif algo == "derand":
        res = derandomized_master_route_traced(inst, tsp)
        tour = res.tour
        trace = {"branch": "depot", "lp_value": res.lp.value, "lp_cuts": res.lp.cuts,
                 "estimator_trajectory": res.trajectory,
                 "master_set": sorted(res.solution.master_set),
                 "master_size": len(res.solution.master_set)}
    elif algo == "low-activity":
        cap = a["n_max"] or low_activity_cap(float(inst.p.sum()), a["epsilon"])
        tour, s, _ = solve_low_activity(inst, cap, tsp)
        trace = {"branch": "low-activity", "n_max": cap, "master_set": sorted(s),
                 "master_size": len(s)}
    else:
        acfg = AprioriConfig(a["depot_algo"], policy, tsp, a["seed"], a["n_max"], cfg.threads)
        tour, trace = solve_apriori_traced(inst, a["epsilon"], acfg)
        trace = dict(trace, depot_algorithm=a["depot_algo"])
    _emit(cfg, "solve", {"tour": list(tour.order),
                         "exact_expected_cost": expected_tour_cost_exact(inst, tour),
                         "algorithm": algo, "tsp": tsp, "trace": trace})
    return EXIT_OK


# -- eval -------------------------------------------------------------------

def cmd_eval(cfg: RunConfig) -> int:
    a = cfg.args
    inst = _load_instance(a["instance"])
    data = _read_json(a["tour"])
    try:
        tour = Tour.from_json(data if "order" in data else {"order": data["tour"]})
        tour.check_covers(inst.n)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid tour {a['tour']}: {exc}") from None
    method = a["method"]
    if method == "exact":
        report = ExpectedCostReport(expected_tour_cost_exact(inst, tour), "exact")
    elif method == "brute":
        try:
            report = ExpectedCostReport(expected_cost_bruteforce(inst, tour), "brute_force")
        except ValueError as exc:
            raise BudgetExceeded(str(exc)) from None
    else:
        report = expected_cost_monte_carlo(inst, tour, a["samples"], a["seed"], cfg.threads)
    _emit(cfg, "eval", report.to_json())
    return EXIT_OK


# -- bound / certify ----------------------------------------------------------

def _lp_config(a: dict):
    if a.get("config"):
        data = _read_json(a["config"])
        family = data.get("family", a["family"])
        data = {k: v for k, v in data.items() if k != "family"}
    else:
        family = a["family"]
        data = None
    try:
        if family == "sampling":
            if data is not None:
                return family, SamplingLpConfig.from_json(data)
            return family, SamplingLpConfig(a["alpha"], a["sigma"], a["beta"], a["N"])
        if data is not None:
            return family, MrrLpConfig.from_json(data)
        return family, MrrLpConfig(a["beta"], a["N"], a["a"])
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"invalid LP configuration: {exc}") from None


def _models(family: str, lp_cfg):
    if family == "sampling":
        return build_sampling_lp(lp_cfg), build_sampling_dual(lp_cfg)
    return build_mrr_lp(lp_cfg), build_mrr_dual(lp_cfg)


def cmd_bound(cfg: RunConfig) -> int:
    a = cfg.args
    family, lp_cfg = _lp_config(a)
    primal, dual = _models(family, lp_cfg)
    out: dict = {"family": family, "config": lp_cfg.to_json(),
                 "primal_size": {"vars": primal.num_vars, "rows": primal.num_rows}}
    if a["export"]:
        model = dual if a["dual"] else primal
        path = export_lp(model, a["export"], f"aptsp {family} {'dual' if a['dual'] else 'primal'}")
        out["exported"] = str(path)
    if a["solve"]:
        res = solve_lp(primal, a["method"])
        if not res.optimal:
            raise InputError(f"primal LP is {res.status}")
        out["primal_value"] = res.value
        out["ratio_bound"] = 1.0 / res.value if res.value > 0 else None
        out["lp_method"] = res.method
        if a["with_dual"] or a["cert_out"]:
            dres = solve_lp(dual, a["method"])
            if not dres.optimal:
                raise InputError(f"dual LP is {dres.status}")
            out["dual_value"] = dres.value
            if a["cert_out"]:
                cert = certificate_from_values(lp_cfg, dres.named(dual))
                cert.dump(a["cert_out"])
                out["certificate"] = {"path": a["cert_out"],
                                      **verify_certificate(cert).to_json()}
    _emit(cfg, "bound", out)
    return EXIT_OK


def read_solution(path) -> dict[str, float]:
    """Variable values from JSON (``{name: value}``) or plain ``name value`` lines.

    The text form is what common LP solvers write as solution files; lines
    starting with ``#`` are skipped.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data = data.get("values", data)
        return {str(k): float(v) for k, v in data.items()}
    values = {}
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 2 and not parts[0].startswith("#"):
            values[parts[0]] = float(parts[1])
    return values


def cmd_certify(cfg: RunConfig) -> int:
    a = cfg.args
    try:
        if a["solution"]:
            if not a["config"]:
                raise InputError("--solution needs --config")
            family, lp_cfg = _lp_config(a)
            cert = certificate_from_values(lp_cfg, read_solution(a["solution"]))
            if a["cert_out"]:
                cert.dump(a["cert_out"])
        elif a["certificate"]:
            cert = DualCertificate.from_json(_read_json(a["certificate"]))
        else:
            raise InputError("give a certificate file or --config with --solution")
        result = verify_certificate(cert)
    except (CertificateError, OSError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed certificate input: {exc}") from None
    payload = {"kind": cert.kind, "config": cert.config.to_json(), **result.to_json()}
    if a["solution"] and a["cert_out"]:
        payload["certificate_path"] = a["cert_out"]
    _emit(cfg, "certify", payload)
    if not result.ok:
        return EXIT_INFEASIBLE
    if not result.finite:
        print("no finite bound", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


# -- gen / lb -----------------------------------------------------------------

def cmd_gen(cfg: RunConfig) -> int:
    a = cfg.args
    try:
        if a["family"] == "sampling-lb":
            plateau = a["plateau"] or 50
            params = SamplingLbParams.from_plateau(a["gamma"] or 1.623, plateau, a["n"] or 500)
            inst = gen_sampling_lb_instance(params)
        elif a["family"] == "mrr-lb":
            inst = gen_mrr_lb_instance(MrrLbParams(a["n"] or 3, a["m"] or 2))
        else:
            rng = np.random.default_rng(a["seed"])
            inst = Instance.random_euclidean(a["n"] or 8, rng, depot=0 if a["depot"] else None)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(cfg, "instance", inst.to_json())
    return EXIT_OK


def cmd_lb(cfg: RunConfig) -> int:
    a = cfg.args
    if a["family"] == "mrr":
        params = MrrLbParams(a["n"] or 1000, a["m"] or 1000)
        _emit(cfg, "lb", {"family": "mrr", "n": params.n, "m": params.m, "q": params.q,
                          "ratio": mrr_lb_ratio(params)})
        return EXIT_OK
    rows = []
    for text in a["alpha"] or ["1", "4/3", "1.4999"]:
        try:
            alpha = alpha_from_text(text)
            gamma, sigma, ratio = optimize_gamma_sigma(alpha)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"bad alpha {text!r}: {exc}") from None
        rows.append({"alpha": alpha, "gamma": gamma, "sigma": sigma, "ratio": ratio})
    _emit(cfg, "lb", {"family": "sampling", "rows": rows})
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "eval": cmd_eval, "bound": cmd_bound, "certify": cmd_certify,
            "gen": cmd_gen, "lb": cmd_lb}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aptsp", description=__doc__)
    parser.add_argument("--version", action="version", version=f"aptsp {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write JSON here instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $APTSP_THREADS or 1)")
    common.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="compute an a priori tour")
    p.add_argument("instance")
    p.add_argument("--algo", choices=("auto", "sampling", "derand", "low-activity"),
                   default="auto")
    p.add_argument("--depot-algo", choices=("sampling", "derand"), default="sampling",
                   help="algorithm used once a depot is fixed (auto mode)")
    p.add_argument("--policy", default="power:0.663")
    p.add_argument("--tsp", choices=TSP_KINDS, default="exact")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--n-max", type=int, default=None)

    p = sub.add_parser("eval", parents=[common], help="expected cost of a tour")
    p.add_argument("instance")
    p.add_argument("tour")
    p.add_argument("--method", choices=("exact", "mc", "brute"), default="exact")
    p.add_argument("--samples", type=int, default=100_000)

    lp_args = argparse.ArgumentParser(add_help=False)
    lp_args.add_argument("--family", choices=("sampling", "mrr"), default="sampling")
    lp_args.add_argument("--config", help="LP configuration JSON (overrides the numeric flags)")
    lp_args.add_argument("--alpha", type=str, default="1.5")
    lp_args.add_argument("--sigma", type=str, default="0.663")
    lp_args.add_argument("--beta", type=str, default="0.05")
    lp_args.add_argument("--N", type=int, default=200)
    lp_args.add_argument("--a", type=int, default=9)
    lp_args.add_argument("--cert-out", help="write the rationalized certificate here")

    p = sub.add_parser("bound", parents=[common, lp_args], help="build, solve or export a bound LP")
    p.add_argument("--solve", action="store_true")
    p.add_argument("--with-dual", action="store_true", help="also solve the dual LP")
    p.add_argument("--export", help="write the LP in CPLEX LP format")
    p.add_argument("--dual", action="store_true", help="export the dual instead of the primal")
    p.add_argument("--method", choices=("auto", "simplex", "highs"), default="auto")

    p = sub.add_parser("certify", parents=[common, lp_args], help="verify a dual certificate exactly")
    p.add_argument("certificate", nargs="?")
    p.add_argument("--solution", help="dual variable values to rationalize (JSON or 'name value')")

    p = sub.add_parser("gen", parents=[common], help="generate an instance")
    p.add_argument("--family", choices=("sampling-lb", "mrr-lb", "random"), required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--plateau", type=int, help="gamma/p for the sampling family")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--depot", action="store_true", help="random family: make customer 0 a depot")

    p = sub.add_parser("lb", parents=[common], help="analytic lower-bound ratios")
    p.add_argument("--family", choices=("sampling", "mrr"), default="sampling")
    p.add_argument("--alpha", action="append", help="TSP ratio, e.g. 1.5 or 4/3; repeatable")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command in ("bound", "certify"):
            ns_dict = vars(ns)
            for key in ("alpha", "sigma", "beta"):
                try:
                    ns_dict[key] = Fraction(ns_dict[key])
                except (ValueError, ZeroDivisionError):
                    raise InputError(f"--{key} must be a number or fraction") from None
        cfg = RunConfig.from_namespace(ns)
        return COMMANDS[ns.command](cfg)
    except (InputError, CertificateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BudgetExceeded, LpBudgetError) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
