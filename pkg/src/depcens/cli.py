"""Command-line front-end.

Subcommands: ``simulate`` (draw a dependently censored dataset),
``estimate`` (fit the moment-based or likelihood estimator to a CSV),
``bootstrap`` (resampled standard error and percentile CI), ``study``
(Monte-Carlo grid driven by a declarative config file) and ``curves``
(copula-adjusted survival-curve export).

Every subcommand accepts ``--config FILE`` holding ``key = value`` lines
that mirror its long flags; explicit flags win over file values.  Exit
codes: 0 success, 2 usage or validation problem, 3 estimation or
inference failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from configparser import ConfigParser

from . import __version__
from .cg import cg_survival
from .copulas import ARCHIMEDEAN_FAMILIES, CopulaFamily, CopulaSpec, param_from_tau
from .datagen import GenConfig, RctEffects, sample_survival_data
from .errors import (
    ConfigError,
    DomainError,
    EstimationError,
    FitError,
    InferenceError,
    MomentError,
    NumericError,
    ParseError,
)
from .estimator import EstimateOptions, ProposedEstimator, estimate
from .inference import StudyCell, bootstrap_tau, monte_carlo_study
from .io import (
    read_survival_csv,
    write_curve_csv,
    write_json_report,
    write_study_csv,
    write_survival_csv,
)
from .marginals import MarginalFamily, MarginalSpec
from .mle import MleTauEstimator, mle_fit

_USAGE_ERRORS = (DomainError, ConfigError, ParseError, OSError)
_RUNTIME_ERRORS = (EstimationError, MomentError, FitError, NumericError, InferenceError)

_MARGINAL_ALIASES = {
    "exp": MarginalFamily.EXPONENTIAL,
    "exponential": MarginalFamily.EXPONENTIAL,
    "weibull": MarginalFamily.WEIBULL,
    "lognormal": MarginalFamily.LOGNORMAL,
    "lognorm": MarginalFamily.LOGNORMAL,
}

_COPULA_ALIASES = {
    "normal": CopulaFamily.NORMAL,
    "gaussian": CopulaFamily.NORMAL,
    "clayton": CopulaFamily.CLAYTON,
    "gumbel": CopulaFamily.GUMBEL,
    "frank": CopulaFamily.FRANK,
    "independence": CopulaFamily.INDEPENDENCE,
    "independent": CopulaFamily.INDEPENDENCE,
}


# ----------------------------------------------------------------------
# Flag-value parsers
# ----------------------------------------------------------------------


def _marginal_family(text: str) -> MarginalFamily:
    key = text.strip().lower()
    if key not in _MARGINAL_ALIASES:
        raise ConfigError(
            f"unknown marginal family {text!r}; choose from "
            f"{sorted(set(_MARGINAL_ALIASES))}"
        )
    return _MARGINAL_ALIASES[key]


def _marginal_spec(text: str) -> MarginalSpec:
    """Parse ``family:param[,param]``, e.g. ``exp:0.025`` or
    ``weibull:0.63,0.06`` (shape then scale); ``lognormal:mu,sigma``
    takes the mean and SD of log time."""
    name, sep, rest = text.partition(":")
    family = _marginal_family(name)
    if not sep or not rest.strip():
        raise ConfigError(f"marginal {text!r} is missing parameters (family:p1[,p2])")
    try:
        params = tuple(float(tok) for tok in rest.split(","))
    except ValueError:
        raise ConfigError(f"bad numeric parameter in marginal {text!r}") from None
    return MarginalSpec(family, params)


def _copula_family(text: str) -> tuple[CopulaFamily, float | None]:
    name, _, rest = text.partition(":")
    key = name.strip().lower()
    if key not in _COPULA_ALIASES:
        raise ConfigError(
            f"unknown copula family {name!r}; choose from {sorted(set(_COPULA_ALIASES))}"
        )
    param = None
    if rest.strip():
        try:
            param = float(rest)
        except ValueError:
            raise ConfigError(f"bad copula parameter in {text!r}") from None
    return _COPULA_ALIASES[key], param


def _copula_spec(text: str, tau: float | None) -> CopulaSpec:
    family, param = _copula_family(text)
    if param is not None and tau is not None:
        raise ConfigError("give either a copula parameter or --tau, not both")
    if family is CopulaFamily.INDEPENDENCE:
        if param is not None or (tau is not None and tau != 0.0):
            raise ConfigError("independence copula takes no parameter")
        return CopulaSpec(CopulaFamily.INDEPENDENCE)
    if tau is not None:
        return param_from_tau(family, tau)
    if param is None:
        raise ConfigError("copula needs an explicit parameter or --tau")
    return CopulaSpec(family, param)


def _rct_effects(text: str) -> RctEffects:
    toks = [t for t in text.split(",") if t.strip()]
    if len(toks) not in (2, 3):
        raise ConfigError("--rct expects BETA_T,BETA_C[,TRT_PROB]")
    try:
        values = [float(t) for t in toks]
    except ValueError:
        raise ConfigError(f"bad numeric value in --rct {text!r}") from None
    if len(values) == 2:
        return RctEffects(values[0], values[1])
    return RctEffects(values[0], values[1], values[2])


def _tau_list(text: str) -> list[float]:
    try:
        taus = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad tau list {text!r}") from None
    if not taus:
        raise ConfigError("at least one tau value is required")
    return taus


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        if value < 1:
            raise ConfigError("--threads must be at least 1")
        return value
    env = os.environ.get("DEPCENS_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"DEPCENS_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError("DEPCENS_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def _estimate_options(args, seed: int) -> EstimateOptions:
    return EstimateOptions(
        engine=args.engine,
        bag_replicates=args.bag,
        anneal_budget=args.budget,
        search_draws=args.search_draws,
        refine_draws=args.refine_draws,
        weight_bootstrap=args.weight_boot,
        fits_per_tau=args.fits_per_tau,
        negative_dependence=args.negative,
        seed=seed,
    )


def _emit_json(payload: dict, out: str | None) -> None:
    if out:
        write_json_report(out, payload)
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    copula = _copula_spec(args.copula, args.tau)
    rct = _rct_effects(args.rct) if args.rct else None
    config = GenConfig(
        copula=copula,
        marginal_t=_marginal_spec(args.marg_t),
        marginal_c=_marginal_spec(args.marg_c),
        n=args.n,
        seed=args.seed,
        rct=rct,
    )
    data = sample_survival_data(config)
    write_survival_csv(args.out, data)
    sidecar = {
        "copula": {
            "family": copula.family.value,
            "param": copula.param,
            "tau": copula.tau(),
        },
        "marginal_t": {
            "family": config.marginal_t.family.value,
            "params": list(config.marginal_t.params),
        },
        "marginal_c": {
            "family": config.marginal_c.family.value,
            "params": list(config.marginal_c.params),
        },
        "n": config.n,
        "seed": config.seed,
        "rct": None
        if rct is None
        else {"beta_t": rct.beta_t, "beta_c": rct.beta_c, "trt_prob": rct.trt_prob},
        "n_events": data.n_events,
        "event_proportion": data.n_events / len(data),
    }
    write_json_report(_sidecar_path(args.out), sidecar)
    return 0


def _sidecar_path(csv_path: str) -> str:
    base, ext = os.path.splitext(csv_path)
    return (base if ext else csv_path) + ".json"


def _estimator_payload(args) -> dict:
    return {
        "copula_family": _copula_family(args.copula)[0].value,
        "family_t": _marginal_family(args.marg_t).value,
        "family_c": _marginal_family(args.marg_c).value,
    }


def cmd_estimate(args) -> int:
    data = read_survival_csv(args.input)
    copula_family, extra = _copula_family(args.copula)
    if extra is not None:
        raise ConfigError("estimation takes a copula family only, no parameter")
    family_t = _marginal_family(args.marg_t)
    family_c = _marginal_family(args.marg_c)
    if args.method == "mle":
        fit = mle_fit(data, copula_family, family_t, family_c)
        payload = {"method": "mle", **_estimator_payload(args), **fit.to_dict()}
    else:
        report = estimate(
            data, copula_family, family_t, family_c, _estimate_options(args, args.seed)
        )
        payload = {"method": "proposed", **_estimator_payload(args), **report.to_dict()}
    _emit_json(payload, args.out)
    return 0


def cmd_bootstrap(args) -> int:
    data = read_survival_csv(args.input)
    copula_family, extra = _copula_family(args.copula)
    if extra is not None:
        raise ConfigError("estimation takes a copula family only, no parameter")
    family_t = _marginal_family(args.marg_t)
    family_c = _marginal_family(args.marg_c)
    if args.method == "mle":
        estimator = MleTauEstimator(copula_family, family_t, family_c)
    else:
        estimator = ProposedEstimator(
            copula_family, family_t, family_c, _estimate_options(args, args.seed)
        )
    summary = bootstrap_tau(
        data,
        estimator,
        b=args.b,
        alpha=args.alpha,
        seed=args.seed,
        threads=_resolve_threads(args.threads),
    )
    payload = {"method": args.method, **_estimator_payload(args), **summary.to_dict()}
    _emit_json(payload, args.out)
    return 0


_CELL_OPTION_KEYS = frozenset(
    {
        "copula",
        "assumed",
        "tau",
        "marg_t",
        "marg_c",
        "n",
        "engine",
        "bag",
        "budget",
        "search_draws",
        "refine_draws",
        "weight_boot",
        "fits_per_tau",
        "negative",
    }
)


def _load_study_grid(path: str, args) -> tuple[list[StudyCell], dict]:
    """Read the declarative grid file.

    One ``[section]`` per cell (section name = cell label), keys mirroring
    the simulate/estimate flags; a ``[study]`` section may set runs,
    inner_b, alpha and seed, overridden by explicit flags.
    """
    parser = ConfigParser()
    with open(path) as handle:
        parser.read_file(handle, source=path)
    globals_ = {}
    if parser.has_section("study"):
        section = parser["study"]
        for key in ("runs", "inner_b", "seed"):
            if key in section:
                globals_[key] = section.getint(key)
        if "alpha" in section:
            globals_["alpha"] = section.getfloat("alpha")
    cells = []
    for name in parser.sections():
        if name == "study":
            continue
        section = parser[name]
        unknown = set(section) - _CELL_OPTION_KEYS - set(parser.defaults())
        if unknown:
            raise ConfigError(f"{path}: [{name}]: unknown keys {sorted(unknown)}")
        for key in ("copula", "marg_t", "marg_c", "n"):
            if key not in section:
                raise ConfigError(f"{path}: [{name}]: missing required key {key!r}")
        tau = section.getfloat("tau") if "tau" in section else None
        # Estimation family: the generating family as written, even when a
        # zero tau collapses the generating spec to independence.
        assumed, extra = _copula_family(section.get("assumed", section["copula"]))
        if "assumed" in section and extra is not None:
            raise ConfigError(f"{path}: [{name}]: 'assumed' takes a family name only")
        options = EstimateOptions(
            engine=section.get("engine", args.engine),
            bag_replicates=section.getint("bag", args.bag),
            anneal_budget=section.getint("budget") if "budget" in section else args.budget,
            search_draws=section.getint("search_draws", args.search_draws),
            refine_draws=section.getint("refine_draws", args.refine_draws),
            weight_bootstrap=section.getint("weight_boot", args.weight_boot),
            fits_per_tau=section.getint("fits_per_tau", args.fits_per_tau),
            negative_dependence=section.getboolean("negative", args.negative),
        )
        cells.append(
            StudyCell(
                label=name,
                copula=_copula_spec(section["copula"], tau),
                marginal_t=_marginal_spec(section["marg_t"]),
                marginal_c=_marginal_spec(section["marg_c"]),
                n=section.getint("n"),
                options=options,
                assumed=assumed,
            )
        )
    if not cells:
        raise ConfigError(f"{path}: grid file defines no cells")
    return cells, globals_


def cmd_study(args) -> int:
    cells, globals_ = _load_study_grid(args.grid, args)
    runs = args.runs if args.runs is not None else globals_.get("runs", 30)
    inner_b = args.inner_b if args.inner_b is not None else globals_.get("inner_b", 30)
    alpha = args.alpha if args.alpha is not None else globals_.get("alpha", 0.05)
    seed = args.seed if args.seed is not None else globals_.get("seed", 0)
    summaries = monte_carlo_study(
        cells,
        runs=runs,
        inner_b=inner_b,
        alpha=alpha,
        seed=seed,
        threads=_resolve_threads(args.threads),
    )
    if args.out_csv:
        write_study_csv(args.out_csv, summaries)
    payload = {
        "runs": runs,
        "inner_b": inner_b,
        "alpha": alpha,
        "seed": seed,
        "cells": [s.to_dict() for s in summaries],
    }
    _emit_json(payload, args.out)
    return 0


def cmd_curves(args) -> int:
    data = read_survival_csv(args.input)
    family, extra = _copula_family(args.copula)
    if extra is not None:
        raise ConfigError("curves take a copula family plus --tau values, no parameter")
    if family not in ARCHIMEDEAN_FAMILIES and not args.clayton_proxy:
        raise ConfigError(
            f"{family.value} copula has no closed generator form; "
            "re-run with --clayton-proxy to use a Clayton surrogate at the same tau"
        )
    if family not in ARCHIMEDEAN_FAMILIES:
        family = CopulaFamily.CLAYTON
    targets = ["t", "c"] if args.censoring else ["t"]
    written = []
    for tau in args.taus:
        spec = param_from_tau(family, tau)
        for target in targets:
            curve = cg_survival(data, spec, target=target)
            path = f"{args.out_prefix}-{target}-tau{tau:g}.csv"
            write_curve_csv(path, curve.times, curve.survival)
            written.append(path)
    for path in written:
        print(path)
    return 0


# ----------------------------------------------------------------------
# Parser assembly
# ----------------------------------------------------------------------


def _add_common(parser) -> None:
    parser.add_argument(
        "--config",
        metavar="FILE",
        help="key = value file supplying defaults for this subcommand's flags",
    )
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")


def _add_estimator_flags(parser) -> None:
    parser.add_argument("--copula", required=True, help="copula family (no parameter)")
    parser.add_argument("--marg-t", required=True, help="event-time marginal family")
    parser.add_argument("--marg-c", required=True, help="censoring-time marginal family")
    parser.add_argument("--method", choices=("proposed", "mle"), default="proposed")
    parser.add_argument(
        "--engine",
        choices=("auto", "closed_form", "mc"),
        default="auto",
        help="theoretical-moment backend",
    )
    parser.add_argument("--bag", type=int, default=50, help="bagging replicates")
    parser.add_argument("--budget", type=int, default=None, help="annealing evaluations")
    parser.add_argument("--search-draws", type=int, default=100_000)
    parser.add_argument("--refine-draws", type=int, default=1_000_000)
    parser.add_argument("--weight-boot", type=int, default=100)
    parser.add_argument("--fits-per-tau", type=int, default=200)
    parser.add_argument(
        "--negative",
        action="store_true",
        help="search the negative-dependence side of the tau scale",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depcens",
        description="Dependence between event and censoring times from "
        "singly observed survival data.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("simulate", help="draw a dependently censored dataset")
    _add_common(p)
    p.add_argument("--copula", required=True, help="family[:param], e.g. clayton:8")
    p.add_argument("--tau", type=float, default=None, help="dependence level instead of a raw parameter")
    p.add_argument("--marg-t", required=True, help="event marginal family:params")
    p.add_argument("--marg-c", required=True, help="censoring marginal family:params")
    p.add_argument("--n", type=int, required=True, help="sample size")
    p.add_argument("--rct", default=None, metavar="BT,BC[,P]", help="two-arm trial effects")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit the estimator to a survival CSV")
    _add_common(p)
    p.add_argument("input", help="CSV with header x,delta")
    _add_estimator_flags(p)
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bootstrap", help="bootstrap SE and percentile CI")
    _add_common(p)
    p.add_argument("input", help="CSV with header x,delta")
    _add_estimator_flags(p)
    p.add_argument("--b", type=int, default=200, help="bootstrap replicates")
    p.add_argument("--alpha", type=float, default=0.05, help="two-sided CI level")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("study", help="Monte-Carlo study over a grid file")
    _add_common(p)
    p.add_argument("grid", help="declarative grid file (one [section] per cell)")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--inner-b", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--engine", choices=("auto", "closed_form", "mc"), default="auto")
    p.add_argument("--bag", type=int, default=50)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--search-draws", type=int, default=100_000)
    p.add_argument("--refine-draws", type=int, default=1_000_000)
    p.add_argument("--weight-boot", type=int, default=100)
    p.add_argument("--fits-per-tau", type=int, default=200)
    p.add_argument("--negative", action="store_true")
    p.add_argument("--out-csv", default=None, help="summary table CSV path")
    p.add_argument("--out", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_study, seed=None)

    p = sub.add_parser("curves", help="export copula-adjusted survival curves")
    _add_common(p)
    p.add_argument("input", help="CSV with header x,delta")
    p.add_argument("--copula", default="clayton", help="Archimedean family for the adjustment")
    p.add_argument(
        "--tau",
        dest="taus",
        type=_tau_list,
        required=True,
        help="comma-separated dependence levels, e.g. 0,0.3,0.8",
    )
    p.add_argument(
        "--censoring", action="store_true", help="also export censoring-time curves"
    )
    p.add_argument(
        "--clayton-proxy",
        action="store_true",
        help="serve non-Archimedean families with a Clayton surrogate",
    )
    p.add_argument("--out-prefix", required=True, help="output path prefix")
    p.set_defaults(func=cmd_curves)
    return parser


# Only word forms here: "0"/"1" must stay usable as numeric flag values.
_TRUTHY = {"true", "yes", "on"}
_FALSY = {"false", "no", "off"}


def _config_file_args(path: str) -> list[str]:
    """Translate ``key = value`` lines into flag tokens.

    Boolean flags take true/false values; everything else is passed
    through as ``--key value`` and parsed by the normal flag machinery.
    """
    tokens = []
    with open(path) as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key = key.strip().lower().replace("_", "-")
            value = value.strip()
            if not key or not value:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            if value.lower() in _TRUTHY:
                tokens.append(f"--{key}")
            elif value.lower() in _FALSY:
                pass
            else:
                tokens.extend([f"--{key}", value])
    return tokens


def _splice_config(argv: list[str]) -> list[str]:
    """Insert config-file tokens right after the subcommand so explicit
    command-line flags override them."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    if not argv or argv[0].startswith("-"):
        return argv
    return [argv[0], *_config_file_args(known.config), *argv[1:]]


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = build_parser().parse_args(_splice_config(list(argv)))
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        print(f"depcens: error: {exc}", file=sys.stderr)
        return 3
    except _USAGE_ERRORS as exc:
        print(f"depcens: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
