"""Command line front end: ``simulate``, ``discover`` and ``summarize``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The default output directory is taken from ``PDEDISCOVERY_OUT`` when set.
"""

import argparse
import logging
import os
import platform
import sys
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import simulators as sim
from .basis import (
    BasisError,
    DerivSpec,
    OperatorSpec,
    SpatialBasis,
    TemporalBasis,
    default_degree,
    evaluate_bases,
    make_bspline,
)
from .diagnostics import choose_beta, equation_summary, subsample_size
from .fileio import (
    ConfigError,
    FormatError,
    GridTensor,
    load_config,
    read_chain,
    read_gridtensor,
    write_chain,
    write_gridtensor,
    write_manifest,
    write_summary,
)
from .library import LibraryError, correlation_condition_number, parse_library, standard_poly_deriv_library
from .sampler import ObservationSet, Problem, SamplerError, full_design, init_state, run_chain

log = logging.getLogger("pdediscovery")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

TRUE_EQUATIONS = {
    "burgers": "u_t = -u u_x + {nu} u_xx",
    "heat": "u_t = {alpha} u_xx + {alpha} u_yy",
    "reaction_diffusion": (
        "u_t = {gamma0} u - {ratio:.4g} u^2 - {beta} u v + {D} u_xx + {D} u_yy\n"
        "v_t = -{eta} v + {mu} u v + {D} v_xx + {D} v_yy"
    ),
}


class UsageError(Exception):
    pass


def default_out_dir():
    return Path(os.environ.get("PDEDISCOVERY_OUT", "."))


# ---------------------------------------------------------------------------
# problem assembly shared with the tests


def parse_operator(spec, dim):
    if isinstance(spec, OperatorSpec):
        return spec
    if spec in (None, "identity"):
        return OperatorSpec.identity()
    if spec == "laplacian":
        return OperatorSpec.laplacian(dim)
    terms = []
    for item in spec:
        try:
            coef, deriv = item
            d = DerivSpec(deriv.count("x"), deriv.count("y"), 0)
            if set(deriv) - {"x", "y"}:
                raise ValueError
        except (TypeError, ValueError, AttributeError):
            raise ConfigError("model.operator", f"bad operator term {item!r}") from None
        terms.append((float(coef), d))
    return OperatorSpec(tuple(terms))


def build_library(component_names, terms=None, standard=None, covariate_names=()):
    comps = tuple(component_names)
    if terms is not None:
        return parse_library(terms, comps, tuple(covariate_names))
    kw = dict(standard)
    return standard_poly_deriv_library(
        len(comps),
        kw.pop("max_power"),
        kw.pop("derivs"),
        covariates=tuple(covariate_names),
        symbols=comps,
        **kw,
    )


def build_problem(
    gt, lib, spatial_count, temporal_count, degree=None, operator=None, lhs_time_order=1, cov=None, margin=0
):
    """Bases, cached evaluations and observations for a dataset."""
    op = parse_operator(operator, 1 if gt.ys is None else 2)
    derivs = lib.required_derivs()
    max_order = max([d.dx + d.dy for d in derivs] + [d.dx + d.dy for _, d in op.terms] + [0])
    max_t = max([d.dt for d in derivs] + [lhs_time_order])
    degree = degree or max(default_degree(max_order), max_t)
    sc = tuple(np.atleast_1d(spatial_count).tolist())
    if gt.ys is None:
        if len(sc) != 1:
            raise ConfigError("basis.spatial_count", "1D data takes a single count")
        sb = SpatialBasis(make_bspline(gt.xs[0], gt.xs[-1], sc[0], degree), gt.xs)
    else:
        px, py = (sc[0], sc[0]) if len(sc) == 1 else sc
        sb = SpatialBasis(
            make_bspline(gt.xs[0], gt.xs[-1], px, degree),
            gt.xs,
            make_bspline(gt.ys[0], gt.ys[-1], py, degree),
            gt.ys,
        )
    tb = TemporalBasis(make_bspline(gt.times[0], gt.times[-1], temporal_count, degree), gt.times)
    ev = evaluate_bases(sb, tb, gt.dims[2], derivs, op, lhs_time_order)
    return Problem(ObservationSet(gt.data, gt.mask), ev, lib, cov, lhs_time_order, margin)


def square_count(P):
    """Per-axis count for a total of ``P`` tensor-product functions."""
    r = int(round(P**0.5))
    if r * r != P:
        raise ValueError(f"P={P} is not a perfect square")
    return r


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    rng = np.random.default_rng(args.seed)
    kwargs = {}
    if args.boundary:
        kwargs["boundary"] = args.boundary
    for pair in args.param or []:
        k, _, v = pair.partition("=")
        if not v:
            raise UsageError(f"--param expects key=value, got {pair!r}")
        kwargs[k] = float(v) if k not in ("n", "n_x", "n_t") else int(v)
    try:
        data = sim.SIMULATORS[args.system](**kwargs)
    except TypeError as exc:
        raise UsageError(f"invalid parameter for {args.system}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out = Path(args.out) if args.out else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    full = np.ones(data.field.shape, dtype=bool)
    clean = GridTensor(data.field, full, data.times, data.xs, data.ys, data.component_names)
    stem = args.system
    paths = [out / f"{stem}.gt"]
    write_gridtensor(paths[0], clean)
    if args.noise or args.missing:
        fld = sim.add_noise(data.field, args.noise, rng)
        mask = sim.missing_mask(fld.shape, args.missing, rng) if args.missing else full
        noisy = GridTensor(np.where(mask, fld, np.nan), mask, data.times, data.xs, data.ys, data.component_names)
        paths.append(out / f"{stem}_noise{args.noise:g}_missing{args.missing:g}.gt")
        write_gridtensor(paths[-1], noisy)

    p = dict(data.params)
    if args.system == "reaction_diffusion":
        p["ratio"] = p["gamma0"] / p["gamma1"]
    print("true equation:")
    print(TRUE_EQUATIONS[args.system].format(**p))
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# discover


def _lhs_names(problem):
    op = problem.ev.operator
    suffix = "t" * problem.lhs_time_order
    names = []
    for c in problem.lib.component_names:
        base = op.name(c)
        names.append(f"{base}_{suffix}" if op.is_identity else f"[{base}]_{suffix}")
    return names


def cmd_discover(args):
    cfg = load_config(args.config)
    try:
        gt = read_gridtensor(cfg.dataset)
    except FormatError as exc:
        raise ConfigError("data.path", str(exc)) from None
    covs = []
    for p in cfg.covariates:
        try:
            c = read_gridtensor(p)
        except FormatError as exc:
            raise ConfigError("data.covariates", str(exc)) from None
        if c.dims[:2] != gt.dims[:2]:
            raise ConfigError("data.covariates", f"{p} does not match the dataset grid")
        covs.append(c.data[:, :, 0])
    cov = np.stack(covs, axis=2) if covs else None
    cov_names = [Path(p).stem for p in cfg.covariates]

    try:
        lib = build_library(gt.component_names, cfg.library_terms, cfg.standard, cov_names)
    except LibraryError as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        problem = build_problem(
            gt,
            lib,
            cfg.spatial_count,
            cfg.temporal_count,
            cfg.degree,
            cfg.operator,
            cfg.model.lhs_time_order,
            cov,
            cfg.margin,
        )
    except (BasisError, ValueError) as exc:
        raise ConfigError("basis", str(exc)) from None

    mcfg = cfg.model
    out = Path(args.out) if args.out else (cfg.output_dir or default_out_dir())
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(mcfg.seed)
    state = init_state(problem, mcfg, rng)
    F, _ = full_design(problem, state.A)
    cond = correlation_condition_number(F)
    g = mcfg.g if mcfg.g is not None else problem.n_points
    beta = mcfg.beta_rss if mcfg.beta_rss is not None else choose_beta(cond)
    n_sub = mcfg.subsample or subsample_size(g, beta, 1.0, min_size=lib.D + 2)
    log.info("library condition number %.4g -> beta %.3g -> subsample size %d", cond, beta, n_sub)
    mcfg = type(mcfg)(**{**mcfg.__dict__, "beta_rss": beta, "subsample": n_sub})

    samples = run_chain(problem, mcfg)
    summary = equation_summary(samples, lib, mcfg.inclusion_threshold, lhs_names=_lhs_names(problem))
    write_chain(out / "chain.csv", samples)
    text = write_summary(out, summary)
    write_manifest(
        out / "manifest.json",
        {
            "config": str(Path(args.config).resolve()),
            "config_sha256": cfg.digest(),
            "dataset_sha256": _sha256(cfg.dataset),
            "seed": mcfg.seed,
            "condition_number": cond,
            "beta": beta,
            "subsample": n_sub,
            "iterations": mcfg.iterations,
            "burn_in": mcfg.burn_in,
            "terms": lib.names,
            "versions": {
                "pdediscovery": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        },
    )
    print(text, end="")
    return EXIT_OK


def _sha256(path):
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# summarize


def cmd_summarize(args):
    try:
        samples = read_chain(args.chain)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not 0 <= args.threshold < 1:
        raise UsageError("threshold must lie in [0, 1)")
    out = Path(args.out) if args.out else Path(args.chain).parent
    out.mkdir(parents=True, exist_ok=True)
    summary = equation_summary(samples, threshold=args.threshold, lhs_names=args.lhs)
    print(write_summary(out, summary), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------


def make_parser():
    p = argparse.ArgumentParser(prog="pdediscovery", description="Bayesian PDE discovery from gridded data.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a benchmark dataset")
    s.add_argument("system", choices=sorted(sim.SIMULATORS))
    s.add_argument("--noise", type=float, default=0.0, help="noise fraction zeta")
    s.add_argument("--missing", type=float, default=0.0, help="fraction of entries missing at random")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--boundary", help="boundary treatment (heat, reaction_diffusion)")
    s.add_argument("--param", action="append", metavar="KEY=VALUE", help="override a solver parameter")
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("discover", help="run the sampler from a TOML config")
    d.add_argument("config")
    d.add_argument("--out", help="output directory (overrides the config)")
    d.set_defaults(func=cmd_discover)

    m = sub.add_parser("summarize", help="re-summarise an existing chain")
    m.add_argument("chain")
    m.add_argument("--threshold", type=float, default=0.5)
    m.add_argument("--lhs", nargs="*", help="left-hand-side labels, one per component")
    m.add_argument("--out", help="output directory (default: next to the chain)")
    m.set_defaults(func=cmd_summarize)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if not args.verbose:
        warnings.simplefilter("default")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SamplerError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
