"""Command-line entry points for reproducible desk-scale experiments.

Subcommands
-----------
toy-verify   closed-form predictions vs the exact numeric chain
sweep        grid of verifications over the reduced ratios, as CSV
factorize    gradient-descent factorization plus both gap checks
detect       full pipeline with KNN detection metrics on a population config
loss-check   constant-offset identity between the two objectives

Exit codes: 0 all checks passed, 1 a tolerance or assertion failed,
2 configuration error.  Every CSV starts with a comment line carrying the
resolved configuration; JSON reports carry it as their first key.  Output
bytes depend only on the command line and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .evaluation import (
    detection_metrics,
    fit_knn_detector,
    fit_linear_probe,
    classification_accuracy,
    knn_scores,
    probing_error,
    separability,
    MetricsReport,
)
from .graph import GraphError, GraphWeights, build_graph
from .loss import equivalence_gap, matrix_loss, surrogate_loss_from_parts
from .population import (
    ExplicitAugmentation,
    Membership,
    ParametricAugmentation,
    PopulationError,
    ToyVariant,
    build_toy_population,
    enumerate_population,
    load_population_config,
    sample_wild_mixture,
    transformation_matrix,
)
from .spectral import (
    FactorizerOptions,
    embed,
    eigendecompose,
    lowrank_factorize,
    reconstruction_gap,
    write_trace_csv,
)
from .theory import (
    BOUNDARY_BAND,
    DegenerateRegimeError,
    ReducedParams,
    TheoryVariant,
    boundary_margin,
    run_toy_pipeline,
    separability_gap,
    verify_against_pipeline,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2

SWEEP_COLUMNS = (
    "alpha_prime,beta_prime,case,probing_error_count_numeric,probing_error_count_closed,"
    "separability_numeric,separability_closed,gap_ab,gap_label,eig_dev_max,projector_dev"
)


class ConfigError(ValueError):
    pass


def _config_line(args: argparse.Namespace) -> str:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return json.dumps(resolved, default=str)


def _write_json(path: Optional[str], payload: dict, args: argparse.Namespace) -> None:
    if path is None:
        return
    document = {"config": json.loads(_config_line(args))}
    document.update(payload)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(document, fh, indent=2)
        fh.write("\n")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _theory_params(args: argparse.Namespace) -> ReducedParams:
    return ReducedParams(
        alpha_prime=args.alpha_prime,
        beta_prime=args.beta_prime,
        gamma_ratio=args.gamma_ratio,
    )


def _guard_boundary(variant: TheoryVariant, params: ReducedParams) -> None:
    margin = boundary_margin(variant, params)
    if abs(margin) <= BOUNDARY_BAND:
        raise ConfigError(
            f"degenerate regime: boundary margin {margin:+.4f} is within the "
            f"excluded band +/-{BOUNDARY_BAND}"
        )


def cmd_toy_verify(args: argparse.Namespace) -> int:
    params = _theory_params(args)
    variant = TheoryVariant(args.variant)
    _guard_boundary(variant, params)
    report = verify_against_pipeline(
        variant, params, rho=args.rho, tolerance_scale=args.tolerance_scale
    )
    print(f"toy-verify variant={variant.value} alpha'={params.alpha_prime} "
          f"beta'={params.beta_prime} gamma_ratio={params.gamma_ratio}")
    print(f"{'quantity':<22}{'closed':>16}{'numeric':>16}{'abs_dev':>12}{'tol':>12}  status")
    for c in report.comparisons:
        tol = "-" if c.tolerance is None else f"{c.tolerance:.3g}"
        status = "pass" if c.passed else "FAIL"
        if c.tolerance is None:
            status = "info"
        print(f"{c.name:<22}{c.closed:>16.8f}{c.numeric:>16.8f}{c.abs_dev:>12.3e}{tol:>12}  {status}")
    _write_json(
        args.out,
        {
            "variant": variant.value,
            "comparisons": [
                {
                    "name": c.name,
                    "closed": c.closed,
                    "numeric": c.numeric,
                    "abs_dev": c.abs_dev,
                    "rel_dev": c.rel_dev,
                    "tolerance": c.tolerance,
                    "passed": c.passed,
                }
                for c in report.comparisons
            ],
            "passed": report.passed,
        },
        args,
    )
    print("RESULT: " + ("pass" if report.passed else "FAIL"))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    if not (0.0 < args.alpha_min <= args.alpha_max <= 0.25):
        raise ConfigError(f"alpha bounds ({args.alpha_min}, {args.alpha_max}) must lie in (0, 0.25]")
    if not (0.0 < args.beta_min <= args.beta_max <= 0.25):
        raise ConfigError(f"beta bounds ({args.beta_min}, {args.beta_max}) must lie in (0, 0.25]")
    if not (1 <= args.resolution <= 200):
        raise ConfigError(f"resolution {args.resolution} must lie in [1, 200]")
    variant = TheoryVariant(args.variant)
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.resolution)
    betas = np.linspace(args.beta_min, args.beta_max, args.resolution)
    nan = float("nan")
    lines = [f"# {_config_line(args)}", SWEEP_COLUMNS]
    for ap in alphas:
        for bp in betas:
            params = ReducedParams(float(ap), float(bp), args.gamma_ratio)
            try:
                gaps = separability_gap(params)
                gap_ab, gap_label = gaps.gap_ab, gaps.gap_label
            except DegenerateRegimeError:
                gap_ab, gap_label = nan, nan
            try:
                report = verify_against_pipeline(variant, params, rho=args.rho)
                by_name = {c.name: c for c in report.comparisons}
                numeric_count = int(by_name["probing_error_count"].numeric)
                closed_count = int(by_name["probing_error_count"].closed)
                numeric_sep = by_name["separability"].numeric
                closed_sep = by_name["separability"].closed
                eig_dev, proj_dev = report.eig_dev_max, report.projector_dev
            except DegenerateRegimeError:
                numeric = run_toy_pipeline(variant, params, rho=args.rho)
                numeric_count, closed_count = numeric.probing.count, -1
                numeric_sep, closed_sep = numeric.separability, nan
                eig_dev, proj_dev = nan, nan
            lines.append(
                ",".join(
                    [
                        _fmt(float(ap)),
                        _fmt(float(bp)),
                        variant.value,
                        str(numeric_count),
                        str(closed_count),
                        _fmt(numeric_sep),
                        _fmt(closed_sep),
                        _fmt(gap_ab),
                        _fmt(gap_label),
                        _fmt(eig_dev),
                        _fmt(proj_dev),
                    ]
                )
            )
    out = args.out or "sweep.csv"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"sweep: wrote {len(lines) - 2} rows to {out}")
    return EXIT_OK


def _population_from_config(config_path: str, seed: int):
    """Population plus explicit augmentation from a config file.

    Configs with nonzero mixture fractions go through the seeded sampler;
    otherwise the cells are enumerated exactly.
    """
    spec, model = load_population_config(config_path)
    if spec.pi_c > 0 or spec.pi_s > 0:
        if not isinstance(model, ParametricAugmentation):
            raise ConfigError("sampled populations need a parametric augmentation block")
        population = sample_wild_mixture(spec, seed)
        return population, ExplicitAugmentation(transformation_matrix(model, population))
    population = enumerate_population(spec)
    if isinstance(model, ParametricAugmentation):
        return population, ExplicitAugmentation(transformation_matrix(model, population))
    return population, model


def _bundle_from_args(args: argparse.Namespace):
    weights = GraphWeights(args.eta_u, args.eta_l)
    if args.config:
        population, explicit = _population_from_config(args.config, args.seed)
        return build_graph(explicit, population, weights), population
    variant = ToyVariant(args.variant)
    population, model = build_toy_population(
        variant, rho=args.rho, alpha=args.alpha, beta=args.beta, gamma=args.gamma
    )
    return build_graph(model, population, weights), population


def cmd_factorize(args: argparse.Namespace) -> int:
    bundle, _ = _bundle_from_args(args)
    k = args.k
    opts = FactorizerOptions(step=args.step, max_iters=args.max_iters, tol=args.tol, seed=args.seed)
    state = lowrank_factorize(bundle.A_tilde, k, opts)
    embedding = eigendecompose(bundle.A_tilde, k)
    gaps = reconstruction_gap(state, embedding)
    equivalence = equivalence_gap(args.trials, args.seed, bundle, k)

    out_dir = Path(args.out or "factorize-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out_dir / "trace.csv", state, header=_config_line(args))

    loss_ok = gaps.loss_gap <= args.loss_gap_tol * args.tolerance_scale
    spread_ok = equivalence.relative_spread <= args.spread_tol * args.tolerance_scale
    passed = loss_ok and spread_ok
    _write_json(
        str(out_dir / "gaps.json"),
        {
            "final_loss": state.final_loss,
            "iterations": state.iterations,
            "converged": state.converged,
            "spectral_optimum": embedding.trailing_power(),
            "loss_gap": gaps.loss_gap,
            "subspace_gap": gaps.subspace_gap,
            "degenerate_subspace": gaps.degenerate,
            "equivalence_spread": equivalence.spread,
            "equivalence_relative_spread": equivalence.relative_spread,
            "equivalence_constant": equivalence.constant,
            "passed": passed,
        },
        args,
    )
    print(f"factorize: k={k} final_loss={state.final_loss:.6e} "
          f"optimum={embedding.trailing_power():.6e} loss_gap={gaps.loss_gap:.3e} "
          f"({'pass' if loss_ok else 'FAIL'})")
    print(f"factorize: converged={state.converged} iterations={state.iterations}")
    print(f"factorize: equivalence relative spread={equivalence.relative_spread:.3e} "
          f"({'pass' if spread_ok else 'FAIL'})")
    print("RESULT: " + ("pass" if passed else "FAIL"))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_loss_check(args: argparse.Namespace) -> int:
    bundle, _ = _bundle_from_args(args)
    equivalence = equivalence_gap(args.trials, args.seed, bundle, args.k)
    rng = np.random.default_rng(args.seed)
    n = bundle.A_tilde.shape[0]
    F = rng.standard_normal((n, args.k)) / np.sqrt(n * args.k)
    f_rows = F / np.sqrt(bundle.D)[:, None]
    breakdown = surrogate_loss_from_parts(f_rows, bundle.A_u, bundle.A_l, bundle.weights)
    constant_err = equivalence.max_constant_error / (1.0 + abs(equivalence.constant))
    tol = args.spread_tol * args.tolerance_scale
    passed = equivalence.relative_spread <= tol and constant_err <= tol
    payload = breakdown.to_json_dict()
    payload.update(
        {
            "gap_spread": equivalence.spread,
            "constant": equivalence.constant,
            "relative_spread": equivalence.relative_spread,
            "constant_relative_error": constant_err,
            "matrix_loss": matrix_loss(F, bundle.A_tilde),
            "passed": passed,
        }
    )
    _write_json(args.out, payload, args)
    print(f"loss-check: relative spread={equivalence.relative_spread:.3e} "
          f"constant={equivalence.constant:.12f} "
          f"constant_rel_err={constant_err:.3e}")
    print("RESULT: " + ("pass" if passed else "FAIL"))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_detect(args: argparse.Namespace) -> int:
    if not args.config:
        raise ConfigError("detect needs --config with a population description")
    population, explicit = _population_from_config(args.config, args.seed)

    labeled = population.indices(Membership.LABELED_ID)
    wild_id = population.indices(Membership.WILD_ID)
    covariate = population.indices(Membership.WILD_COVARIATE)
    semantic = population.indices(Membership.WILD_SEMANTIC)
    missing = [
        name
        for name, rows in (
            ("labeled_id", labeled),
            ("wild_covariate", covariate),
            ("wild_semantic", semantic),
        )
        if not rows
    ]
    if missing:
        raise ConfigError(f"population lacks required membership kinds: {', '.join(missing)}")

    if args.k_neighbors >= len(labeled):
        raise ConfigError(
            f"--k-neighbors {args.k_neighbors} must be < labeled ID count {len(labeled)}"
        )
    weights = GraphWeights(args.eta_u, args.eta_l)
    bundle = build_graph(explicit, population, weights)
    k = args.k if args.k else len(population.classes) + 1
    if not 1 <= k <= len(population):
        raise ConfigError(f"--k {k} must lie in [1, {len(population)}]")
    embedding = embed(bundle, k)
    z = embedding.Z
    labels = population.class_labels()

    probe = fit_linear_probe(z[labeled], labels[labeled], classes=population.classes)
    probing = probing_error(z[covariate], labels[covariate], probe)
    id_rows = labeled + wild_id
    sep = separability(z[id_rows], z[semantic])

    detector = fit_knn_detector(z[labeled], args.k_neighbors, args.percentile)
    # Wild-ID examples are the held-out ID side; without any, the
    # self-excluded reference scores stand in.
    scores_id = knn_scores(detector, z[wild_id]) if wild_id else detector.reference_scores
    scores_sem = knn_scores(detector, z[semantic])
    detection = detection_metrics(scores_id, scores_sem, detector)

    id_eval_rows = wild_id if wild_id else labeled
    report = MetricsReport(
        id_acc=classification_accuracy(z[id_eval_rows], labels[id_eval_rows], probe),
        ood_acc=classification_accuracy(z[covariate], labels[covariate], probe),
        probing_error_rate=probing.rate,
        probing_error_count=probing.count,
        separability=sep,
        fpr_at_threshold=detection.fpr_at_threshold,
        fpr95=detection.fpr95,
        auroc=detection.auroc,
    )
    _write_json(args.out, report.to_json_dict(), args)
    for key, value in report.to_json_dict().items():
        print(f"detect: {key}={value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wildgraph",
        description="Augmentation-graph spectral embeddings and shift diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None, help="population config JSON")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=str, default=None, help="output path")
        p.add_argument("--tolerance-scale", type=float, default=1.0)

    def add_toy_params(p: argparse.ArgumentParser) -> None:
        p.add_argument("--variant", type=str, default="a", choices=["a", "b", "unsup"])
        p.add_argument("--rho", type=float, default=1.0)
        p.add_argument("--alpha-prime", type=float, default=0.03)
        p.add_argument("--beta-prime", type=float, default=0.01)
        p.add_argument("--gamma-ratio", type=float, default=1e-6)

    p_verify = sub.add_parser("toy-verify", help="closed forms vs the numeric chain")
    add_common(p_verify)
    add_toy_params(p_verify)
    p_verify.set_defaults(func=cmd_toy_verify)

    p_sweep = sub.add_parser("sweep", help="verification grid over the reduced ratios")
    add_common(p_sweep)
    p_sweep.add_argument("--variant", type=str, default="a", choices=["a", "b", "unsup"])
    p_sweep.add_argument("--rho", type=float, default=1.0)
    p_sweep.add_argument("--gamma-ratio", type=float, default=1e-6)
    p_sweep.add_argument("--alpha-min", type=float, default=0.01)
    p_sweep.add_argument("--alpha-max", type=float, default=0.2)
    p_sweep.add_argument("--beta-min", type=float, default=0.01)
    p_sweep.add_argument("--beta-max", type=float, default=0.2)
    p_sweep.add_argument("--resolution", type=int, default=20)
    p_sweep.set_defaults(func=cmd_sweep)

    def add_bundle_params(p: argparse.ArgumentParser) -> None:
        p.add_argument("--variant", type=str, default="a", choices=["a", "b"])
        p.add_argument("--rho", type=float, default=1.0)
        p.add_argument("--alpha", type=float, default=0.03)
        p.add_argument("--beta", type=float, default=0.01)
        p.add_argument("--gamma", type=float, default=1e-6)
        p.add_argument("--eta-u", type=float, default=5.0)
        p.add_argument("--eta-l", type=float, default=1.0)
        p.add_argument("--k", type=int, default=3)

    p_fact = sub.add_parser("factorize", help="gradient-descent factorization with gap checks")
    add_common(p_fact)
    add_bundle_params(p_fact)
    p_fact.add_argument("--step", type=float, default=0.5)
    p_fact.add_argument("--max-iters", type=int, default=10000)
    p_fact.add_argument("--tol", type=float, default=1e-14)
    p_fact.add_argument("--trials", type=int, default=10)
    p_fact.add_argument("--loss-gap-tol", type=float, default=1e-4)
    p_fact.add_argument("--spread-tol", type=float, default=1e-9)
    p_fact.set_defaults(func=cmd_factorize)

    p_loss = sub.add_parser("loss-check", help="constant-offset identity check")
    add_common(p_loss)
    add_bundle_params(p_loss)
    p_loss.add_argument("--trials", type=int, default=10)
    p_loss.add_argument("--spread-tol", type=float, default=1e-9)
    p_loss.set_defaults(func=cmd_loss_check)

    p_detect = sub.add_parser("detect", help="full pipeline with KNN detection metrics")
    add_common(p_detect)
    p_detect.add_argument("--eta-u", type=float, default=5.0)
    p_detect.add_argument("--eta-l", type=float, default=1.0)
    p_detect.add_argument("--k", type=int, default=0, help="embedding rank; 0 = classes + 1")
    p_detect.add_argument("--k-neighbors", type=int, default=5)
    p_detect.add_argument("--percentile", type=float, default=0.95)
    p_detect.set_defaults(func=cmd_detect)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PopulationError, GraphError, DegenerateRegimeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
