"""Command-line entry point: ``cqgm <subcommand> [--config run.toml] [flags]``.

Every subcommand writes into the output directory (``--output-dir``, else
``$CQGM_OUTPUT_DIR``, else ``./out``).  Exit codes: 0 success (including a
non-converged training run), 2 validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .amplitude_estimation import Schedule, bernoulli_operator, estimate, schedule_make
from .circuits import AnsatzConfig, ModelParams, build_conditional_model, dd_pass, draw, idle_windows, prepare_condition
from .distributions import (GbmParams, PriceGrid, TargetEnsemble, gbm_ensemble, mc_asian_price,
                            mixture_payoff_oracle)
from .klexpand import KlConfig, approximate_x1_pdf
from .noise import NoiseModel, noisy_sampler
from .pricing import PricingJob, c_bias_csv, c_bias_profile, price, qubit_accounting
from .statevector import CircuitError, run
from .trainer import SpsaGains, TrainConfig, load_report, model_distributions, train

log = logging.getLogger("cqgm")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3


class ValidationError(Exception):
    pass


# ---------------------------------------------------------------- config


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _section(cfg: dict, name: str, **overrides) -> dict:
    out = dict(cfg.get(name, {}))
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def gbm_from(cfg: dict, args) -> GbmParams:
    return GbmParams(**_section(cfg, "gbm", timesteps=getattr(args, "timesteps", None)))


def grid_from(cfg: dict) -> PriceGrid:
    return PriceGrid(**_section(cfg, "grid"))


def ansatz_from(cfg: dict, args, ens: TargetEnsemble | None = None) -> AnsatzConfig:
    sec = _section(cfg, "ansatz", layers=getattr(args, "layers", None))
    if ens is not None:
        sec.setdefault("data_qubits", ens.grid.num_qubits)
        sec.setdefault("cond_qubits", max(0, int(np.ceil(np.log2(ens.T)))))
    return AnsatzConfig(**sec)


def train_config_from(cfg: dict, args) -> TrainConfig:
    sec = _section(cfg, "train", max_iterations=getattr(args, "iterations", None),
                   shots=getattr(args, "shots", None), seed=args.seed)
    sec.setdefault("seed", int(cfg.get("seed", 0)))
    spsa = SpsaGains(**sec.pop("spsa", {}))
    return TrainConfig(spsa=spsa, **sec)


def schedule_from(cfg: dict, args) -> Schedule:
    sec = _section(cfg, "schedule", kind=getattr(args, "schedule", None),
                   depth=getattr(args, "depth", None), shots=getattr(args, "ae_shots", None))
    if "entries" in sec:
        return Schedule(tuple(tuple(e) for e in sec["entries"]))
    return schedule_make(sec.get("kind", "EIS"), sec.get("depth", 6), sec.get("shots", 100),
                         sec.get("beta", 2.0))


def noise_from(cfg: dict, args) -> NoiseModel:
    sec = _section(cfg, "noise", p1=getattr(args, "p1", None), p2=getattr(args, "p2", None))
    return NoiseModel(**sec)


def _seed(cfg: dict, args) -> int:
    return args.seed if args.seed is not None else int(cfg.get("seed", 0))


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)
    return path


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _read_ensemble(path: str | None, cfg: dict, args) -> TargetEnsemble:
    if path is not None:
        return TargetEnsemble.from_json(Path(path).read_text())
    sec = _section(cfg, "targets")
    if sec.get("mode") == "random":
        # Dirichlet(1) targets, i.e. uniform over the probability simplex
        grid = grid_from(cfg)
        rng = np.random.default_rng(sec.get("seed", _seed(cfg, args)))
        return TargetEnsemble(grid, rng.dirichlet(np.ones(grid.bins), sec.get("count", 2)))
    return gbm_ensemble(gbm_from(cfg, args), grid_from(cfg))


# ---------------------------------------------------------------- subcommands


def cmd_targets(args, cfg, out: Path) -> int:
    sec = _section(cfg, "targets", mode=args.mode, paths=args.paths)
    if sec.get("mode") == "random":
        ens = _read_ensemble(None, cfg, args)
    else:
        ens = gbm_ensemble(gbm_from(cfg, args), grid_from(cfg), mode=sec.get("mode", "analytic"),
                           paths=sec.get("paths", 100_000), seed=_seed(cfg, args))
    _write(out, "targets.csv", ens.to_csv())
    _write(out, "targets.json", ens.to_json())
    return EXIT_OK


def cmd_train(args, cfg, out: Path) -> int:
    ens = _read_ensemble(args.targets, cfg, args)
    ansatz = ansatz_from(cfg, args, ens)
    tcfg = train_config_from(cfg, args)
    sampler = None
    noise = noise_from(cfg, args)
    if not noise.is_noiseless:
        sampler = noisy_sampler(noise, tcfg.shots or 10_000, np.random.default_rng(tcfg.seed + 1))
    report = train(ens.dists, ansatz, tcfg, sampler=sampler)
    doc = report.to_dict(ansatz, tcfg)
    _write(out, "train_report.json", _dump(doc))
    _write(out, "loss_history.csv", "iteration,loss\n" + "".join(
        f"{k},{v!r}\n" for k, v in enumerate(report.loss_history)))
    model = model_distributions(ansatz, report.final_params, ens.T)
    header = ["bin", "price"] + [f"target_t{t}" for t in range(ens.T)] + [f"model_t{t}" for t in range(ens.T)]
    rows = [",".join(header)]
    for i, p in enumerate(ens.grid.prices):
        vals = [repr(float(p))] + [repr(float(v)) for v in ens.dists[:, i]] + [repr(float(v)) for v in model[:, i]]
        rows.append(f"{i}," + ",".join(vals))
    _write(out, "distributions.csv", "\n".join(rows) + "\n")
    print(f"converged={report.converged} best_loss={report.best_loss:.6g} "
          f"similarities={np.round(report.per_condition_similarity, 4).tolist()}")
    return EXIT_OK


def cmd_price(args, cfg, out: Path) -> int:
    ens = _read_ensemble(args.targets, cfg, args)
    sec = _section(cfg, "pricing", strike=args.strike, c=args.c)
    model = None
    if not args.exact_loading:
        if args.params is None:
            raise ValidationError("price needs --params or --exact-loading")
        ansatz, params, _ = load_report(Path(args.params).read_text())
        model = (ansatz, params)
    job = PricingJob(ens, strike=sec.get("strike", 110.0), c=sec.get("c", 0.05),
                     schedule=schedule_from(cfg, args), model=model,
                     exact_ae=args.exact_ae or sec.get("exact_ae", False),
                     work_qubits=sec.get("work_qubits"), seed=_seed(cfg, args))
    result = price(job)
    doc = result.to_dict()
    doc["qubits"] = qubit_accounting(job)
    _write(out, "pricing_result.json", _dump(doc))
    print(f"value={result.value:.6f} reference={result.reference_value:.6f} a_hat={result.a_hat:.8f}")
    return EXIT_OK


def cmd_estimate(args, cfg, out: Path) -> int:
    if not 0 <= args.a <= 1:
        raise ValidationError("--a must lie in [0, 1]")
    est = estimate(bernoulli_operator(args.a), schedule_from(cfg, args), seed=_seed(cfg, args),
                   exact=args.exact_ae)
    _write(out, "estimate.json", est.to_json())
    print(f"a_hat={est.a_hat:.8f} oracle_calls={est.oracle_calls}")
    return EXIT_OK


def cmd_oracle(args, cfg, out: Path) -> int:
    gbm = gbm_from(cfg, args)
    grid = grid_from(cfg)
    sec = _section(cfg, "pricing", strike=args.strike)
    strike = sec.get("strike", 110.0)
    mc = mc_asian_price(gbm, strike, args.paths, _seed(cfg, args), discount=args.discount)
    mc_grid = mc_asian_price(gbm, strike, args.paths, _seed(cfg, args), discount=args.discount, grid=grid)
    doc = {"strike": strike, "paths": args.paths, "discount": args.discount,
           "mixture_value": mc_grid["mixture_value"], "path_average_value": mc_grid["path_average_value"],
           "continuous": mc,
           "discretized_oracle": mixture_payoff_oracle(gbm_ensemble(gbm, grid), strike)}
    _write(out, "oracle.json", _dump(doc))
    print(f"discretized oracle={doc['discretized_oracle']:.6f} mc mixture={doc['mixture_value']:.6f} "
          f"mc path average={doc['path_average_value']:.6f}")
    return EXIT_OK


def cmd_klexpand(args, cfg, out: Path) -> int:
    sec = _section(cfg, "kl", maclaurin_order=args.order, samples=args.samples, seed=args.seed)
    if "support" in sec:
        sec["support"] = tuple(sec["support"])
    approx = approximate_x1_pdf(KlConfig(**sec))
    _write(out, "x1_pdf.csv", approx.shared.to_csv())
    _write(out, "x1_pdf_independent.csv", approx.independent.to_csv())
    print(f"mean={approx.shared.mean():.6f} shared-vs-independent CDF gap={approx.divergence():.4g}")
    return EXIT_OK


def cmd_cbias(args, cfg, out: Path) -> int:
    ens = _read_ensemble(args.targets, cfg, args)
    sec = _section(cfg, "pricing", strike=args.strike)
    cs = np.geomspace(args.c_min, args.c_max, args.points)
    rows = c_bias_profile(cs, PricingJob(ens, strike=sec.get("strike", 110.0)))
    _write(out, "cbias.csv", c_bias_csv(rows))
    return EXIT_OK


def cmd_dd_check(args, cfg, out: Path) -> int:
    ansatz = AnsatzConfig(args.data_qubits, args.cond_qubits, args.layers or 2)
    rng = np.random.default_rng(_seed(cfg, args))
    params = ModelParams(rng.uniform(-np.pi, np.pi, ansatz.num_alpha), rng.uniform(-np.pi, np.pi, ansatz.num_theta))
    circ = prepare_condition(build_conditional_model(ansatz, params), "basis", (1 << ansatz.cond_qubits) - 1)
    dd = dd_pass(circ)
    dev = float(np.max(np.abs(run(circ).amplitudes - run(dd).amplitudes)))
    doc = {"windows": [list(w) for w in idle_windows(circ)],
           "inserted_x": len(dd) - len(circ), "max_amplitude_deviation": dev}
    _write(out, "dd_check.json", _dump(doc))
    print(draw(dd))
    print(f"inserted {doc['inserted_x']} X gates, max deviation {dev:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cqgm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--output-dir", help="output directory (default $CQGM_OUTPUT_DIR or ./out)")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--threads", type=int, help="cap on worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("targets", parents=[common], help="write the GBM target ensemble")
    s.add_argument("--timesteps", type=int)
    s.add_argument("--mode", choices=("analytic", "mc", "random"))
    s.add_argument("--paths", type=int)
    s.set_defaults(func=cmd_targets)

    s = sub.add_parser("train", parents=[common], help="train the conditional model")
    s.add_argument("--targets", help="targets.json (default: regenerate from config)")
    s.add_argument("--layers", type=int)
    s.add_argument("--iterations", type=int)
    s.add_argument("--shots", type=int, help="shot-based loss (default exact marginals)")
    s.add_argument("--p1", type=float, help="one-qubit depolarizing probability")
    s.add_argument("--p2", type=float, help="two-qubit depolarizing probability")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("price", parents=[common], help="price the Asian option with MLAE")
    s.add_argument("--targets")
    s.add_argument("--params", help="train_report.json from `cqgm train`")
    s.add_argument("--exact-loading", action="store_true", help="amplitude-encode the targets directly")
    s.add_argument("--exact-ae", action="store_true", help="shot-free MLAE")
    s.add_argument("--strike", type=float)
    s.add_argument("--c", type=float)
    s.add_argument("--schedule", choices=("LIS", "EIS", "PowerLaw"))
    s.add_argument("--depth", type=int)
    s.add_argument("--ae-shots", type=int)
    s.set_defaults(func=cmd_price)

    s = sub.add_parser("estimate", parents=[common], help="MLAE on a one-qubit test operator")
    s.add_argument("--a", type=float, required=True, help="true amplitude of the test operator")
    s.add_argument("--exact-ae", action="store_true")
    s.add_argument("--schedule", choices=("LIS", "EIS", "PowerLaw"))
    s.add_argument("--depth", type=int)
    s.add_argument("--ae-shots", type=int)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("oracle", parents=[common], help="classical Monte Carlo and exact oracles")
    s.add_argument("--strike", type=float)
    s.add_argument("--paths", type=int, default=200_000)
    s.add_argument("--discount", action="store_true")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("klexpand", parents=[common], help="X1 density from the KL expansion")
    s.add_argument("--order", type=int)
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_klexpand)

    s = sub.add_parser("cbias", parents=[common], help="inversion error versus payoff scaling c")
    s.add_argument("--targets")
    s.add_argument("--strike", type=float)
    s.add_argument("--c-min", type=float, default=1e-3)
    s.add_argument("--c-max", type=float, default=1e-1)
    s.add_argument("--points", type=int, default=9)
    s.set_defaults(func=cmd_cbias)

    s = sub.add_parser("dd-check", parents=[common], help="dynamical-decoupling pass semantics check")
    s.add_argument("--data-qubits", type=int, default=4)
    s.add_argument("--cond-qubits", type=int, default=1)
    s.add_argument("--layers", type=int)
    s.set_defaults(func=cmd_dd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        try:
            import numba
            numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))
        except ImportError:
            pass
    out = Path(args.output_dir or os.environ.get("CQGM_OUTPUT_DIR", "out"))
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg, out)
    except (ValidationError, ValueError, CircuitError, KeyError, TypeError, json.JSONDecodeError,
            tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
