"""Command-line front end: datasets, training runs, extraction, analysis.

An experiment is described by one TOML or JSON config file with sections

    [dataset]    keys of datasets.DatasetConfig
    [model]      kind = "rbm" | "hobm", plus n_hidden/init_seed/weight_std
                 or max_order
    [optimizer]  mode, step_size, n_steps, log_every, tolerance, gradient,
                 and an optional [optimizer.sampler] subtable
    [ridge]      keys of ridge.RidgeConfig (section present = ridge on)
    [tracking]   max_order, fraction, floor

plus a top-level output_dir.  Any value can be overridden from the command
line with repeated ``--set section.key=value`` flags; the merged config is
echoed to ``<output_dir>/config.json`` so every artifact directory is
self-describing.  Outputs carry no timestamps, so a rerun with the same
config is byte-identical.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 refusal to enumerate past the dense-size limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datasets, dynamics, hobm, pbf, rbm as rbm_mod, ridge

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid or missing configuration; maps to exit code 1."""


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str | Path) -> dict:
    """Parse a TOML (default) or JSON experiment config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None


def apply_overrides(config: dict, assignments: list[str]) -> dict:
    """Apply ``section.key=value`` (or ``key=value``) overrides in order.

    Values are parsed as JSON literals where possible ("0.5" -> 0.5,
    "true" -> True) and kept as strings otherwise.
    """
    merged = json.loads(json.dumps(config))  # deep copy of plain data
    for item in assignments:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = dotted.split(".")
        node = merged
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override below non-section key {part!r}")
        node[parts[-1]] = value
    return merged


def echo_config(config: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n"
    )


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return value


_KNOWN_KEYS = {
    "model": {"kind", "n_hidden", "init_seed", "weight_std", "max_order"},
    "optimizer": {
        "mode", "step_size", "n_steps", "log_every", "tolerance", "gradient",
        "sampler",
    },
    "tracking": {"max_order", "fraction", "floor"},
}


def output_dir(config: dict, args) -> Path:
    flag = getattr(args, "output_dir", None)
    if flag:
        config["output_dir"] = flag
    out = config.get("output_dir")
    if not out:
        raise ConfigError("output_dir missing (set it in the config or pass --output-dir)")
    return Path(out)


def dataset_config(config: dict) -> datasets.DatasetConfig:
    try:
        return datasets.DatasetConfig.from_dict(_section(config, "dataset"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [dataset] section: {exc}") from None


def build_model(config: dict, n_sites: int):
    """Initial model from the [model] section."""
    section = _section(config, "model")
    unknown = set(section) - _KNOWN_KEYS["model"]
    if unknown:
        raise ConfigError(f"unknown keys in [model]: {sorted(unknown)}")
    kind = section.get("kind", "rbm")
    if kind == "rbm":
        return rbm_mod.initialize(
            n_sites,
            int(section.get("n_hidden", 64)),
            seed=int(section.get("init_seed", 0)),
            weight_std=float(section.get("weight_std", 0.01)),
        )
    if kind == "hobm":
        max_order = int(section.get("max_order", 3))
        masks = pbf.masks_up_to_order(n_sites, max_order)
        return hobm.HigherOrderModel(
            pbf.SubsetVector(n_sites, masks, np.zeros(len(masks)), max_order)
        )
    raise ConfigError(f"model.kind must be 'rbm' or 'hobm', got {kind!r}")


def ridge_config(config: dict) -> ridge.RidgeConfig | None:
    if "ridge" not in config:
        return None
    try:
        return ridge.RidgeConfig(**_section(config, "ridge"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [ridge] section: {exc}") from None


def train_config(config: dict) -> dynamics.TrainConfig:
    opt = _section(config, "optimizer")
    unknown = set(opt) - _KNOWN_KEYS["optimizer"]
    if unknown:
        raise ConfigError(f"unknown keys in [optimizer]: {sorted(unknown)}")
    tracking = _section(config, "tracking")
    unknown = set(tracking) - _KNOWN_KEYS["tracking"]
    if unknown:
        raise ConfigError(f"unknown keys in [tracking]: {sorted(unknown)}")
    sampler = None
    if "sampler" in opt:
        try:
            sampler = rbm_mod.SamplerConfig(**opt["sampler"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [optimizer.sampler] table: {exc}") from None
    elif opt.get("gradient", "exact") == "sampled":
        sampler = rbm_mod.SamplerConfig()
    step = opt.get("step_size")
    tol = opt.get("tolerance")
    try:
        return dynamics.TrainConfig(
            n_steps=int(opt.get("n_steps", 1000)),
            step_size=None if step is None else float(step),
            mode=opt.get("mode", "fixed"),
            gradient=opt.get("gradient", "exact"),
            sampler=sampler,
            log_every=int(opt.get("log_every", 10)),
            track_order=int(tracking.get("max_order", 3)),
            ridge=ridge_config(config),
            tolerance=None if tol is None else float(tol),
        )
    except ValueError as exc:
        raise ConfigError(f"bad [optimizer] section: {exc}") from None


def load_model(path: str | Path):
    """Load a checkpoint, converting binary-convention RBMs to spin form."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    text = path.read_text()
    kind = json.loads(text).get("kind")
    if kind == "higher_order_model":
        return hobm.HigherOrderModel.from_json(text)
    if kind == "rbm":
        model = rbm_mod.rbm_from_json(text)
        if isinstance(model, rbm_mod.BinaryRbm):
            model = model.to_spin()
        return model
    raise ConfigError(f"unrecognized checkpoint kind {kind!r} in {path}")


def _load_dataset(path: Path) -> hobm.EmpiricalSamples:
    if not path.exists():
        raise ConfigError(
            f"dataset not found: {path} (run the generate command first)"
        )
    return datasets.load_samples(path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    config = apply_overrides(load_config(args.config), args.set or [])
    dcfg = dataset_config(config)
    out = output_dir(config, args)
    samples = dcfg.generate()
    echo_config(config, out)
    datasets.save_samples(samples, out / "data.txt", metadata=dcfg.to_dict())
    cov = datasets.covariance_matrix(samples)
    (out / "covariance.csv").write_text(datasets.covariance_to_csv(cov))
    print(f"wrote {samples.n_samples} configurations of {samples.n_sites} "
          f"sites to {out / 'data.txt'}")
    return 0


def cmd_train(args) -> int:
    config = apply_overrides(load_config(args.config), args.set or [])
    out = output_dir(config, args)
    data_path = Path(args.dataset) if args.dataset else out / "data.txt"
    samples = _load_dataset(data_path)
    model = build_model(config, samples.n_sites)
    tcfg = train_config(config)
    tracking = _section(config, "tracking")
    echo_config(config, out)
    result = dynamics.train(model, samples, tcfg)
    (out / "trajectory.csv").write_text(result.trajectory.to_csv())
    (out / "checkpoint.json").write_text(result.model.to_json() + "\n")
    report = dynamics.dsb_report(
        result.trajectory,
        fraction=float(tracking.get("fraction", 0.5)),
        floor=float(tracking.get("floor", 1e-3)),
    )
    (out / "dsb.json").write_text(report.to_json() + "\n")
    print(f"trained {tcfg.n_steps} steps; final log-likelihood "
          f"{result.trajectory.loglik[-1]:.6f}; artifacts in {out}")
    return 0


def cmd_extract(args) -> int:
    model = load_model(args.checkpoint)
    if isinstance(model, hobm.HigherOrderModel):
        couplings = ridge.effective_couplings(model, args.max_order)
    elif args.mode == "exact":
        try:
            couplings = rbm_mod.extract_couplings_exact(model, args.max_order)
        except pbf.EnumerationLimitError as exc:
            raise pbf.EnumerationLimitError(
                f"{exc}; rerun with --mode monte_carlo"
            ) from None
    else:
        masks = pbf.masks_up_to_order_sparse(model.n_visible, args.max_order)
        values = np.asarray(
            [
                rbm_mod.extract_coupling_formula(
                    model, int(mask), "monte_carlo",
                    n_samples=args.n_samples, seed=args.seed + int(mask),
                )
                for mask in masks
            ]
        )
        couplings = pbf.SubsetVector(model.n_visible, masks, values, args.max_order)
    text = couplings.to_csv() if args.format == "csv" else couplings.to_json() + "\n"
    Path(args.output).write_text(text)
    norms = couplings.order_norms()
    print(f"wrote {len(couplings)} couplings to {args.output}; per-order "
          f"norms {np.array2string(norms, precision=4)}")
    return 0


def cmd_analyze(args) -> int:
    model = load_model(args.checkpoint)
    samples = _load_dataset(Path(args.dataset))
    rcfg = None if args.ridge_lam is None else ridge.RidgeConfig(lam=args.ridge_lam)
    report = dynamics.classify_fixed_point(model, samples, tol=args.tol, ridge=rcfg)
    Path(args.output).write_text(report.to_json() + "\n")
    print(f"{report.classification} (theta grad {report.theta_grad_sup:.3e}, "
          f"coupling grad {report.phi_grad_sup:.3e}, min eigenvalue "
          f"{report.min_eigenvalue:.3e})")
    return 0


def cmd_track(args) -> int:
    path = Path(args.trajectory)
    if not path.exists():
        raise ConfigError(f"trajectory not found: {path}")
    trajectory = dynamics.TrainingTrajectory.from_csv(path.read_text())
    report = dynamics.dsb_report(trajectory, fraction=args.fraction, floor=args.floor)
    Path(args.output).write_text(report.to_json() + "\n")
    steps = ", ".join(
        f"t_{n}={'-' if t is None else t}"
        for n, t in zip(report.orders, report.learning_steps)
    )
    print(f"learning steps {steps}; ordering "
          f"{'holds' if report.ordering_ok else 'violated'}")
    return 0


def _check_transform(rng) -> bool:
    values = rng.standard_normal(64)
    spectrum = pbf.fast_transform(values)
    direct = np.asarray(
        [pbf.fourier_coefficient_direct(values, 6, m) for m in range(64)]
    )
    ok = np.max(np.abs(spectrum.coefficients - direct)) < 1e-12
    ok &= np.max(np.abs(pbf.inverse_transform(spectrum) - values)) < 1e-12
    ok &= abs(spectrum.squared_norm() - np.mean(values**2)) < 1e-12
    return bool(ok)


def _check_influence(rng) -> bool:
    values = rng.standard_normal(32)
    spectrum = pbf.fast_transform(values)
    table = values.reshape([2] * 5)  # axis 4 - i carries site i
    for site in range(5):
        swapped = np.flip(table, axis=4 - site)
        deriv = (table - swapped) / 2.0
        direct = float(np.mean(deriv.ravel() ** 2))
        if abs(pbf.influence(spectrum, site) - direct) > 1e-12:
            return False
    weights = spectrum.weight_by_order()
    total = float(np.dot(np.arange(6), weights))
    return abs(total - pbf.total_influence(spectrum)) < 1e-12


def _check_hobm_fit(rng) -> bool:
    probs = rng.dirichlet(np.full(16, 4.0))
    table = hobm.ProbabilityTable(4, probs)
    result = hobm.fit(table, hobm.FitConfig(tolerance=1e-8))
    grad = hobm.nll_gradient(result.model, table)
    return grad.sup_norm() < 1e-6


def _check_extraction(rng) -> bool:
    model = rbm_mod.SpinRbm(
        rng.normal(0, 0.5, (5, 3)), rng.normal(0, 0.3, 3), rng.normal(0, 0.3, 5)
    )
    exact = rbm_mod.extract_couplings_exact(model)
    for mask in (1, 3, 21, 31):
        formula = rbm_mod.extract_coupling_formula(model, mask, "exact")
        if abs(formula - exact.get(mask)) > 1e-10:
            return False
    return True


def _check_chain_rule(rng) -> bool:
    model = rbm_mod.SpinRbm(
        rng.normal(0, 0.4, (4, 3)), rng.normal(0, 0.2, 3), rng.normal(0, 0.2, 4)
    )
    probs = rng.dirichlet(np.full(16, 4.0))
    data = hobm.ProbabilityTable(4, probs)
    masks, jac = rbm_mod.coupling_jacobian(model)
    mismatch = data.moments_full()[masks] - model.distribution().moments_full()[masks]
    via_couplings = -(jac.T @ mismatch)
    direct = rbm_mod.nll_gradient_exact(model, data).to_vector()
    return float(np.max(np.abs(via_couplings - direct))) < 1e-10


def _check_moment_dynamics(rng) -> bool:
    model = rbm_mod.SpinRbm(
        rng.normal(0, 0.3, (4, 3)), rng.normal(0, 0.2, 3), rng.normal(0, 0.2, 4)
    )
    data = hobm.ProbabilityTable(4, rng.dirichlet(np.full(16, 4.0)))
    report = dynamics.moment_dynamics_check(model, data)
    return report.max_rel_error < 1e-3


def _check_proposition1(rng) -> bool:
    model = rbm_mod.SpinRbm(
        rng.normal(0, 0.5, (6, 4)), rng.normal(0, 0.3, 4), rng.normal(0, 0.3, 6)
    )
    return all(
        dynamics.proposition1_check(model, n)[2] >= -1e-12 for n in range(1, 7)
    )


def _check_ridge_sandwich(rng) -> bool:
    # the sandwich identity needs a stationary point, so converge first
    data = hobm.ProbabilityTable(4, rng.dirichlet(np.full(16, 4.0)))
    rcfg = ridge.RidgeConfig(lam=1e-2)
    start = rbm_mod.initialize(4, 6, seed=int(rng.integers(1 << 31)), weight_std=0.1)
    tcfg = dynamics.TrainConfig(
        n_steps=20000, mode="backtracking", ridge=rcfg,
        tolerance=1e-11, log_every=5000,
    )
    model = dynamics.train(start, data, tcfg).model
    report = ridge.ridge_hessian_check(model, data, rcfg)
    return (
        report.max_sandwich_deviation < 1e-6
        and report.min_eigenvalue > -1e-8
        and report.row_space_min_eigenvalue > 0
    )


_CHECKS = [
    ("fast transform vs direct summation, roundtrip, Parseval", _check_transform),
    ("influence: spectral formula vs discrete derivative", _check_influence),
    ("convex fit reaches moment matching", _check_hobm_fit),
    ("per-subset extraction formula vs transform", _check_extraction),
    ("chain rule: parameter gradient vs coupling gradient", _check_chain_rule),
    ("moment velocities vs covariance contraction", _check_moment_dynamics),
    ("high-order gradient weight bound", _check_proposition1),
    ("ridge sandwich Hessian identity", _check_ridge_sandwich),
]


def cmd_check(args) -> int:
    failures = 0
    for index, (name, check) in enumerate(_CHECKS):
        ok = check(np.random.default_rng(args.seed + index))
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        failures += not ok
    if failures:
        print(f"{failures} of {len(_CHECKS)} checks failed", file=sys.stderr)
        return 2
    print(f"all {len(_CHECKS)} checks passed")
    return 0


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fourspin",
        description="Train spin models and analyse their effective couplings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", required=True, help="TOML or JSON experiment config")
        p.add_argument(
            "--set", action="append", metavar="SECTION.KEY=VALUE",
            help="override a config entry (repeatable)",
        )
        p.add_argument("--output-dir", help="override the configured output directory")

    p_gen = sub.add_parser("generate", help="sample a dataset and write it with its sidecar")
    add_config_flags(p_gen)
    p_gen.set_defaults(func=cmd_generate)

    p_train = sub.add_parser("train", help="train a model, writing trajectory and checkpoint")
    add_config_flags(p_train)
    p_train.add_argument("--dataset", help="dataset file (default: <output_dir>/data.txt)")
    p_train.set_defaults(func=cmd_train)

    p_ext = sub.add_parser("extract", help="effective couplings of a checkpoint")
    p_ext.add_argument("--checkpoint", required=True)
    p_ext.add_argument("--output", required=True)
    p_ext.add_argument("--max-order", type=int, default=3)
    p_ext.add_argument("--mode", choices=("exact", "monte_carlo"), default="exact")
    p_ext.add_argument("--n-samples", type=int, default=100_000,
                       help="draws per coupling in monte_carlo mode")
    p_ext.add_argument("--seed", type=int, default=0)
    p_ext.add_argument("--format", choices=("json", "csv"), default="json")
    p_ext.set_defaults(func=cmd_extract)

    p_an = sub.add_parser("analyze", help="classify a checkpoint against a dataset")
    p_an.add_argument("--checkpoint", required=True)
    p_an.add_argument("--dataset", required=True)
    p_an.add_argument("--output", required=True)
    p_an.add_argument("--tol", type=float, default=1e-8)
    p_an.add_argument("--ridge-lam", type=float, default=None,
                      help="classify against the ridge-shifted stationarity condition")
    p_an.set_defaults(func=cmd_analyze)

    p_tr = sub.add_parser("track", help="learning-order report from a trajectory CSV")
    p_tr.add_argument("--trajectory", required=True)
    p_tr.add_argument("--output", required=True)
    p_tr.add_argument("--fraction", type=float, default=0.5)
    p_tr.add_argument("--floor", type=float, default=1e-3)
    p_tr.set_defaults(func=cmd_track)

    p_chk = sub.add_parser("check", help="run the fast invariant suite")
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except pbf.EnumerationLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except hobm.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
