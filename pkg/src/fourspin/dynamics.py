"""Gradient-flow training and its effective-coupling-space diagnostics.

Likelihood ascent in the raw parameters theta induces a flow on the
effective couplings phi(theta), by the chain rule:

    theta_dot = J^T grad_phi L,        phi_dot = J J^T grad_phi L,

with J = d phi / d theta and grad_phi L = <chi>_data - <chi>_model.  This
module discretizes the theta-flow (forward Euler, or a backtracking line
search when only the optimum matters), classifies fixed points as
data-consistent or spurious, checks marginal stability through the exact
theta-Hessian, and measures the order-by-order learning schedule (the
distributional simplicity bias) from trajectories of per-order coupling
norms.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import pbf, rbm as rbm_mod
from .hobm import (
    ConvergenceError,
    DistributionHandle,
    EmpiricalSamples,
    HigherOrderModel,
    _moments_on_masks,
)
from .ridge import RidgeConfig, _penalty_gradient, _penalty_hessian, penalty as ridge_penalty

Model = Union[HigherOrderModel, rbm_mod.SpinRbm]


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class TrainingTrajectory:
    """Per-logging-step records of a training run.

    ``frob[k]`` and ``mismatch[k]`` hold the order-(k+1) Frobenius norm of
    the effective couplings and the L2 norm of the order-(k+1) moment
    mismatch; ``penalty`` is present only for ridge runs.
    """

    steps: np.ndarray
    times: np.ndarray
    loglik: np.ndarray
    grad_norm: np.ndarray
    frob: np.ndarray  # shape (n_records, max_order)
    mismatch: np.ndarray  # shape (n_records, max_order)
    penalty: np.ndarray | None = None

    def __post_init__(self):
        if len(self.steps) == 0:
            raise ValueError("trajectory needs at least one record")
        if np.any(np.diff(self.steps) <= 0) and len(self.steps) > 1:
            raise ValueError("steps must be strictly increasing")
        if np.any(self.frob < 0):
            raise ValueError("Frobenius norms cannot be negative")

    @property
    def max_order(self) -> int:
        return self.frob.shape[1]

    def frob_norm(self, order: int) -> np.ndarray:
        return self.frob[:, order - 1]

    def mismatch_norm(self, order: int) -> np.ndarray:
        return self.mismatch[:, order - 1]

    def final_norms(self) -> np.ndarray:
        return self.frob[-1]

    def to_csv(self) -> str:
        cols = ["step", "time", "loglik", "grad_norm"]
        cols += [f"frob_n{k}" for k in range(1, self.max_order + 1)]
        cols += [f"mismatch_n{k}" for k in range(1, self.max_order + 1)]
        blocks = [self.steps, self.times, self.loglik, self.grad_norm]
        blocks += [self.frob[:, k] for k in range(self.max_order)]
        blocks += [self.mismatch[:, k] for k in range(self.max_order)]
        if self.penalty is not None:
            cols.append("penalty")
            blocks.append(self.penalty)
        lines = [",".join(cols)]
        for row in zip(*blocks):
            lines.append(
                ",".join(
                    str(int(v)) if name == "step" else repr(float(v))
                    for name, v in zip(cols, row)
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TrainingTrajectory":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split(",")
        data = np.asarray([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        col = {name: data[:, j] for j, name in enumerate(header)}
        orders = sorted(
            int(name[len("frob_n"):]) for name in header if name.startswith("frob_n")
        )
        frob = np.column_stack([col[f"frob_n{k}"] for k in orders])
        mism = np.column_stack([col[f"mismatch_n{k}"] for k in orders])
        return cls(
            steps=col["step"].astype(np.int64),
            times=col["time"],
            loglik=col["loglik"],
            grad_norm=col["grad_norm"],
            frob=frob,
            mismatch=mism,
            penalty=col.get("penalty"),
        )


@dataclass(frozen=True)
class TrainResult:
    model: "Model"
    trajectory: TrainingTrajectory


@dataclass(frozen=True)
class TrainConfig:
    """Settings for gradient-flow training.

    ``mode='fixed'`` is forward Euler with constant ``step_size`` (the flow
    discretization used by all dynamics diagnostics); ``mode='backtracking'``
    takes Barzilai-Borwein trial steps with an Armijo safeguard and is the
    right choice when only the converged point matters.  ``gradient``
    selects exact enumeration or the parallel-tempering estimator (RBMs
    only; the sampler seed is advanced by the step index).  ``tolerance``,
    if set, stops early once the gradient sup-norm falls below it.
    """

    n_steps: int = 1000
    step_size: float | None = None
    mode: str = "fixed"
    gradient: str = "exact"
    sampler: rbm_mod.SamplerConfig | None = None
    log_every: int = 10
    track_order: int = 3
    ridge: RidgeConfig | None = None
    tolerance: float | None = None
    extraction_samples: int = 4096

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be nonnegative")
        if self.mode not in ("fixed", "backtracking"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.gradient not in ("exact", "sampled"):
            raise ValueError(f"unknown gradient mode {self.gradient!r}")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")

    def resolved_step(self, model) -> float:
        if self.step_size is not None:
            return self.step_size
        return 0.05 if isinstance(model, HigherOrderModel) else 0.01


def _ridge_lambda(config: TrainConfig) -> float:
    return config.ridge.lam if config.ridge is not None else 0.0


class _HobmState:
    """Exact training state for explicit-coupling models."""

    def __init__(self, model: HigherOrderModel, data: DistributionHandle, config: TrainConfig):
        if config.gradient != "exact":
            raise ValueError("explicit-coupling models train with exact gradients only")
        self.n_sites = model.n_sites
        pbf.check_dense_limit(self.n_sites)
        self.masks = model.couplings.masks
        self.max_order = model.couplings.max_order
        self.phi = model.couplings.values.copy()
        self.m_data = _moments_on_masks(data, self.masks, self.n_sites)
        self.signs = pbf._mask_signs_cached(self.n_sites)
        self.config = config
        self.lam = _ridge_lambda(config)
        self.space = config.ridge.space if config.ridge else "coupling"
        self.track = min(config.track_order, self.n_sites)
        all_orders = pbf.subset_order(np.arange(2**self.n_sites))
        self.order_idx = [np.flatnonzero(all_orders == k) for k in range(1, self.track + 1)]
        self.m_data_full = _moments_on_masks(
            data, np.arange(1, 2**self.n_sites), self.n_sites
        )
        self._refresh()

    def _refresh(self):
        full = np.zeros(2**self.n_sites)
        full[self.masks] = self.phi
        g = pbf.fwht(self.signs * full)  # -H on each configuration
        shift = g.max()
        weights = np.exp(g - shift)
        z = weights.sum()
        self.log_z = float(np.log(z) + shift)
        self.p_model = weights / z
        self.m_model_full = (self.signs * pbf.fwht(self.p_model))[1:]
        self.spectrum_full = full  # phi embedded densely; couplings are the spectrum
        grad = self.m_model_full[self.masks - 1] - self.m_data
        if self.lam:
            grad = grad + self.lam * self.phi
        self.grad = grad

    def objective(self) -> float:
        obj = -float(np.dot(self.phi, self.m_data)) + self.log_z
        if self.lam:
            obj += 0.5 * self.lam * float(np.dot(self.phi, self.phi))
        return obj

    def gradient_vector(self) -> np.ndarray:
        return self.grad

    def apply(self, delta: np.ndarray):
        self.phi = self.phi + delta
        self._refresh()

    def assign(self, values: np.ndarray):
        self.phi = values
        self._refresh()

    def current_vector(self) -> np.ndarray:
        return self.phi.copy()

    def loglik(self) -> float:
        return float(np.dot(self.phi, self.m_data)) - self.log_z

    def record_norms(self) -> tuple[np.ndarray, np.ndarray]:
        frob = np.asarray(
            [np.linalg.norm(self.spectrum_full[idx]) for idx in self.order_idx]
        )
        diff = self.m_data_full - self.m_model_full
        mism = np.asarray(
            [np.linalg.norm(diff[idx - 1]) for idx in self.order_idx]
        )
        return frob, mism

    def penalty_value(self) -> float:
        return float(np.dot(self.phi, self.phi))

    def final_model(self) -> HigherOrderModel:
        return HigherOrderModel(
            pbf.SubsetVector(self.n_sites, self.masks, self.phi, self.max_order)
        )


class _RbmState:
    """Training state for RBMs; exact path keeps full tables in memory."""

    def __init__(self, model: rbm_mod.SpinRbm, data: DistributionHandle, config: TrainConfig):
        self.n_visible = model.n_visible
        self.n_hidden = model.n_hidden
        self.theta = model.to_vector()
        self.config = config
        self.lam = _ridge_lambda(config)
        self.track = min(config.track_order, self.n_visible)
        self.exact = config.gradient == "exact"
        self.dense = self.n_visible <= pbf.DEFAULT_MAX_DENSE_SITES
        if self.exact and not self.dense:
            raise pbf.EnumerationLimitError(
                f"exact gradients need enumeration over {self.n_visible} sites; "
                "use gradient='sampled'"
            )
        if not self.exact and config.sampler is None:
            raise ValueError("sampled gradient mode needs a sampler config")
        if not self.dense and config.mode == "backtracking":
            raise ValueError("backtracking needs exact objectives; use mode='fixed'")
        if isinstance(data, EmpiricalSamples) and self.dense:
            data = data.to_table()
        self.data = data
        if self.dense:
            self.states = pbf.enumerate_states(self.n_visible).astype(np.float64)
            self.signs = pbf._mask_signs_cached(self.n_visible)
            all_orders = pbf.subset_order(np.arange(2**self.n_visible))
            self.order_idx = [
                np.flatnonzero(all_orders == k) for k in range(1, self.track + 1)
            ]
            self.p_data = data.probs
            self.m_data_full = data.moments_full()
        else:
            self.track_masks = pbf.masks_up_to_order_sparse(self.n_visible, self.track)
            self.m_data_track = _moments_on_masks(
                data, self.track_masks, self.n_visible
            )
        self.step_index = 0
        self._refresh()

    def _unpack(self):
        return rbm_mod.SpinRbm.from_vector(self.theta, self.n_visible, self.n_hidden)

    def _refresh(self):
        model = self._unpack()
        self.model = model
        if self.dense:
            pre = self.states @ model.weights + model.hidden_biases
            self.tanh_pre = np.tanh(pre)
            self.g = rbm_mod.log_cosh(pre).sum(axis=1) + self.states @ model.visible_fields
            shift = self.g.max()
            weights = np.exp(self.g - shift)
            z = weights.sum()
            self.log_z = float(np.log(z) + shift)
            self.p_model = weights / z
        if self.exact:
            diff = self.p_data - self.p_model
            g_w = self.states.T @ (diff[:, None] * self.tanh_pre)
            g_zeta = diff @ self.tanh_pre
            g_eta = diff @ self.states
            grad = -np.concatenate([g_w.ravel(), g_zeta, g_eta])  # grad of -L
        else:
            scfg = dataclasses.replace(
                self.config.sampler, seed=self.config.sampler.seed + self.step_index
            )
            grad = rbm_mod.nll_gradient_sampled(model, self.data, scfg).to_vector()
        if self.lam:
            grad = grad + self.lam * _penalty_gradient(model, self.config.ridge)
        self.grad = grad

    def objective(self) -> float:
        if not self.dense:
            raise pbf.EnumerationLimitError("objective needs dense enumeration")
        obj = -float(np.dot(self.p_data, self.g)) + self.log_z
        if self.lam:
            obj += 0.5 * self.lam * ridge_penalty(self.model, self.config.ridge)
        return obj

    def gradient_vector(self) -> np.ndarray:
        return self.grad

    def apply(self, delta: np.ndarray):
        self.theta = self.theta + delta
        self.step_index += 1
        self._refresh()

    def assign(self, values: np.ndarray):
        self.theta = values
        self.step_index += 1
        self._refresh()

    def current_vector(self) -> np.ndarray:
        return self.theta.copy()

    def loglik(self) -> float:
        if not self.dense:
            return float("nan")
        return float(np.dot(self.p_data, self.g)) - self.log_z

    def record_norms(self) -> tuple[np.ndarray, np.ndarray]:
        if self.dense:
            spectrum = self.signs * pbf.fwht(self.g) / len(self.g)
            frob = np.asarray([np.linalg.norm(spectrum[idx]) for idx in self.order_idx])
            m_model_full = self.signs * pbf.fwht(self.p_model)
            diff = self.m_data_full - m_model_full
            mism = np.asarray([np.linalg.norm(diff[idx]) for idx in self.order_idx])
            return frob, mism
        # beyond enumeration: per-subset Monte Carlo extraction, sampled moments
        values = np.asarray(
            [
                rbm_mod.extract_coupling_formula(
                    self.model,
                    int(mask),
                    "monte_carlo",
                    n_samples=self.config.extraction_samples,
                    seed=self.step_index * 7919 + int(mask),
                )
                for mask in self.track_masks
            ]
        )
        orders = pbf.subset_order(self.track_masks)
        frob = np.asarray(
            [np.linalg.norm(values[orders == k]) for k in range(1, self.track + 1)]
        )
        scfg = dataclasses.replace(
            self.config.sampler, seed=self.config.sampler.seed + self.step_index + 1
        )
        model_samples = rbm_mod.sample_model(self.model, scfg)
        m_model = _moments_on_masks(
            EmpiricalSamples(self.n_visible, model_samples),
            self.track_masks,
            self.n_visible,
        )
        diff = self.m_data_track - m_model
        mism = np.asarray(
            [np.linalg.norm(diff[orders == k]) for k in range(1, self.track + 1)]
        )
        return frob, mism

    def penalty_value(self) -> float:
        return ridge_penalty(self.model, self.config.ridge)

    def final_model(self) -> rbm_mod.SpinRbm:
        return self.model


def train(model: "Model", data: DistributionHandle, config: TrainConfig) -> TrainResult:
    """Discretized gradient-flow training with per-order trajectory logging.

    Records at step 0, every ``log_every`` steps, and at the final step.

    Raises
    ------
    ConvergenceError
        If the loss becomes non-finite (step size too large).
    """
    if isinstance(model, HigherOrderModel):
        state = _HobmState(model, data, config)
    else:
        state = _RbmState(model, data, config)
    step_size = config.resolved_step(model)

    rows = {
        "step": [], "time": [], "loglik": [], "grad_norm": [],
        "frob": [], "mismatch": [], "penalty": [],
    }
    sim_time = 0.0

    def record(step: int):
        frob, mism = state.record_norms()
        rows["step"].append(step)
        rows["time"].append(sim_time)
        rows["loglik"].append(state.loglik())
        rows["grad_norm"].append(float(np.max(np.abs(state.gradient_vector()))))
        rows["frob"].append(frob)
        rows["mismatch"].append(mism)
        if config.ridge is not None:
            rows["penalty"].append(0.5 * config.ridge.lam * state.penalty_value())

    record(0)
    prev_vec = None
    prev_grad = None
    last_obj = None
    steps_done = 0
    for step in range(1, config.n_steps + 1):
        grad = state.gradient_vector()
        if not np.all(np.isfinite(grad)):
            raise ConvergenceError(
                f"non-finite gradient at step {step} (last good step "
                f"{step - 1}); reduce the step size",
                float("nan"),
            )
        if config.tolerance is not None and float(np.max(np.abs(grad))) < config.tolerance:
            break
        if config.mode == "fixed":
            state.apply(-step_size * grad)
            sim_time += step_size
        else:
            if last_obj is None:
                last_obj = state.objective()
            vec = state.current_vector()
            if prev_vec is None:
                trial = step_size
            else:
                s = vec - prev_vec
                y = grad - prev_grad
                sy = float(np.dot(s, y))
                trial = float(np.dot(s, s)) / sy if sy > 0 else step_size
                trial = float(np.clip(trial, 1e-10, 1e4))
            prev_vec, prev_grad = vec, grad
            g_sq = float(np.dot(grad, grad))
            t = trial
            accepted = False
            for _ in range(60):
                state.assign(vec - t * grad)
                cand_obj = state.objective()
                if cand_obj <= last_obj - 1e-4 * t * g_sq:
                    accepted = True
                    break
                t *= 0.5
            if not accepted and cand_obj >= last_obj:
                # objective changes are below float resolution: undo and stop
                state.assign(vec)
                break
            last_obj = cand_obj
            sim_time += t
        steps_done = step
        if step % config.log_every == 0:
            record(step)
    if rows["step"][-1] != steps_done:
        record(steps_done)

    trajectory = TrainingTrajectory(
        steps=np.asarray(rows["step"], dtype=np.int64),
        times=np.asarray(rows["time"]),
        loglik=np.asarray(rows["loglik"]),
        grad_norm=np.asarray(rows["grad_norm"]),
        frob=np.asarray(rows["frob"]),
        mismatch=np.asarray(rows["mismatch"]),
        penalty=np.asarray(rows["penalty"]) if config.ridge is not None else None,
    )
    return TrainResult(state.final_model(), trajectory)


# ---------------------------------------------------------------------------
# effective-coupling flow


def _phi_gradient_full(rbm: rbm_mod.SpinRbm, data: DistributionHandle) -> np.ndarray:
    """grad_phi L = <chi>_data - <chi>_model on all nonempty subsets."""
    masks = np.arange(1, 2**rbm.n_visible)
    m_model = rbm.distribution().moments_full()[masks]
    m_data = _moments_on_masks(data, masks, rbm.n_visible)
    return m_data - m_model


def effective_flow_rhs(
    rbm: rbm_mod.SpinRbm, data: DistributionHandle, max_order: int | None = None
) -> pbf.SubsetVector:
    """phi_dot under likelihood ascent: J J^T (<chi>_data - <chi>_model).

    The sum over intermediate subsets always runs over every nonempty
    subset; ``max_order`` only restricts which rows are returned.
    """
    masks, jac = rbm_mod.coupling_jacobian(rbm)
    rhs = jac @ (jac.T @ _phi_gradient_full(rbm, data))
    keep = pbf.masks_up_to_order(rbm.n_visible, max_order)
    sel = np.searchsorted(masks, keep)
    return pbf.SubsetVector(rbm.n_visible, keep, rhs[sel], max_order)


@dataclass(frozen=True)
class CouplingContribution:
    """One term of the Eq.-per-subset expansion of phi_dot_I."""

    mask: int
    overlap: float  # grad_theta phi_I . grad_theta phi_J
    mismatch: float  # <chi_J>_data - <chi_J>_model
    contribution: float  # overlap * mismatch
    grad_norm: float  # |grad_theta phi_J|
    cosine: float  # cos angle(grad phi_I, grad phi_J); 0 if either is null


def per_coupling_decomposition(
    rbm: rbm_mod.SpinRbm, data: DistributionHandle, mask: int
) -> list[CouplingContribution]:
    """phi_dot_I split into per-subset overlap * mismatch contributions."""
    pbf._check_mask(mask, rbm.n_visible)
    if mask == 0:
        raise ValueError("the empty set carries no coupling")
    masks, jac = rbm_mod.coupling_jacobian(rbm)
    mismatch = _phi_gradient_full(rbm, data)
    row_i = jac[int(np.searchsorted(masks, mask))]
    norm_i = float(np.linalg.norm(row_i))
    out = []
    for pos, mask_j in enumerate(masks):
        row_j = jac[pos]
        overlap = float(np.dot(row_i, row_j))
        norm_j = float(np.linalg.norm(row_j))
        cosine = overlap / (norm_i * norm_j) if norm_i > 0 and norm_j > 0 else 0.0
        out.append(
            CouplingContribution(
                mask=int(mask_j),
                overlap=overlap,
                mismatch=float(mismatch[pos]),
                contribution=overlap * float(mismatch[pos]),
                grad_norm=norm_j,
                cosine=cosine,
            )
        )
    return out


def diagonal_approx_rhs(
    rbm: rbm_mod.SpinRbm, data: DistributionHandle, max_order: int | None = None
) -> pbf.SubsetVector:
    """Diagonal approximation phi_dot_I ~ |grad_theta phi_I|^2 * mismatch_I."""
    masks, jac = rbm_mod.coupling_jacobian(rbm)
    mismatch = _phi_gradient_full(rbm, data)
    diag = np.einsum("ip,ip->i", jac, jac) * mismatch
    keep = pbf.masks_up_to_order(rbm.n_visible, max_order)
    sel = np.searchsorted(masks, keep)
    return pbf.SubsetVector(rbm.n_visible, keep, diag[sel], max_order)


def diagonal_approx_report(rbm: rbm_mod.SpinRbm, data: DistributionHandle) -> dict:
    """Per-subset relative deviation of the diagonal approximation.

    Deviations are |diag - full| / max(|full|, tiny); the median over
    subsets is the headline number (it shrinks as N_theta grows).
    """
    full = effective_flow_rhs(rbm, data)
    diag = diagonal_approx_rhs(rbm, data)
    denom = np.maximum(np.abs(full.values), 1e-30)
    rel = np.abs(diag.values - full.values) / denom
    return {
        "masks": full.masks.tolist(),
        "relative_deviation": rel.tolist(),
        "median_relative_deviation": float(np.median(rel)),
        "n_theta": rbm.n_parameters,
    }


@dataclass(frozen=True)
class CosineStats:
    """Pairwise gradient-direction overlaps between coupling gradients."""

    n_theta: int
    n_pairs: int
    mean_abs_cos: float
    quantiles: tuple[float, float, float]  # 25%, 50%, 75%
    n_zero_rows: int


def cosine_overlap_stats(
    rbm: rbm_mod.SpinRbm,
    max_order: int | None = None,
    n_pairs: int = 500,
    seed: int = 0,
) -> CosineStats:
    """|cos angle(grad phi_I, grad phi_J)| over random subset pairs I != J.

    Rows with zero gradient norm are excluded from sampling and counted.
    """
    masks, jac = rbm_mod.coupling_jacobian(rbm, max_order)
    norms = np.linalg.norm(jac, axis=1)
    alive = np.flatnonzero(norms > 0)
    n_zero = len(masks) - len(alive)
    if len(alive) < 2:
        raise ValueError("need at least two nonzero gradient rows")
    rng = np.random.default_rng(seed)
    first = alive[rng.integers(0, len(alive), size=n_pairs)]
    second = alive[rng.integers(0, len(alive), size=n_pairs)]
    clash = first == second
    while np.any(clash):
        second[clash] = alive[rng.integers(0, len(alive), size=int(clash.sum()))]
        clash = first == second
    dots = np.einsum("ip,ip->i", jac[first], jac[second])
    cosines = np.abs(dots / (norms[first] * norms[second]))
    q25, q50, q75 = np.quantile(cosines, [0.25, 0.5, 0.75])
    return CosineStats(
        n_theta=rbm.n_parameters,
        n_pairs=n_pairs,
        mean_abs_cos=float(cosines.mean()),
        quantiles=(float(q25), float(q50), float(q75)),
        n_zero_rows=int(n_zero),
    )


def cosine_scaling_sweep(
    n_visible: int,
    hidden_sizes: tuple[int, ...],
    weight_scale: float = 1.0,
    n_pairs: int = 2000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Mean |cos| across hidden sizes and the fitted log-log slope vs N_theta.

    Weights are drawn from N(0, weight_scale^2 / N_v) with random biases, a
    generic (isotropic) ensemble; near-linear hidden units would instead
    concentrate every gradient on low orders and flatten the slope.
    """
    n_thetas = []
    means = []
    for k, n_hidden in enumerate(hidden_sizes):
        rng = np.random.default_rng(seed + k)
        model = rbm_mod.SpinRbm(
            weight_scale / np.sqrt(n_visible) * rng.standard_normal((n_visible, n_hidden)),
            rng.standard_normal(n_hidden),
            rng.standard_normal(n_visible),
        )
        stats = cosine_overlap_stats(model, n_pairs=n_pairs, seed=seed + 1000 + k)
        n_thetas.append(stats.n_theta)
        means.append(stats.mean_abs_cos)
    n_thetas = np.asarray(n_thetas, dtype=np.float64)
    means = np.asarray(means)
    slope = float(np.polyfit(np.log(n_thetas), np.log(means), 1)[0])
    return n_thetas, means, slope


def proposition1_check(
    rbm_or_features: "rbm_mod.SpinRbm | np.ndarray", order: int
) -> tuple[float, float, float]:
    """Bound on high-order gradient weight.

    lhs = sum over |I| >= order of |grad_theta phi_I|^2; rhs = (1/order) *
    sum over parameters of the total influence of the feature dE/dtheta_a.
    Returns (lhs, rhs, slack); slack = rhs - lhs is nonnegative up to
    roundoff.  Accepts either an RBM or an explicit feature table of shape
    (2**N, n_parameters) whose columns are dE/dtheta_a on each
    configuration.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if isinstance(rbm_or_features, rbm_mod.SpinRbm):
        features = rbm_mod.gradient_feature_table(rbm_or_features)
    else:
        features = np.asarray(rbm_or_features, dtype=np.float64)
    size = features.shape[0]
    n_sites = int(size).bit_length() - 1
    if 2**n_sites != size:
        raise ValueError("feature table length must be a power of two")
    spectra = pbf._mask_signs_cached(n_sites)[:, None] * pbf.fwht(features, axis=0) / size
    orders = pbf.subset_order(np.arange(size))
    lhs = float(np.sum(spectra[orders >= order] ** 2))
    rhs = 0.0
    for col in range(features.shape[1]):
        spec = pbf.FourierSpectrum(n_sites, spectra[:, col])
        rhs += pbf.total_influence(spec)
    rhs /= order
    return lhs, rhs, rhs - lhs


# ---------------------------------------------------------------------------
# fixed points and stability


def hessian_theta(rbm: rbm_mod.SpinRbm, data: DistributionHandle) -> np.ndarray:
    """Exact Hessian of -L in theta (direct second derivatives)."""
    return rbm_mod.nll_hessian_exact(rbm, data)


@dataclass(frozen=True)
class FixedPointReport:
    """Stationarity classification and marginal-stability summary."""

    classification: str  # data_consistent | spurious | not_stationary
    theta_grad_sup: float
    phi_grad_sup: float
    min_eigenvalue: float
    n_negative: int
    n_zero_band: int
    zero_band: float
    neutral_residuals: tuple[float, ...]
    tol: float

    def to_json(self) -> str:
        out = dataclasses.asdict(self)
        out["neutral_residuals"] = list(self.neutral_residuals)
        return json.dumps(out)

    @classmethod
    def from_json(cls, text: str) -> "FixedPointReport":
        obj = json.loads(text)
        obj["neutral_residuals"] = tuple(obj["neutral_residuals"])
        return cls(**obj)


def classify_fixed_point(
    model: "Model",
    data: DistributionHandle,
    tol: float = 1e-8,
    ridge: RidgeConfig | None = None,
) -> FixedPointReport:
    """Classify a parameter point and check marginal stability.

    data_consistent: both the parameter gradient and the coupling-space
    gradient vanish (all tracked moments matched, up to the ridge shift
    when a ridge config is given).  spurious: the parameter gradient
    vanishes while moments mismatch.  Eigenvectors of the Hessian with
    |lambda| < zero_band are tested to lie in ker(d phi / d theta).
    """
    lam = ridge.lam if ridge is not None else 0.0
    if isinstance(model, HigherOrderModel):
        from .hobm import nll_gradient, nll_hessian
        base = nll_gradient(model, data).values
        theta_grad = base + lam * model.couplings.values if lam else base
        phi_grad = theta_grad
        hess = nll_hessian(model, limit=pbf.DEFAULT_MAX_DENSE_SITES)
        if lam:
            hess = hess + lam * np.eye(len(hess))
        jac = np.eye(len(hess))
    else:
        theta_grad = rbm_mod.nll_gradient_exact(model, data).to_vector()
        if lam:
            theta_grad = theta_grad + lam * _penalty_gradient(model, ridge)
        phi_grad = -_phi_gradient_full(model, data)  # grad of -L in phi
        if lam:
            phi = rbm_mod.extract_couplings_exact(model).values
            phi_grad = phi_grad + lam * phi
        hess = rbm_mod.nll_hessian_exact(model, data)
        if lam:
            hess = hess + lam * _penalty_hessian(model, ridge)
        _, jac = rbm_mod.coupling_jacobian(model)
    theta_sup = float(np.max(np.abs(theta_grad)))
    phi_sup = float(np.max(np.abs(phi_grad)))
    if theta_sup >= tol:
        classification = "not_stationary"
    elif phi_sup < tol:
        classification = "data_consistent"
    else:
        classification = "spurious"
    eigvals, eigvecs = np.linalg.eigh(hess)
    band = tol * (1.0 + float(np.max(np.abs(eigvals))))
    in_band = np.abs(eigvals) < band
    residuals = tuple(
        float(np.linalg.norm(jac @ eigvecs[:, j])) for j in np.flatnonzero(in_band)
    )
    return FixedPointReport(
        classification=classification,
        theta_grad_sup=theta_sup,
        phi_grad_sup=phi_sup,
        min_eigenvalue=float(eigvals.min()),
        n_negative=int(np.sum(eigvals < -band)),
        n_zero_band=int(in_band.sum()),
        zero_band=float(band),
        neutral_residuals=residuals,
        tol=tol,
    )


@dataclass(frozen=True)
class MomentDynamicsReport:
    """Finite-difference check of d<chi>/dt = Cov_model(chi) . phi_dot."""

    predicted: pbf.SubsetVector
    finite_difference: pbf.SubsetVector
    max_abs_error: float
    max_rel_error: float
    cov_identity_deviation: float


def moment_dynamics_check(
    rbm: rbm_mod.SpinRbm, data: DistributionHandle, step: float = 1e-5
) -> MomentDynamicsReport:
    """Compare predicted moment velocities against an Euler finite difference.

    The prediction contracts the full model covariance of the parity
    observables with phi_dot; the finite difference moves theta by
    +-step along the likelihood-ascent direction.
    """
    n = rbm.n_visible
    masks = np.arange(1, 2**n)
    full = rbm.distribution().moments_full()
    cov = full[np.bitwise_xor(masks[:, None], masks[None, :])] - np.outer(
        full[masks], full[masks]
    )
    phi_dot = effective_flow_rhs(rbm, data).values
    predicted = cov @ phi_dot

    theta_dot = -rbm_mod.nll_gradient_exact(rbm, data).to_vector()
    theta = rbm.to_vector()
    up = rbm_mod.SpinRbm.from_vector(theta + step * theta_dot, n, rbm.n_hidden)
    dn = rbm_mod.SpinRbm.from_vector(theta - step * theta_dot, n, rbm.n_hidden)
    fd = (
        up.distribution().moments_full()[masks]
        - dn.distribution().moments_full()[masks]
    ) / (2 * step)

    err = np.abs(predicted - fd)
    scale = np.max(np.abs(predicted))
    return MomentDynamicsReport(
        predicted=pbf.SubsetVector(n, masks, predicted),
        finite_difference=pbf.SubsetVector(n, masks, fd),
        max_abs_error=float(err.max()),
        max_rel_error=float(err.max() / scale) if scale > 0 else 0.0,
        cov_identity_deviation=float(np.max(np.abs(cov - np.eye(len(masks))))),
    )


# ---------------------------------------------------------------------------
# simplicity-bias reporting


@dataclass(frozen=True)
class DsbReport:
    """Order-by-order learning schedule extracted from a trajectory.

    ``learning_steps[n]`` is the first recorded step at which the order-n
    coupling norm reaches ``fraction`` of its final value; orders whose
    final norm is below ``floor`` are reported as unlearned and excluded
    from the ordering verdict, as are orders that never reach the
    threshold.
    """

    orders: tuple[int, ...]
    final_norms: tuple[float, ...]
    learning_steps: tuple[int | None, ...]
    learning_times: tuple[float | None, ...]
    overshoot_ratios: tuple[float, ...]
    unlearned: tuple[int, ...]
    ordering_ok: bool
    fraction: float
    floor: float

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "DsbReport":
        obj = json.loads(text)
        for key in ("orders", "final_norms", "learning_steps", "learning_times",
                    "overshoot_ratios", "unlearned"):
            obj[key] = tuple(obj[key])
        return cls(**obj)


def dsb_report(
    trajectory: TrainingTrajectory, fraction: float = 0.5, floor: float = 1e-3
) -> DsbReport:
    """Measure per-order learning times and overshoots from a trajectory."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    orders = tuple(range(1, trajectory.max_order + 1))
    finals = trajectory.final_norms()
    steps: list[int | None] = []
    times: list[float | None] = []
    ratios = []
    unlearned = []
    for k, order in enumerate(orders):
        final = float(finals[k])
        curve = trajectory.frob[:, k]
        ratios.append(float(curve.max() / final) if final > 0 else float("inf"))
        if final < floor:
            unlearned.append(order)
            steps.append(None)
            times.append(None)
            continue
        hits = np.flatnonzero(curve >= fraction * final)
        if len(hits) == 0:
            unlearned.append(order)
            steps.append(None)
            times.append(None)
            continue
        steps.append(int(trajectory.steps[hits[0]]))
        times.append(float(trajectory.times[hits[0]]))
    learned = [s for s in steps if s is not None]
    ordering_ok = all(a <= b for a, b in zip(learned, learned[1:]))
    return DsbReport(
        orders=orders,
        final_norms=tuple(float(v) for v in finals),
        learning_steps=tuple(steps),
        learning_times=tuple(times),
        overshoot_ratios=tuple(ratios),
        unlearned=tuple(unlearned),
        ordering_ok=ordering_ok,
        fraction=fraction,
        floor=floor,
    )
