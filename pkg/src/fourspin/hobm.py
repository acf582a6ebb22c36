"""Fully visible Boltzmann machines with multi-body couplings.

A model over N spins is parameterized by couplings phi_I on nonempty
subsets I and assigns energy

    H(s) = - sum_I phi_I chi_I(s),      p(s) = exp(-H(s)) / Z.

The average negative log-likelihood of data with parity moments m_I is

    -L(phi) = - sum_I phi_I m_I + ln Z(phi),

a convex function of phi whose gradient is the moment mismatch
<chi_I>_model - <chi_I>_data and whose Hessian is the model covariance of
the parity observables.  At the optimum the model matches every tracked
data moment.  Everything here is exact: partition functions and model
moments are computed by enumeration, so N is limited to desk scales.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from . import pbf


@dataclass(frozen=True)
class ProbabilityTable:
    """Explicit distribution over all 2**N configurations.

    ``probs[k]`` is the probability of the configuration with index k
    (bit i of k set <=> s_i = +1).  Entries must be nonnegative and sum
    to one within 1e-12.
    """

    n_sites: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.shape != (2**self.n_sites,):
            raise ValueError(
                f"expected {2**self.n_sites} probabilities, got {probs.shape}"
            )
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def moments_full(self) -> np.ndarray:
        """<chi_I> for every mask, dense; entry 0 is <chi_empty> = 1."""
        return pbf._mask_signs_cached(self.n_sites) * pbf.fwht(self.probs)

    def entropy(self) -> float:
        p = self.probs[self.probs > 0]
        return float(-np.sum(p * np.log(p)))

    def kl_divergence(self, other: "ProbabilityTable") -> float:
        """KL(self || other); infinite if other misses support of self."""
        if self.n_sites != other.n_sites:
            raise ValueError("tables are over different numbers of sites")
        mask = self.probs > 0
        if np.any(other.probs[mask] == 0):
            return float("inf")
        p = self.probs[mask]
        return float(np.sum(p * (np.log(p) - np.log(other.probs[mask]))))

    def sample(self, n_samples: int, seed: int) -> "EmpiricalSamples":
        """Independent draws from the table."""
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(self.probs), size=n_samples, p=self.probs)
        states = pbf.enumerate_states(self.n_sites)
        return EmpiricalSamples(self.n_sites, states[idx])


@dataclass(frozen=True)
class EmpiricalSamples:
    """A dataset of spin configurations, one per row, values in {-1,+1}."""

    n_sites: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.int8)
        if samples.ndim != 2 or samples.shape[1] != self.n_sites:
            raise ValueError(
                f"expected samples of shape (M, {self.n_sites}), got "
                f"{samples.shape}"
            )
        if samples.shape[0] == 0:
            raise ValueError("need at least one sample")
        if not np.all(np.abs(samples) == 1):
            raise ValueError("samples must take values in {-1, +1}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def to_table(self, limit: int | None = None) -> ProbabilityTable:
        """Empirical histogram as a probability table (may contain zeros)."""
        pbf.check_dense_limit(self.n_sites, limit)
        idx = pbf.encode_states(self.samples)
        counts = np.bincount(idx, minlength=2**self.n_sites)
        return ProbabilityTable(self.n_sites, counts / self.n_samples)


DistributionHandle = Union[ProbabilityTable, EmpiricalSamples]


def site_magnetizations(data: DistributionHandle) -> np.ndarray:
    """<s_i> for each site."""
    if isinstance(data, ProbabilityTable):
        full = data.moments_full()
        return np.asarray(
            [full[1 << i] for i in range(data.n_sites)], dtype=np.float64
        )
    return data.samples.mean(axis=0)


def moments(
    data: DistributionHandle,
    max_order: int | None = None,
    limit: int | None = None,
) -> pbf.SubsetVector:
    """Parity moments <chi_I> over all nonempty subsets up to max_order.

    Tables use the fast transform; sample sets are histogrammed first when
    the site count permits, otherwise each tracked moment is averaged
    directly over the samples.
    """
    if isinstance(data, ProbabilityTable):
        masks = pbf.masks_up_to_order(data.n_sites, max_order, limit)
        full = data.moments_full()
        return pbf.SubsetVector(data.n_sites, masks, full[masks], max_order)
    if data.n_sites <= pbf.DEFAULT_MAX_DENSE_SITES:
        return moments(data.to_table(), max_order, limit)
    if max_order is None:
        raise pbf.EnumerationLimitError(
            f"dense moments over {data.n_sites} sites exceed the enumeration "
            "limit; pass max_order to truncate"
        )
    masks = pbf.masks_up_to_order(data.n_sites, max_order, limit=data.n_sites)
    spins = data.samples.astype(np.float64)
    values = np.empty(len(masks))
    for j, mask in enumerate(masks):
        values[j] = np.prod(spins[:, pbf.subset_sites(int(mask))], axis=1).mean()
    return pbf.SubsetVector(data.n_sites, masks, values, max_order)


@dataclass(frozen=True)
class HigherOrderModel:
    """Spin model H(s) = -sum_I phi_I chi_I(s) with explicit couplings."""

    couplings: pbf.SubsetVector

    @property
    def n_sites(self) -> int:
        return self.couplings.n_sites

    @classmethod
    def from_dict(
        cls,
        n_sites: int,
        couplings: dict[int, float],
        max_order: int | None = None,
    ) -> "HigherOrderModel":
        return cls(pbf.SubsetVector.from_dict(n_sites, couplings, max_order))

    def energy(self, spins: np.ndarray) -> np.ndarray | float:
        """H(s) for one or many configurations."""
        return -pbf.evaluate_subset_expansion(self.couplings, spins)

    def energy_table(self, limit: int | None = None) -> np.ndarray:
        """H(s) on all configurations via the inverse transform."""
        pbf.check_dense_limit(self.n_sites, limit)
        spectrum = pbf.FourierSpectrum(self.n_sites, -self.couplings.dense_full())
        return pbf.inverse_transform(spectrum)

    def log_partition(self, limit: int | None = None) -> float:
        """ln Z = ln sum_s exp(-H(s)), computed stably."""
        return float(logsumexp(-self.energy_table(limit)))

    def distribution(self, limit: int | None = None) -> ProbabilityTable:
        """Boltzmann distribution p(s) = exp(-H(s)) / Z."""
        neg_energy = -self.energy_table(limit)
        log_p = neg_energy - logsumexp(neg_energy)
        return ProbabilityTable(self.n_sites, np.exp(log_p))

    def to_json(self) -> str:
        return json.dumps(
            {"kind": "higher_order_model", "couplings": json.loads(self.couplings.to_json())}
        )

    @classmethod
    def from_json(cls, text: str) -> "HigherOrderModel":
        obj = json.loads(text)
        if obj.get("kind") != "higher_order_model":
            raise ValueError(f"unexpected checkpoint kind {obj.get('kind')!r}")
        return cls(pbf.SubsetVector.from_json(json.dumps(obj["couplings"])))


def _moments_on_masks(data: DistributionHandle, masks: np.ndarray, n_sites: int) -> np.ndarray:
    """Data moments <chi_I> aligned onto an explicit mask set."""
    if isinstance(data, EmpiricalSamples) and data.n_sites > pbf.DEFAULT_MAX_DENSE_SITES:
        spins = data.samples.astype(np.float64)
        return np.asarray(
            [np.prod(spins[:, pbf.subset_sites(int(m))], axis=1).mean() for m in masks]
        )
    table = data.to_table() if isinstance(data, EmpiricalSamples) else data
    if table.n_sites != n_sites:
        raise ValueError(
            f"data over {table.n_sites} sites, model over {n_sites}"
        )
    return table.moments_full()[masks]


def neg_log_likelihood(model: HigherOrderModel, data: DistributionHandle) -> float:
    """Average negative log-likelihood -L = <H>_data + ln Z.

    Linear in the data's parity moments, so empirical sample sets and
    explicit tables use the same formula.
    """
    m_data = _moments_on_masks(data, model.couplings.masks, model.n_sites)
    return -float(np.dot(model.couplings.values, m_data)) + model.log_partition()


def nll_gradient(
    model: HigherOrderModel, data: DistributionHandle
) -> pbf.SubsetVector:
    """Gradient of -L with respect to each coupling: <chi_I>_model - <chi_I>_data."""
    masks = model.couplings.masks
    m_model = model.distribution().moments_full()[masks]
    m_data = _moments_on_masks(data, masks, model.n_sites)
    return pbf.SubsetVector(
        model.n_sites, masks, m_model - m_data, model.couplings.max_order
    )


def nll_hessian(model: HigherOrderModel, limit: int | None = 10) -> np.ndarray:
    """Hessian of -L: Cov_model(chi_I, chi_J) over the model's subsets.

    Uses chi_I chi_J = chi_{I xor J}; dense in the number of couplings,
    so the default site limit is stricter than for tables.
    """
    pbf.check_dense_limit(model.n_sites, limit)
    full = model.distribution(limit=limit).moments_full()
    masks = model.couplings.masks
    cross = full[np.bitwise_xor(masks[:, None], masks[None, :])]
    first = full[masks]
    return cross - np.outer(first, first)


def couplings_from_distribution(
    table: ProbabilityTable, limit: int | None = None
) -> HigherOrderModel:
    """Exact inverse problem for a strictly positive distribution.

    Reads couplings off the Fourier spectrum of ln p; the recovered model
    reproduces the table exactly.
    """
    if not table.strictly_positive:
        raise ValueError(
            "distribution has zero-probability configurations; its energy "
            "is unbounded and no finite coupling vector reproduces it"
        )
    spectrum = pbf.fast_transform(np.log(table.probs), table.n_sites, limit)
    masks = pbf.masks_up_to_order(table.n_sites, None, limit)
    couplings = pbf.SubsetVector(table.n_sites, masks, spectrum.coefficients[masks])
    return HigherOrderModel(couplings)


class ConvergenceError(RuntimeError):
    """Optimization failed to reach the requested tolerance."""

    def __init__(self, message: str, final_residual: float):
        super().__init__(message)
        self.final_residual = final_residual


@dataclass(frozen=True)
class FitConfig:
    """Settings for maximum-likelihood fitting.

    ``mode='backtracking'`` takes Barzilai-Borwein trial steps safeguarded
    by an Armijo line search, so accepted steps never increase the
    objective.  ``mode='fixed'`` performs plain gradient descent with a
    constant step, matching a forward-Euler discretization of gradient
    flow.  ``ridge_lambda`` adds (lambda/2) sum_I phi_I^2 to the objective.
    """

    tolerance: float = 1e-8
    max_iters: int = 100_000
    mode: str = "backtracking"
    step_size: float = 0.05
    max_order: int | None = None
    ridge_lambda: float = 0.0
    log_every: int = 50

    def __post_init__(self):
        if self.mode not in ("backtracking", "fixed"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be nonnegative")


@dataclass(frozen=True)
class FitResult:
    model: HigherOrderModel
    n_iters: int
    final_residual: float
    trajectory: "np.ndarray"
    trajectory_columns: tuple[str, ...]


def fit(
    data: DistributionHandle,
    config: FitConfig | None = None,
    initial: HigherOrderModel | None = None,
) -> FitResult:
    """Fit couplings by maximum likelihood (optionally ridge-regularized).

    The objective f(phi) = -phi . m_data + ln Z(phi) + (lambda/2) |phi|^2
    is convex; convergence is declared when the stationarity residual
    <chi>_model - <chi>_data + lambda phi has sup-norm below the tolerance.

    Raises
    ------
    ConvergenceError
        If the residual is still above tolerance after max_iters; the
        exception carries the final residual.
    ValueError
        If the data has zero-probability configurations and no ridge term
        is used (the unregularized optimum then runs to infinity).
    """
    config = config or FitConfig()
    if isinstance(data, EmpiricalSamples):
        table = data.to_table()
    else:
        table = data
    if config.ridge_lambda == 0.0 and not table.strictly_positive:
        raise ValueError(
            "data assigns zero probability to some configurations; the "
            "maximum-likelihood couplings diverge.  Use a ridge term "
            "(ridge_lambda > 0) or smooth the data"
        )
    n_sites = table.n_sites
    masks = pbf.masks_up_to_order(n_sites, config.max_order)
    m_data = table.moments_full()[masks]
    signs = pbf._mask_signs_cached(n_sites)
    size = 2**n_sites

    if initial is not None:
        if not np.array_equal(initial.couplings.masks, masks):
            raise ValueError("initial model couplings do not match the fit masks")
        phi = initial.couplings.values.copy()
    else:
        phi = np.zeros(len(masks))

    lam = config.ridge_lambda
    max_track = min(3, n_sites)
    order_idx = [np.flatnonzero(pbf.subset_order(masks) == n) for n in range(1, max_track + 1)]

    def objective_and_grad(phi_vec):
        full = np.zeros(size)
        full[masks] = phi_vec
        neg_energy = pbf.fwht(signs * full)  # sum_I phi_I chi_I on each config
        shift = np.max(neg_energy)
        weights = np.exp(neg_energy - shift)
        z = weights.sum()
        log_z = float(np.log(z) + shift)
        p = weights / z
        m_model = (signs * pbf.fwht(p))[masks]
        obj = -float(np.dot(phi_vec, m_data)) + log_z + 0.5 * lam * float(
            np.dot(phi_vec, phi_vec)
        )
        grad = m_model - m_data + lam * phi_vec
        return obj, grad, m_model, log_z

    rows = []
    sim_time = 0.0

    def record(step, phi_vec, obj, grad, m_model, log_z):
        loglik = float(np.dot(phi_vec, m_data)) - log_z
        row = [step, sim_time, loglik, float(np.max(np.abs(grad)))]
        for idx in order_idx:
            row.append(float(np.linalg.norm(phi_vec[idx])))
        for idx in order_idx:
            row.append(float(np.linalg.norm((m_data - m_model)[idx])))
        row.append(0.5 * lam * float(np.dot(phi_vec, phi_vec)))
        rows.append(row)

    columns = (
        ["step", "time", "loglik", "grad_norm"]
        + [f"frob_n{n}" for n in range(1, max_track + 1)]
        + [f"mismatch_n{n}" for n in range(1, max_track + 1)]
        + ["penalty"]
    )

    obj, grad, m_model, log_z = objective_and_grad(phi)
    record(0, phi, obj, grad, m_model, log_z)
    prev_phi = None
    prev_grad = None
    converged = float(np.max(np.abs(grad))) < config.tolerance
    step_count = 0

    while not converged and step_count < config.max_iters:
        if config.mode == "fixed":
            phi = phi - config.step_size * grad
            obj, grad, m_model, log_z = objective_and_grad(phi)
            sim_time += config.step_size
        else:
            if prev_phi is None:
                trial = config.step_size
            else:
                s = phi - prev_phi
                y = grad - prev_grad
                sy = float(np.dot(s, y))
                trial = float(np.dot(s, s)) / sy if sy > 0 else config.step_size
                trial = float(np.clip(trial, 1e-10, 1e4))
            prev_phi, prev_grad = phi, grad
            g_sq = float(np.dot(grad, grad))
            t = trial
            accepted = False
            for _ in range(60):
                cand = phi - t * grad
                cand_obj, cand_grad, cand_m, cand_log_z = objective_and_grad(cand)
                if cand_obj <= obj - 1e-4 * t * g_sq:
                    accepted = True
                    break
                t *= 0.5
            if not accepted and cand_obj >= obj:
                # objective changes are below float resolution: stop here
                break
            phi, obj, grad, m_model, log_z = cand, cand_obj, cand_grad, cand_m, cand_log_z
            sim_time += t
        step_count += 1
        if step_count % config.log_every == 0:
            record(step_count, phi, obj, grad, m_model, log_z)
        converged = float(np.max(np.abs(grad))) < config.tolerance

    if rows[-1][0] != step_count:
        record(step_count, phi, obj, grad, m_model, log_z)

    residual = float(np.max(np.abs(grad)))
    model = HigherOrderModel(
        pbf.SubsetVector(n_sites, masks, phi, config.max_order)
    )
    if not converged:
        raise ConvergenceError(
            f"no convergence after {step_count} iterations; stationarity "
            f"residual sup-norm {residual:.3e} exceeds tolerance "
            f"{config.tolerance:.3e}",
            residual,
        )
    return FitResult(model, step_count, residual, np.asarray(rows), tuple(columns))
