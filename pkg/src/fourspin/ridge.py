"""l2 regularization of energy-based models in effective-coupling space.

By Parseval's identity on the Boolean cube, the sum of squared effective
couplings of an energy E equals the variance of E under the uniform
distribution,

    sum_{I nonempty} phi_I**2 = Var_{s ~ uniform}[E(s)],

so the coupling-space penalty can be evaluated, and differentiated in the
raw parameters theta, without expanding the spectrum: its theta-gradient is
Cov_uniform(E, dE/dtheta).  The regularized loss -L + (lambda/2) sum phi^2
shifts the data-consistent fixed-point condition to

    <chi_I>_data = <chi_I>_model + lambda phi_I

and stabilizes the Hessian sandwich to J^T [Cov_model + lambda I] J.

A penalty on the raw parameters (``space='parameter'``) is also offered,
labeled, for contrast experiments: it does not produce the modified moment
condition above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pbf, rbm as rbm_mod
from .hobm import DistributionHandle, HigherOrderModel, _moments_on_masks


@dataclass(frozen=True)
class RidgeConfig:
    """Penalty coefficient and estimator mode.

    ``mode='exact'`` enumerates (or uses Parseval directly);
    ``mode='stochastic'`` draws ``n_samples`` uniform configurations with an
    explicit seed and applies the unbiased (n-1)-denominator estimators.
    ``space='coupling'`` penalizes sum phi^2; ``space='parameter'`` is the
    plain l2 penalty on theta, kept for comparison only.
    """

    lam: float = 1e-4
    mode: str = "exact"
    n_samples: int = 10_000
    seed: int = 0
    space: str = "coupling"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.mode not in ("exact", "stochastic"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.space not in ("coupling", "parameter"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.mode == "stochastic" and self.n_samples < 2:
            raise ValueError("stochastic mode needs n_samples >= 2")


def _uniform_energy_samples(
    model, n_samples: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform configurations and the model energy on them."""
    rng = np.random.default_rng(seed)
    n_sites = model.n_sites if isinstance(model, HigherOrderModel) else model.n_visible
    spins = rng.integers(0, 2, size=(n_samples, n_sites)) * 2.0 - 1.0
    if isinstance(model, HigherOrderModel):
        energies = np.asarray(model.energy(spins), dtype=np.float64)
    else:
        energies = -np.asarray(model.log_weight(spins), dtype=np.float64)
    return spins, energies


def penalty(model, config: RidgeConfig) -> float:
    """sum_{I nonempty} phi_I^2, evaluated per the config's mode and space.

    Exact coupling-space mode uses Parseval: for explicit couplings the sum
    is direct; for an RBM it is the uniform variance of the energy -G.
    """
    if config.space == "parameter":
        if isinstance(model, HigherOrderModel):
            return float(np.dot(model.couplings.values, model.couplings.values))
        theta = model.to_vector()
        return float(np.dot(theta, theta))
    if config.mode == "exact":
        if isinstance(model, HigherOrderModel):
            return float(np.dot(model.couplings.values, model.couplings.values))
        g = model.log_weight_table()
        return float(np.mean(g**2) - np.mean(g) ** 2)
    _, energies = _uniform_energy_samples(model, config.n_samples, config.seed)
    return float(np.var(energies, ddof=1))


def ridge_nll(model, data: DistributionHandle, config: RidgeConfig) -> float:
    """-L + (lambda/2) * penalty; finite on zero-mass data when lambda > 0."""
    if isinstance(model, HigherOrderModel):
        from .hobm import neg_log_likelihood
    else:
        from .rbm import neg_log_likelihood
    return neg_log_likelihood(model, data) + 0.5 * config.lam * penalty(model, config)


def _penalty_gradient(model, config: RidgeConfig):
    """Gradient of (1/2) * penalty in the model's own parameters."""
    if config.space == "parameter":
        if isinstance(model, HigherOrderModel):
            return model.couplings.values.copy()
        return model.to_vector()
    if isinstance(model, HigherOrderModel):
        # d/dphi of (1/2) sum phi^2, regardless of estimator mode
        return model.couplings.values.copy()
    # Cov_uniform(E, dE/dtheta) = Cov_uniform(G, grad G): both signs flip
    if config.mode == "exact":
        g = model.log_weight_table()
        features = rbm_mod.gradient_feature_table(model)
        return ((g - g.mean()) / len(g)) @ features
    spins, energies = _uniform_energy_samples(model, config.n_samples, config.seed)
    g = -energies
    tanh_pre = np.tanh(spins @ model.weights + model.hidden_biases)
    features = np.concatenate(
        [
            (spins[:, :, None] * tanh_pre[:, None, :]).reshape(len(spins), -1),
            tanh_pre,
            spins,
        ],
        axis=1,
    )
    g_centered = g - g.mean()
    f_centered = features - features.mean(axis=0)
    return (g_centered @ f_centered) / (len(g) - 1)


def ridge_gradient(model, data: DistributionHandle, config: RidgeConfig):
    """Gradient of the regularized loss in the model's own parameters.

    Returns a SubsetVector for explicit-coupling models and an RbmGradient
    for RBMs.  The coupling-space penalty contributes
    lambda * Cov_uniform(E, dE/dtheta).
    """
    pen_grad = config.lam * _penalty_gradient(model, config)
    if isinstance(model, HigherOrderModel):
        from .hobm import nll_gradient
        base = nll_gradient(model, data)
        return base.with_values(base.values + pen_grad)
    base = rbm_mod.nll_gradient_exact(model, data).to_vector() + pen_grad
    return rbm_mod.RbmGradient.from_vector(base, model.n_visible, model.n_hidden)


def effective_couplings(model, max_order: int | None = None) -> pbf.SubsetVector:
    """Coupling vector of either model kind, dense up to max_order."""
    if isinstance(model, HigherOrderModel):
        masks = pbf.masks_up_to_order(model.n_sites, max_order)
        full = model.couplings.dense_full()
        return pbf.SubsetVector(model.n_sites, masks, full[masks], max_order)
    return rbm_mod.extract_couplings_exact(model, max_order)


def ridge_fixed_point_residual(
    model, data: DistributionHandle, config: RidgeConfig
) -> pbf.SubsetVector:
    """<chi>_data - <chi>_model - lambda * phi on all tracked subsets.

    Vanishes at a converged coupling-space ridge optimum; the parameter-
    space penalty does not satisfy this condition.
    """
    if isinstance(model, HigherOrderModel):
        masks = model.couplings.masks
        n_sites = model.n_sites
        phi = model.couplings.values
        m_model = model.distribution().moments_full()[masks]
    else:
        coup = effective_couplings(model)
        masks, phi = coup.masks, coup.values
        n_sites = model.n_visible
        m_model = model.distribution().moments_full()[masks]
    m_data = _moments_on_masks(data, masks, n_sites)
    return pbf.SubsetVector(n_sites, masks, m_data - m_model - config.lam * phi)


def _penalty_hessian(model, config: RidgeConfig) -> np.ndarray:
    """Hessian of (1/2) * penalty in theta, by enumeration (RBM only)."""
    if config.space == "parameter":
        return np.eye(model.n_parameters)
    g = model.log_weight_table()
    features = rbm_mod.gradient_feature_table(model)
    n = len(g)
    f_mean = features.mean(axis=0)
    cov_ff = features.T @ features / n - np.outer(f_mean, f_mean)
    second = rbm_mod.weighted_hessian_log_weight(model, (g - g.mean()) / n)
    return cov_ff + second


@dataclass(frozen=True)
class RidgeHessianReport:
    """Eigenvalue summary of the stabilized Hessian at a ridge optimum."""

    eigenvalues: np.ndarray
    min_eigenvalue: float
    row_space_min_eigenvalue: float
    kernel_dimension: int
    max_sandwich_deviation: float


def ridge_hessian_check(
    model, data: DistributionHandle, config: RidgeConfig
) -> RidgeHessianReport:
    """Compare direct ridge Hessian against J^T [Cov + lambda I] J.

    At a converged coupling-space ridge optimum the two agree; eigenvalues
    restricted to the row space of J are strictly positive for lambda > 0.
    """
    if isinstance(model, HigherOrderModel):
        from .hobm import nll_hessian
        cov = nll_hessian(model)
        sandwich = cov + config.lam * np.eye(len(cov))
        direct = sandwich  # J is the identity for explicit couplings
        jac = np.eye(len(cov))
    else:
        masks, jac = rbm_mod.coupling_jacobian(model)
        full = model.distribution().moments_full()
        cross = full[np.bitwise_xor(masks[:, None], masks[None, :])]
        cov = cross - np.outer(full[masks], full[masks])
        sandwich = jac.T @ (cov + config.lam * np.eye(len(masks))) @ jac
        direct = rbm_mod.nll_hessian_exact(model, data) + config.lam * _penalty_hessian(
            model, config
        )
    deviation = float(np.max(np.abs(direct - sandwich)))
    eigvals, eigvecs = np.linalg.eigh(sandwich)
    row_norms = np.linalg.norm(jac @ eigvecs, axis=0)
    in_kernel = row_norms < 1e-8 * (1.0 + row_norms.max())
    outside = eigvals[~in_kernel]
    return RidgeHessianReport(
        eigenvalues=eigvals,
        min_eigenvalue=float(eigvals.min()),
        row_space_min_eigenvalue=float(outside.min()) if len(outside) else float("nan"),
        kernel_dimension=int(in_kernel.sum()),
        max_sandwich_deviation=deviation,
    )
