"""Restricted Boltzmann machines over visible spins, and their effective couplings.

With visible spins s in {-1,+1}^Nv and hidden spins h in {-1,+1}^Nh traced
out, the visible marginal is p(s) proportional to exp(G(s)) with log-weight

    G(s) = sum_a ln cosh( sum_i w_ia s_i + zeta_a ) + sum_i eta_i s_i

up to an additive constant.  G plays the role of minus the energy of an
equivalent fully visible model: expanding G in the parity basis gives
effective multi-body couplings phi_I = Ghat(I) for nonempty I, covering all
orders even though the RBM only has pairwise visible-hidden weights.

A common alternative parameterization uses binary units v = (s+1)/2 in
{0,1}; ``BinaryRbm`` implements it together with the exact parameter map
between the two conventions (the two marginals are equal configuration by
configuration).

Parameter vector order used throughout: weights row-major (site i major,
hidden a minor), then hidden biases, then visible fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

from . import pbf
from .hobm import DistributionHandle, EmpiricalSamples, ProbabilityTable, site_magnetizations


def log_cosh(x: np.ndarray) -> np.ndarray:
    """ln cosh, stable for large |x|."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


@dataclass(frozen=True)
class SpinRbm:
    """RBM in the +-1 convention.

    Attributes
    ----------
    weights : ndarray, shape (n_visible, n_hidden)
    hidden_biases : ndarray, shape (n_hidden,)
    visible_fields : ndarray, shape (n_visible,)
    """

    weights: np.ndarray
    hidden_biases: np.ndarray
    visible_fields: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        zeta = np.ascontiguousarray(self.hidden_biases, dtype=np.float64)
        eta = np.ascontiguousarray(self.visible_fields, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        if zeta.shape != (w.shape[1],) or eta.shape != (w.shape[0],):
            raise ValueError(
                f"bias shapes {zeta.shape}, {eta.shape} do not match weights "
                f"{w.shape}"
            )
        for arr in (w, zeta, eta):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "hidden_biases", zeta)
        object.__setattr__(self, "visible_fields", eta)

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    @property
    def n_parameters(self) -> int:
        return self.n_visible * self.n_hidden + self.n_hidden + self.n_visible

    def log_weight(self, spins: np.ndarray) -> np.ndarray | float:
        """Log unnormalized probability G(s); the model energy is -G(s).

        Equals ln sum_h exp(s.w.h + zeta.h + eta.s) minus Nh ln 2.
        """
        spins = np.asarray(spins, dtype=np.float64)
        if spins.shape[-1] != self.n_visible:
            raise ValueError(
                f"configurations have {spins.shape[-1]} sites, model has "
                f"{self.n_visible}"
            )
        pre = spins @ self.weights + self.hidden_biases
        out = np.sum(log_cosh(pre), axis=-1) + spins @ self.visible_fields
        return float(out) if np.ndim(out) == 0 else out

    def log_weight_table(self, limit: int | None = None) -> np.ndarray:
        states = pbf.enumerate_states(self.n_visible, limit)
        return self.log_weight(states.astype(np.float64))

    def log_partition(self, limit: int | None = None) -> float:
        """ln sum_s exp(G(s))."""
        return float(logsumexp(self.log_weight_table(limit)))

    def distribution(self, limit: int | None = None) -> ProbabilityTable:
        g = self.log_weight_table(limit)
        log_p = g - logsumexp(g)
        return ProbabilityTable(self.n_visible, np.exp(log_p))

    def to_binary(self) -> "BinaryRbm":
        """Equivalent machine over v = (s+1)/2; exact, both directions."""
        w = self.weights
        weights = 4.0 * w
        hidden_biases = 2.0 * (self.hidden_biases - w.sum(axis=0))
        visible_biases = 2.0 * (self.visible_fields - w.sum(axis=1))
        return BinaryRbm(weights, hidden_biases, visible_biases)

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.weights.ravel(), self.hidden_biases, self.visible_fields]
        )

    @classmethod
    def from_vector(
        cls, theta: np.ndarray, n_visible: int, n_hidden: int
    ) -> "SpinRbm":
        theta = np.asarray(theta, dtype=np.float64)
        nw = n_visible * n_hidden
        if theta.shape != (nw + n_hidden + n_visible,):
            raise ValueError(
                f"parameter vector has shape {theta.shape}, expected "
                f"({nw + n_hidden + n_visible},)"
            )
        return cls(
            theta[:nw].reshape(n_visible, n_hidden),
            theta[nw : nw + n_hidden],
            theta[nw + n_hidden :],
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "rbm",
                "convention": "spin",
                "n_visible": self.n_visible,
                "n_hidden": self.n_hidden,
                "weights": self.weights.tolist(),
                "hidden_biases": self.hidden_biases.tolist(),
                "visible_fields": self.visible_fields.tolist(),
            }
        )


@dataclass(frozen=True)
class BinaryRbm:
    """RBM in the {0,1} convention with marginal energy

    E(v) = -sum_i b_i v_i - sum_a ln(1 + exp(c_a + sum_i W_ia v_i)),

    and p(v) proportional to exp(-E(v)).
    """

    weights: np.ndarray
    hidden_biases: np.ndarray
    visible_biases: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64)
        c = np.ascontiguousarray(self.hidden_biases, dtype=np.float64)
        b = np.ascontiguousarray(self.visible_biases, dtype=np.float64)
        if w.ndim != 2 or c.shape != (w.shape[1],) or b.shape != (w.shape[0],):
            raise ValueError("inconsistent parameter shapes")
        for arr in (w, c, b):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "hidden_biases", c)
        object.__setattr__(self, "visible_biases", b)

    @property
    def n_visible(self) -> int:
        return self.weights.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.weights.shape[1]

    def marginal_energy(self, visibles: np.ndarray) -> np.ndarray | float:
        """Energy of a {0,1} configuration after tracing out hidden units."""
        v = np.asarray(visibles, dtype=np.float64)
        if v.shape[-1] != self.n_visible:
            raise ValueError(
                f"configurations have {v.shape[-1]} units, model has "
                f"{self.n_visible}"
            )
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("binary units must take values in {0, 1}")
        act = v @ self.weights + self.hidden_biases
        # ln(1+e^x) = max(x,0) + log1p(exp(-|x|)), stable both ways
        softplus = np.maximum(act, 0.0) + np.log1p(np.exp(-np.abs(act)))
        out = -v @ self.visible_biases - np.sum(softplus, axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def to_spin(self) -> SpinRbm:
        """Equivalent machine over s = 2v - 1; exact, both directions."""
        weights = self.weights / 4.0
        hidden_biases = self.hidden_biases / 2.0 + self.weights.sum(axis=0) / 4.0
        visible_fields = self.visible_biases / 2.0 + self.weights.sum(axis=1) / 4.0
        return SpinRbm(weights, hidden_biases, visible_fields)

    def distribution(self, limit: int | None = None) -> ProbabilityTable:
        """Marginal over configurations, indexed like the spin convention.

        Index k corresponds to v_i = 1 exactly when bit i of k is set,
        matching s_i = +1 under s = 2v - 1.
        """
        states = pbf.enumerate_states(self.n_visible, limit)
        v = (states.astype(np.float64) + 1.0) / 2.0
        neg_e = -self.marginal_energy(v)
        log_p = neg_e - logsumexp(neg_e)
        return ProbabilityTable(self.n_visible, np.exp(log_p))

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": "rbm",
                "convention": "binary",
                "n_visible": self.n_visible,
                "n_hidden": self.n_hidden,
                "weights": self.weights.tolist(),
                "hidden_biases": self.hidden_biases.tolist(),
                "visible_fields": self.visible_biases.tolist(),
            }
        )


def rbm_from_json(text: str) -> Union[SpinRbm, BinaryRbm]:
    obj = json.loads(text)
    if obj.get("kind") != "rbm":
        raise ValueError(f"unexpected checkpoint kind {obj.get('kind')!r}")
    w = np.asarray(obj["weights"], dtype=np.float64)
    hb = np.asarray(obj["hidden_biases"], dtype=np.float64)
    vf = np.asarray(obj["visible_fields"], dtype=np.float64)
    if obj["convention"] == "spin":
        return SpinRbm(w, hb, vf)
    if obj["convention"] == "binary":
        return BinaryRbm(w, hb, vf)
    raise ValueError(f"unknown convention {obj['convention']!r}")


def initialize(
    n_visible: int,
    n_hidden: int,
    seed: int,
    weight_std: float = 1e-2,
) -> SpinRbm:
    """Near-uniform starting point: zero biases, small Gaussian weights."""
    if weight_std < 0:
        raise ValueError("weight_std must be nonnegative")
    rng = np.random.default_rng(seed)
    weights = weight_std * rng.standard_normal((n_visible, n_hidden))
    return SpinRbm(weights, np.zeros(n_hidden), np.zeros(n_visible))


def spurious_point(data: DistributionHandle, n_hidden: int) -> SpinRbm:
    """Rank-one stationary point built from the data magnetizations.

    With zero weights and hidden biases, the model factorizes over sites;
    setting eta_i = arctanh(<s_i>_data) matches every magnetization, which
    makes the likelihood gradient vanish even though higher-order data
    structure is ignored.
    """
    mags = site_magnetizations(data)
    if np.any(np.abs(mags) >= 1):
        raise ValueError(
            "a site is fully polarized (|<s_i>| = 1); arctanh diverges"
        )
    n_visible = len(mags)
    return SpinRbm(
        np.zeros((n_visible, n_hidden)), np.zeros(n_hidden), np.arctanh(mags)
    )


@dataclass(frozen=True)
class RbmGradient:
    """A parameter-shaped tangent vector (same blocks as SpinRbm)."""

    weights: np.ndarray
    hidden_biases: np.ndarray
    visible_fields: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.weights.ravel(), self.hidden_biases, self.visible_fields]
        )

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.to_vector())))

    @classmethod
    def from_vector(
        cls, vec: np.ndarray, n_visible: int, n_hidden: int
    ) -> "RbmGradient":
        nw = n_visible * n_hidden
        return cls(
            vec[:nw].reshape(n_visible, n_hidden),
            vec[nw : nw + n_hidden],
            vec[nw + n_hidden :],
        )


def _phase(rbm: SpinRbm, spins: np.ndarray, weights: np.ndarray | None = None) -> RbmGradient:
    """Expectation of grad_theta G over configurations with given weights."""
    spins = np.asarray(spins, dtype=np.float64)
    tanh_pre = np.tanh(spins @ rbm.weights + rbm.hidden_biases)
    if weights is None:
        m = len(spins)
        g_w = spins.T @ tanh_pre / m
        g_zeta = tanh_pre.mean(axis=0)
        g_eta = spins.mean(axis=0)
    else:
        g_w = spins.T @ (weights[:, None] * tanh_pre)
        g_zeta = weights @ tanh_pre
        g_eta = weights @ spins
    return RbmGradient(g_w, g_zeta, g_eta)


def neg_log_likelihood(rbm: SpinRbm, data: DistributionHandle) -> float:
    """-L = -<G(s)>_data + ln Z, by exact enumeration of the partition sum."""
    if isinstance(data, ProbabilityTable):
        data_term = float(np.dot(data.probs, rbm.log_weight_table()))
    else:
        data_term = float(np.mean(rbm.log_weight(data.samples.astype(np.float64))))
    return -data_term + rbm.log_partition()


def nll_gradient_exact(rbm: SpinRbm, data: DistributionHandle) -> RbmGradient:
    """Exact gradient of -L in theta: <grad G>_model - <grad G>_data."""
    states = pbf.enumerate_states(rbm.n_visible).astype(np.float64)
    model = _phase(rbm, states, rbm.distribution().probs)
    if isinstance(data, ProbabilityTable):
        if data.n_sites != rbm.n_visible:
            raise ValueError("data and model have different numbers of sites")
        pos = _phase(rbm, states, data.probs)
    else:
        pos = _phase(rbm, data.samples)
    return RbmGradient(
        model.weights - pos.weights,
        model.hidden_biases - pos.hidden_biases,
        model.visible_fields - pos.visible_fields,
    )


def gradient_feature_table(rbm: SpinRbm, limit: int | None = None) -> np.ndarray:
    """grad_theta G(s) for every configuration, shape (2**Nv, n_parameters).

    Column order matches ``SpinRbm.to_vector``.
    """
    states = pbf.enumerate_states(rbm.n_visible, limit).astype(np.float64)
    tanh_pre = np.tanh(states @ rbm.weights + rbm.hidden_biases)
    n_cfg = len(states)
    # d/dw_ia = s_i tanh(pre_a): outer product per configuration
    dw = states[:, :, None] * tanh_pre[:, None, :]
    return np.concatenate(
        [dw.reshape(n_cfg, -1), tanh_pre, states], axis=1
    )


def weighted_hessian_log_weight(rbm: SpinRbm, weights: np.ndarray) -> np.ndarray:
    """sum_k weights_k * hess_theta G(s_k), shape (P, P).

    Second derivatives of G touch only the (w, zeta) blocks:
    d2G/dw_ia dw_jb = delta_ab s_i s_j sech^2(pre_a), and similarly with
    s factors dropped for zeta; eta rows are zero.
    """
    states = pbf.enumerate_states(rbm.n_visible).astype(np.float64)
    if weights.shape != (len(states),):
        raise ValueError("need one weight per configuration")
    nv, nh = rbm.n_visible, rbm.n_hidden
    p = rbm.n_parameters
    sech2 = 1.0 - np.tanh(states @ rbm.weights + rbm.hidden_biases) ** 2
    wsech = weights[:, None] * sech2  # (2^N, nh)
    out = np.zeros((p, p))
    zeta_off = nv * nh
    for a in range(nh):
        w_idx = np.arange(nv) * nh + a
        block = states.T @ (wsech[:, a, None] * states)  # (nv, nv)
        out[np.ix_(w_idx, w_idx)] = block
        cross = states.T @ wsech[:, a]  # (nv,)
        out[w_idx, zeta_off + a] = cross
        out[zeta_off + a, w_idx] = cross
        out[zeta_off + a, zeta_off + a] = wsech[:, a].sum()
    return out


def nll_hessian_exact(rbm: SpinRbm, data: DistributionHandle) -> np.ndarray:
    """Exact Hessian of -L in theta by enumeration.

    hess(-L) = <hess G>_model - <hess G>_data + Cov_model(grad G); the
    covariance term alone is the positive semi-definite sandwich that
    remains at a data-consistent point.
    """
    p_model = rbm.distribution().probs
    if isinstance(data, ProbabilityTable):
        if data.n_sites != rbm.n_visible:
            raise ValueError("data and model have different numbers of sites")
        p_data = data.probs
    else:
        p_data = data.to_table().probs
    features = gradient_feature_table(rbm)
    mean = p_model @ features
    cov = features.T @ (p_model[:, None] * features) - np.outer(mean, mean)
    return (
        weighted_hessian_log_weight(rbm, p_model)
        - weighted_hessian_log_weight(rbm, p_data)
        + cov
    )


def extract_couplings_exact(
    rbm: SpinRbm, max_order: int | None = None, limit: int | None = None
) -> pbf.SubsetVector:
    """Effective couplings phi_I = Ghat(I) via the fast transform of G."""
    spectrum = pbf.fast_transform(rbm.log_weight_table(limit))
    masks = pbf.masks_up_to_order(rbm.n_visible, max_order, limit)
    return pbf.SubsetVector(
        rbm.n_visible, masks, spectrum.coefficients[masks], max_order
    )


def coupling_jacobian(
    rbm: SpinRbm, max_order: int | None = None, limit: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Jacobian d phi_I / d theta_a of the coupling map.

    Returns (masks, jac) with jac[r, a] the derivative of the coupling on
    masks[r].  Row r is the Fourier spectrum of the feature
    dG/dtheta_a restricted to mask r, computed by transforming all feature
    columns at once.
    """
    features = gradient_feature_table(rbm, limit)
    transformed = pbf.fwht(features, axis=0)
    signs = pbf._mask_signs_cached(rbm.n_visible)
    spectra = signs[:, None] * transformed / len(features)
    masks = pbf.masks_up_to_order(rbm.n_visible, max_order, limit)
    return masks, spectra[masks, :]


def extract_coupling_formula(
    rbm: SpinRbm,
    mask: int,
    mode: str = "exact",
    n_samples: int | None = None,
    seed: int | None = None,
    return_stderr: bool = False,
) -> float | tuple[float, float]:
    """Coupling on one subset directly from the weights.

    Averages, over the spins outside the subset, the projection of the
    ln cosh terms onto the subset parity:

        phi_I = 2**-|I| E_rest sum_a sum_{sigma in {-1,1}^I}
                chi_I(sigma) ln cosh( sum_{j in I} w_ja sigma_j + X_a + zeta_a ),

    where X_a collects the weighted spins outside I.  The visible field
    eta_i adds to the order-1 coupling.  ``mode='exact'`` enumerates the
    outside spins; ``mode='monte_carlo'`` samples them uniformly, using
    the same draws for all 2**|I| subset assignments.
    """
    n_visible = rbm.n_visible
    pbf._check_mask(mask, n_visible)
    if mask == 0:
        raise ValueError("the empty set carries no coupling")
    sites = pbf.subset_sites(mask)
    order = len(sites)
    rest = np.asarray(
        [i for i in range(n_visible) if i not in set(sites.tolist())], dtype=np.int64
    )
    sub_states = pbf.enumerate_states(order).astype(np.float64)
    chi = np.prod(sub_states, axis=1)
    offsets = sub_states @ rbm.weights[sites, :]  # (2^order, n_hidden)

    if mode == "exact":
        if len(rest) > 0:
            pbf.check_dense_limit(len(rest))
            rest_states = pbf.enumerate_states(len(rest)).astype(np.float64)
            outside = rest_states @ rbm.weights[rest, :]
        else:
            outside = np.zeros((1, rbm.n_hidden))
    elif mode == "monte_carlo":
        if not n_samples or n_samples < 1:
            raise ValueError("monte_carlo mode needs n_samples >= 1")
        if seed is None:
            raise ValueError("monte_carlo mode needs an explicit seed")
        rng = np.random.default_rng(seed)
        draws = rng.integers(0, 2, size=(n_samples, len(rest))) * 2.0 - 1.0
        outside = draws @ rbm.weights[rest, :]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    # per outside-draw estimate: (R,) after contracting patterns and units
    terms = log_cosh(
        outside[:, None, :] + offsets[None, :, :] + rbm.hidden_biases
    )
    per_draw = (chi[None, :, None] * terms).sum(axis=(1, 2)) / 2.0**order
    value = float(per_draw.mean())
    if order == 1:
        value += float(rbm.visible_fields[sites[0]])
    if mode == "monte_carlo" and return_stderr:
        if len(per_draw) < 2:
            raise ValueError("standard error needs at least two samples")
        stderr = float(per_draw.std(ddof=1) / np.sqrt(len(per_draw)))
        return value, stderr
    return value


@dataclass(frozen=True)
class SamplerConfig:
    """Parallel tempering settings for sampling the visible marginal.

    Runs ``n_chains`` independent replicas at each inverse temperature,
    alternating block Gibbs sweeps on (s, h) with nearest-neighbor replica
    swaps.  ``temperatures`` must decrease strictly to 1.0; the default is
    a geometric ladder from ``max_temperature``.
    """

    n_chains: int = 64
    n_sweeps: int = 200
    seed: int = 0
    n_temperatures: int = 6
    max_temperature: float = 8.0
    temperatures: tuple[float, ...] | None = None

    def ladder(self) -> np.ndarray:
        if self.temperatures is not None:
            ladder = np.asarray(self.temperatures, dtype=np.float64)
        else:
            ladder = np.geomspace(self.max_temperature, 1.0, self.n_temperatures)
        if ladder[-1] != 1.0:
            raise ValueError("temperature ladder must end at 1.0")
        if len(ladder) > 1 and np.any(np.diff(ladder) >= 0):
            raise ValueError("temperatures must decrease strictly")
        return ladder

    def __post_init__(self):
        if self.n_chains < 1 or self.n_sweeps < 0:
            raise ValueError("n_chains must be >= 1 and n_sweeps >= 0")
        self.ladder()


def sample_model(rbm: SpinRbm, config: SamplerConfig) -> np.ndarray:
    """Visible samples from the RBM, one row per chain, values in {-1,+1}.

    Deterministic given the seed: all randomness flows through one
    generator and chains are vectorized in fixed order.
    """
    rng = np.random.default_rng(config.seed)
    ladder = config.ladder()
    betas = 1.0 / ladder
    n_t = len(ladder)
    shape_v = (config.n_chains, n_t, rbm.n_visible)
    shape_h = (config.n_chains, n_t, rbm.n_hidden)
    spins = rng.integers(0, 2, size=shape_v).astype(np.float64) * 2.0 - 1.0
    hiddens = rng.integers(0, 2, size=shape_h).astype(np.float64) * 2.0 - 1.0

    def joint_weight(s, h):
        # U(s, h) = s.w.h + zeta.h + eta.s per (chain, temperature)
        coupling = np.einsum("ctv,va,cta->ct", s, rbm.weights, h)
        return coupling + h @ rbm.hidden_biases + s @ rbm.visible_fields

    for sweep in range(config.n_sweeps):
        pre_h = np.einsum("ctv,va->cta", spins, rbm.weights) + rbm.hidden_biases
        p_h = 1.0 / (1.0 + np.exp(-2.0 * betas[None, :, None] * pre_h))
        hiddens = np.where(rng.random(shape_h) < p_h, 1.0, -1.0)
        pre_v = np.einsum("cta,va->ctv", hiddens, rbm.weights) + rbm.visible_fields
        p_v = 1.0 / (1.0 + np.exp(-2.0 * betas[None, :, None] * pre_v))
        spins = np.where(rng.random(shape_v) < p_v, 1.0, -1.0)
        if n_t == 1:
            continue
        u = joint_weight(spins, hiddens)
        start = sweep % 2
        for t in range(start, n_t - 1, 2):
            log_acc = (betas[t] - betas[t + 1]) * (u[:, t + 1] - u[:, t])
            swap = np.log(rng.random(config.n_chains)) < log_acc
            spins[swap, t, :], spins[swap, t + 1, :] = (
                spins[swap, t + 1, :].copy(),
                spins[swap, t, :].copy(),
            )
            hiddens[swap, t, :], hiddens[swap, t + 1, :] = (
                hiddens[swap, t + 1, :].copy(),
                hiddens[swap, t, :].copy(),
            )
            u[swap, t], u[swap, t + 1] = u[swap, t + 1].copy(), u[swap, t].copy()
    return spins[:, -1, :].astype(np.int8)


def nll_gradient_sampled(
    rbm: SpinRbm,
    data: DistributionHandle | np.ndarray,
    config: SamplerConfig,
) -> RbmGradient:
    """Stochastic gradient of -L with the model phase from parallel tempering.

    The data phase is averaged over the given batch exactly; only the model
    expectation is sampled, so the estimator is unbiased in the limit of an
    equilibrated sampler.
    """
    if isinstance(data, np.ndarray):
        data = EmpiricalSamples(rbm.n_visible, data)
    model_samples = sample_model(rbm, config).astype(np.float64)
    model = _phase(rbm, model_samples)
    if isinstance(data, ProbabilityTable):
        states = pbf.enumerate_states(rbm.n_visible).astype(np.float64)
        pos = _phase(rbm, states, data.probs)
    else:
        pos = _phase(rbm, data.samples)
    return RbmGradient(
        model.weights - pos.weights,
        model.hidden_biases - pos.hidden_biases,
        model.visible_fields - pos.visible_fields,
    )
