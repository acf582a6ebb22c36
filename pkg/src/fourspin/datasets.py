"""Synthetic spin datasets and ground-truth model constructions.

The central benchmark is a periodic chain of three-body interactions,

    H(s) = -beta * sum_i s_i s_{i+1} s_{i+2}    (indices mod N),

whose Boltzmann distribution has zero magnetizations and no pairwise terms
in the energy, yet exhibits nonzero pair correlations; learning it requires
genuinely third-order couplings.  Additional generators cover random
pairwise models, sparse fixed-order models, and product distributions.

Samples are drawn either exactly from the enumerated table or by
single-spin-flip Metropolis for sizes beyond enumeration.  Datasets persist
as one configuration of space-separated +-1 integers per line, with a JSON
sidecar carrying the generating config and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pbf
from .hobm import DistributionHandle, EmpiricalSamples, HigherOrderModel, ProbabilityTable


def three_body_chain(n_sites: int, beta: float) -> HigherOrderModel:
    """Periodic three-body chain with coupling beta on every cyclic triplet.

    Cyclic triplets that coincide as sets accumulate: at N=3 all three
    wrap onto the single subset {0,1,2} with total coupling 3*beta.
    """
    if n_sites < 3:
        raise ValueError(f"the chain needs at least 3 sites, got {n_sites}")
    if not math.isfinite(beta):
        raise ValueError("beta must be finite")
    couplings: dict[int, float] = {}
    if beta != 0.0:
        for i in range(n_sites):
            mask = (1 << i) | (1 << ((i + 1) % n_sites)) | (1 << ((i + 2) % n_sites))
            couplings[mask] = couplings.get(mask, 0.0) + beta
    return HigherOrderModel.from_dict(n_sites, couplings)


def pairwise_random(n_sites: int, beta: float, seed: int) -> HigherOrderModel:
    """Random fields and pair couplings, each drawn from N(0, beta^2)."""
    rng = np.random.default_rng(seed)
    couplings: dict[int, float] = {}
    for i in range(n_sites):
        couplings[1 << i] = beta * rng.standard_normal()
        for j in range(i + 1, n_sites):
            couplings[(1 << i) | (1 << j)] = beta * rng.standard_normal()
    return HigherOrderModel.from_dict(n_sites, couplings, max_order=2)


def sparse_random(
    n_sites: int, order: int, density: float, beta: float, seed: int
) -> HigherOrderModel:
    """A random fraction of the order-n subsets, couplings from N(0, beta^2)."""
    if not 1 <= order <= n_sites:
        raise ValueError(f"order must be within 1..{n_sites}, got {order}")
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    masks = pbf.masks_up_to_order(n_sites)
    masks = masks[pbf.subset_order(masks) == order]
    count = max(1, int(round(density * len(masks))))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(masks, size=count, replace=False)
    values = beta * rng.standard_normal(count)
    return HigherOrderModel.from_dict(
        n_sites, {int(m): float(v) for m, v in zip(chosen, values)}, max_order=order
    )


def product_model(magnetizations: np.ndarray) -> HigherOrderModel:
    """Independent sites with the given means: fields arctanh(m_i) only."""
    mags = np.asarray(magnetizations, dtype=np.float64)
    if np.any(np.abs(mags) >= 1):
        raise ValueError("magnetizations must lie strictly inside (-1, 1)")
    couplings = {1 << i: float(np.arctanh(m)) for i, m in enumerate(mags)}
    return HigherOrderModel.from_dict(len(mags), couplings, max_order=1)


def sample_exact(model: HigherOrderModel, n_samples: int, seed: int) -> EmpiricalSamples:
    """i.i.d. draws from the enumerated Boltzmann table."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    try:
        table = model.distribution()
    except pbf.EnumerationLimitError as err:
        raise pbf.EnumerationLimitError(
            f"{err}; use sample_mcmc for sizes beyond enumeration"
        ) from err
    return table.sample(n_samples, seed)


def sample_mcmc(
    model: HigherOrderModel,
    n_samples: int,
    sweeps: int,
    seed: int,
    n_chains: int = 64,
    burn_in: int | None = None,
) -> EmpiricalSamples:
    """Metropolis single-spin-flip sampling of the Boltzmann distribution.

    Runs ``n_chains`` chains in parallel; after ``burn_in`` sweeps
    (default 100 + 10*sweeps), every chain contributes one configuration
    each ``sweeps`` sweeps, in fixed chain order, until ``n_samples`` rows
    are collected.  One sweep attempts one flip per site.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    n_sites = model.n_sites
    n_chains = min(n_chains, n_samples)
    if burn_in is None:
        burn_in = 100 + 10 * sweeps
    rng = np.random.default_rng(seed)
    # per-site coupling lists: flipping site i negates chi_I for I containing i
    per_site: list[list[tuple[float, np.ndarray]]] = [[] for _ in range(n_sites)]
    for mask, value in zip(model.couplings.masks, model.couplings.values):
        sites = pbf.subset_sites(int(mask))
        for i in sites:
            per_site[int(i)].append((float(value), sites))
    states = rng.integers(0, 2, size=(n_chains, n_sites)).astype(np.float64) * 2.0 - 1.0

    def sweep_once():
        for i in range(n_sites):
            if per_site[i]:
                delta = np.zeros(n_chains)
                for value, sites in per_site[i]:
                    delta += 2.0 * value * np.prod(states[:, sites], axis=1)
            else:
                delta = np.zeros(n_chains)
            # Metropolis rule for Delta H = delta under p ~ exp(-H)
            accept = np.log(rng.random(n_chains)) < -delta
            states[accept, i] *= -1.0

    for _ in range(burn_in):
        sweep_once()
    rows = []
    collected = 0
    while collected < n_samples:
        take = min(n_chains, n_samples - collected)
        rows.append(states[:take].copy())
        collected += take
        if collected < n_samples:
            for _ in range(sweeps):
                sweep_once()
    return EmpiricalSamples(n_sites, np.concatenate(rows).astype(np.int8))


def covariance_matrix(data: DistributionHandle) -> np.ndarray:
    """Pair covariance C_ij = <s_i s_j> - <s_i><s_j>; diagonal 1 - <s_i>^2."""
    if isinstance(data, ProbabilityTable):
        full = data.moments_full()
        n = data.n_sites
        mags = np.asarray([full[1 << i] for i in range(n)])
        second = np.empty((n, n))
        for i in range(n):
            second[i, i] = 1.0
            for j in range(i + 1, n):
                second[i, j] = second[j, i] = full[(1 << i) | (1 << j)]
        return second - np.outer(mags, mags)
    spins = data.samples.astype(np.float64)
    mags = spins.mean(axis=0)
    second = spins.T @ spins / data.n_samples
    np.fill_diagonal(second, 1.0)
    return second - np.outer(mags, mags)


def covariance_to_csv(matrix: np.ndarray) -> str:
    lines = [",".join(repr(float(v)) for v in row) for row in np.asarray(matrix)]
    return "\n".join(lines) + "\n"


def covariance_from_csv(text: str) -> np.ndarray:
    rows = [
        [float(v) for v in line.split(",")]
        for line in text.splitlines()
        if line.strip()
    ]
    return np.asarray(rows)


def save_samples(
    samples: EmpiricalSamples, path: str | Path, metadata: dict | None = None
) -> None:
    """Write one +-1 configuration per line, plus a JSON sidecar."""
    path = Path(path)
    lines = [" ".join(str(int(v)) for v in row) for row in samples.samples]
    path.write_text("\n".join(lines) + "\n")
    sidecar = {"n_sites": samples.n_sites, "n_samples": samples.n_samples}
    if metadata:
        sidecar.update(metadata)
    path.with_name(path.name + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
    )


def load_samples(path: str | Path) -> EmpiricalSamples:
    path = Path(path)
    rows = [
        [int(v) for v in line.split()]
        for line in path.read_text().splitlines()
        if line.strip()
    ]
    if not rows:
        raise ValueError(f"no configurations found in {path}")
    return EmpiricalSamples(len(rows[0]), np.asarray(rows, dtype=np.int8))


def load_sidecar(path: str | Path) -> dict:
    return json.loads(Path(path).with_name(Path(path).name + ".json").read_text())


@dataclass(frozen=True)
class DatasetConfig:
    """Declarative dataset description, mirrored in experiment config files."""

    n_sites: int = 12
    beta: float = 0.5
    n_samples: int = 10_000
    seed: int = 0
    generator: str = "three_body_chain"
    sampler: str = "exact"
    sweeps: int = 10
    order: int = 3
    density: float = 0.5
    magnetizations: tuple[float, ...] = ()

    _GENERATORS = ("three_body_chain", "pairwise_random", "sparse_random", "product")

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("dataset.n_samples must be at least 1")
        if not math.isfinite(self.beta):
            raise ValueError("dataset.beta must be finite")
        if self.generator not in self._GENERATORS:
            raise ValueError(
                f"dataset.generator must be one of {self._GENERATORS}, got "
                f"{self.generator!r}"
            )
        if self.sampler not in ("exact", "mcmc"):
            raise ValueError(f"dataset.sampler must be exact or mcmc, got {self.sampler!r}")

    def build_model(self) -> HigherOrderModel:
        if self.generator == "three_body_chain":
            return three_body_chain(self.n_sites, self.beta)
        if self.generator == "pairwise_random":
            return pairwise_random(self.n_sites, self.beta, self.seed)
        if self.generator == "sparse_random":
            return sparse_random(self.n_sites, self.order, self.density, self.beta, self.seed)
        return product_model(np.asarray(self.magnetizations))

    def generate(self) -> EmpiricalSamples:
        model = self.build_model()
        if self.sampler == "exact":
            return sample_exact(model, self.n_samples, self.seed)
        return sample_mcmc(model, self.n_samples, self.sweeps, self.seed)

    def to_dict(self) -> dict:
        out = {
            "n_sites": self.n_sites,
            "beta": self.beta,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "generator": self.generator,
            "sampler": self.sampler,
            "sweeps": self.sweeps,
        }
        if self.generator == "sparse_random":
            out["order"] = self.order
            out["density"] = self.density
        if self.generator == "product":
            out["magnetizations"] = list(self.magnetizations)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetConfig":
        known = {
            "n_sites", "beta", "n_samples", "seed", "generator", "sampler",
            "sweeps", "order", "density", "magnetizations",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown dataset config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "magnetizations" in kwargs:
            kwargs["magnetizations"] = tuple(kwargs["magnetizations"])
        return cls(**kwargs)
