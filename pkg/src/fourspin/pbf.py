"""Fourier analysis of real functions on the Boolean cube {-1,+1}^N.

Every real function of N spins expands uniquely in the orthonormal parity
basis chi_I(s) = prod_{i in I} s_i over subsets I of the sites,

    f(s) = sum_I fhat(I) chi_I(s),   fhat(I) = 2**-N sum_s f(s) chi_I(s),

with the expectation taken over the uniform distribution on the cube.  This
module provides the basis, a fast Walsh-Hadamard transform and a slow
direct-summation reference, and the spectral functionals (per-order weights,
coordinate influences) used to analyse spin energies.

Conventions
-----------
* Subsets are encoded as integer bit masks: bit i set <=> site i in I.
* Configurations are indexed by integers: bit i of index k set <=> s_i = +1,
  so index 0 is the all-minus state.
* Dense spectra are float64 arrays of length 2**N indexed by subset mask.

Dense operations enumerate all 2**N configurations and refuse to run above
``DEFAULT_MAX_DENSE_SITES`` unless the caller raises the limit explicitly.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_MAX_DENSE_SITES = 20


class EnumerationLimitError(ValueError):
    """Raised when a dense operation would enumerate too many configurations."""


def check_dense_limit(n_sites: int, limit: int | None = None) -> None:
    """Validate that 2**n_sites configurations may be enumerated.

    Parameters
    ----------
    n_sites : int
        Number of spin sites.
    limit : int, optional
        Overrides ``DEFAULT_MAX_DENSE_SITES``.
    """
    if n_sites < 1:
        raise ValueError(f"need at least one site, got n_sites={n_sites}")
    cap = DEFAULT_MAX_DENSE_SITES if limit is None else limit
    if n_sites > cap:
        raise EnumerationLimitError(
            f"dense enumeration over {n_sites} sites exceeds the limit of "
            f"{cap}; pass an explicit limit to override"
        )


@lru_cache(maxsize=None)
def _states_cached(n_sites: int) -> np.ndarray:
    k = np.arange(2**n_sites, dtype=np.int64)
    bits = (k[:, None] >> np.arange(n_sites)) & 1
    states = (2 * bits - 1).astype(np.int8)
    states.setflags(write=False)
    return states


def enumerate_states(n_sites: int, limit: int | None = None) -> np.ndarray:
    """All spin configurations as a read-only (2**N, N) array of +-1.

    Row k holds the configuration with s_i = +1 exactly when bit i of k
    is set.
    """
    check_dense_limit(n_sites, limit)
    return _states_cached(n_sites)


def encode_states(spins: np.ndarray) -> np.ndarray:
    """Map +-1 configurations (..., N) to their integer indices."""
    spins = np.asarray(spins)
    n_sites = spins.shape[-1]
    bits = (spins > 0).astype(np.int64)
    weights = np.int64(1) << np.arange(n_sites, dtype=np.int64)
    return bits @ weights


@lru_cache(maxsize=None)
def _mask_signs_cached(n_sites: int) -> np.ndarray:
    orders = np.bitwise_count(np.arange(2**n_sites, dtype=np.uint64))
    signs = np.where(orders % 2 == 0, 1.0, -1.0)
    signs.setflags(write=False)
    return signs


def subset_order(mask: int | np.ndarray) -> int | np.ndarray:
    """Number of sites in the subset encoded by ``mask``."""
    if isinstance(mask, (int, np.integer)):
        return int(mask).bit_count()
    return np.bitwise_count(np.asarray(mask, dtype=np.uint64)).astype(np.int64)


def subset_sites(mask: int) -> np.ndarray:
    """Site indices contained in the subset encoded by ``mask``."""
    if mask < 0:
        raise ValueError(f"subset mask must be nonnegative, got {mask}")
    sites = [i for i in range(int(mask).bit_length()) if (mask >> i) & 1]
    return np.asarray(sites, dtype=np.int64)


def _check_mask(mask: int, n_sites: int) -> None:
    if not 0 <= mask < 2**n_sites:
        raise ValueError(
            f"subset mask {mask} out of range for {n_sites} sites "
            f"(need 0 <= mask < {2**n_sites})"
        )


def parity(spins: np.ndarray, mask: int) -> np.ndarray | float:
    """Parity chi_I(s) = prod_{i in I} s_i for one or many configurations.

    Parameters
    ----------
    spins : array_like
        Spin values in {-1, +1}, shape (..., N).
    mask : int
        Subset bit mask; the empty set gives identically 1.
    """
    spins = np.asarray(spins)
    n_sites = spins.shape[-1]
    _check_mask(mask, n_sites)
    if not np.all(np.abs(spins) == 1):
        raise ValueError("spins must take values in {-1, +1}")
    if mask == 0:
        out = np.ones(spins.shape[:-1])
        return float(out) if out.ndim == 0 else out
    prod = np.prod(spins[..., subset_sites(mask)], axis=-1)
    return float(prod) if prod.ndim == 0 else prod


def fwht(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along ``axis``.

    Computes F[m] = sum_k v[k] (-1)^{popcount(m & k)} with the butterfly
    recursion in O(N 2**N).  Applying the transform twice multiplies by
    2**N.
    """
    a = np.array(values, dtype=np.float64)
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    if n == 0 or (n & (n - 1)) != 0:
        raise ValueError(f"transform length must be a power of two, got {n}")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        blk = a.reshape(lead + (n // (2 * h), 2, h))
        top = blk[..., 0, :] + blk[..., 1, :]
        bot = blk[..., 0, :] - blk[..., 1, :]
        blk[..., 0, :] = top
        blk[..., 1, :] = bot
        h *= 2
    return np.moveaxis(a, -1, axis)


@dataclass(frozen=True)
class FourierSpectrum:
    """Dense Fourier spectrum of a function on {-1,+1}^N.

    Attributes
    ----------
    n_sites : int
        Number of spin sites N.
    coefficients : ndarray
        Length 2**N, coefficient of chi_I at index mask(I).
    """

    n_sites: int
    coefficients: np.ndarray

    def __post_init__(self):
        coeff = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        if coeff.shape != (2**self.n_sites,):
            raise ValueError(
                f"expected {2**self.n_sites} coefficients for "
                f"{self.n_sites} sites, got shape {coeff.shape}"
            )
        coeff.setflags(write=False)
        object.__setattr__(self, "coefficients", coeff)

    def coefficient(self, mask: int) -> float:
        _check_mask(mask, self.n_sites)
        return float(self.coefficients[mask])

    def orders(self) -> np.ndarray:
        """Subset order |I| for every mask index."""
        return subset_order(np.arange(2**self.n_sites))

    def weight_by_order(self) -> np.ndarray:
        """W_n = sum of squared coefficients at each order n = 0..N."""
        return np.bincount(
            self.orders(), weights=self.coefficients**2, minlength=self.n_sites + 1
        )

    def squared_norm(self) -> float:
        """sum_I fhat(I)^2, equal to the uniform mean of f**2 (Parseval)."""
        return float(np.dot(self.coefficients, self.coefficients))

    def to_json(self) -> str:
        entries = [[int(m), float(c)] for m, c in enumerate(self.coefficients)]
        return json.dumps({"n_sites": self.n_sites, "coefficients": entries})

    @classmethod
    def from_json(cls, text: str) -> "FourierSpectrum":
        obj = json.loads(text)
        coeff = np.zeros(2 ** obj["n_sites"])
        for mask, value in obj["coefficients"]:
            coeff[mask] = value
        return cls(obj["n_sites"], coeff)

    def to_csv(self) -> str:
        return _masks_values_to_csv(
            self.n_sites, np.arange(2**self.n_sites), self.coefficients
        )

    @classmethod
    def from_csv(cls, text: str) -> "FourierSpectrum":
        n_sites, masks, values = _masks_values_from_csv(text)
        coeff = np.zeros(2**n_sites)
        coeff[masks] = values
        return cls(n_sites, coeff)


_CSV_COMMENT = (
    "# subset mask encoding: bit i of mask set <=> site i in the subset"
)


def _masks_values_to_csv(n_sites: int, masks: np.ndarray, values: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(f"# n_sites={n_sites}\n{_CSV_COMMENT}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mask", "value"])
    for m, v in zip(masks, values):
        writer.writerow([int(m), repr(float(v))])
    return buf.getvalue()


def _masks_values_from_csv(text: str) -> tuple[int, np.ndarray, np.ndarray]:
    n_sites = None
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            if "n_sites=" in line:
                n_sites = int(line.split("n_sites=")[1])
            continue
        if not line or line.startswith("mask"):
            continue
        mask_s, value_s = line.split(",")
        rows.append((int(mask_s), float(value_s)))
    if n_sites is None:
        raise ValueError("missing '# n_sites=' header line")
    masks = np.asarray([r[0] for r in rows], dtype=np.int64)
    values = np.asarray([r[1] for r in rows], dtype=np.float64)
    return n_sites, masks, values


def function_table(
    f: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    n_sites: int,
    limit: int | None = None,
) -> np.ndarray:
    """Evaluate ``f`` on every configuration, in index order.

    ``f`` may be a callable taking a batch of configurations (or a single
    one), or an already tabulated array of length 2**N.
    """
    states = enumerate_states(n_sites, limit)
    if not callable(f):
        values = np.asarray(f, dtype=np.float64)
        if values.shape != (2**n_sites,):
            raise ValueError(
                f"tabulated values have shape {values.shape}, expected "
                f"({2**n_sites},)"
            )
        return values
    try:
        values = np.asarray(f(states), dtype=np.float64)
        if values.shape == (2**n_sites,):
            return values
    except Exception:
        pass
    return np.asarray([float(f(s)) for s in states], dtype=np.float64)


def fast_transform(
    values: np.ndarray | Callable, n_sites: int | None = None, limit: int | None = None
) -> FourierSpectrum:
    """Fourier spectrum from a full table of function values.

    With the configuration indexing used here, chi_I(s_k) equals
    (-1)^{|I|} (-1)^{popcount(I & k)}, so the spectrum is a sign-corrected
    Walsh-Hadamard transform of the value table divided by 2**N.
    """
    if callable(values):
        if n_sites is None:
            raise ValueError("n_sites is required when passing a callable")
        values = function_table(values, n_sites, limit)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"expected a 1-D value table, got shape {values.shape}")
    size = values.shape[-1]
    n = int(size).bit_length() - 1
    if 2**n != size:
        raise ValueError(f"value table length {size} is not a power of two")
    check_dense_limit(n, limit)
    coeff = _mask_signs_cached(n) * fwht(values) / size
    return FourierSpectrum(n, coeff)


def inverse_transform(spectrum: FourierSpectrum) -> np.ndarray:
    """Function values on all configurations from a dense spectrum."""
    signs = _mask_signs_cached(spectrum.n_sites)
    return fwht(signs * spectrum.coefficients)


def fourier_coefficient_direct(
    f: Callable | np.ndarray, n_sites: int, mask: int, limit: int | None = None
) -> float:
    """Brute-force fhat(I) = 2**-N sum_s f(s) chi_I(s).

    Independent of the fast transform; quadratic work overall, kept as the
    reference implementation.
    """
    _check_mask(mask, n_sites)
    states = enumerate_states(n_sites, limit)
    values = function_table(f, n_sites, limit)
    chi = np.ones(len(states)) if mask == 0 else np.prod(
        states[:, subset_sites(mask)].astype(np.float64), axis=1
    )
    return float(np.mean(values * chi))


def inner_product(
    f: Callable | np.ndarray,
    g: Callable | np.ndarray,
    n_sites: int,
    limit: int | None = None,
) -> float:
    """<f, g> = 2**-N sum_s f(s) g(s), the uniform-measure inner product."""
    fv = function_table(f, n_sites, limit)
    gv = function_table(g, n_sites, limit)
    return float(np.mean(fv * gv))


def influence(spectrum: FourierSpectrum, site: int) -> float:
    """Influence of one coordinate: sum of fhat(I)^2 over subsets containing it.

    Equals the uniform mean of the squared discrete derivative
    ((f(s^{i->+1}) - f(s^{i->-1})) / 2)**2.
    """
    if not 0 <= site < spectrum.n_sites:
        raise ValueError(f"site {site} out of range for {spectrum.n_sites} sites")
    masks = np.arange(2**spectrum.n_sites)
    sel = (masks >> site) & 1 == 1
    return float(np.sum(spectrum.coefficients[sel] ** 2))


def influences(spectrum: FourierSpectrum) -> np.ndarray:
    """Influence of every coordinate."""
    return np.asarray(
        [influence(spectrum, i) for i in range(spectrum.n_sites)]
    )


def total_influence(spectrum: FourierSpectrum) -> float:
    """Sum of all coordinate influences; equals sum_n n W_n."""
    return float(np.sum(influences(spectrum)))


def spectral_weight_above(spectrum: FourierSpectrum, order: int) -> float:
    """Total squared coefficient weight at orders >= ``order``.

    For order >= 1 this is bounded by total_influence / order, which is the
    Markov-type bound behind low-degree concentration.
    """
    if order < 0:
        raise ValueError(f"order must be nonnegative, got {order}")
    weights = spectrum.weight_by_order()
    return float(np.sum(weights[order:])) if order <= spectrum.n_sites else 0.0


@lru_cache(maxsize=None)
def _masks_up_to_order_cached(n_sites: int, max_order: int) -> np.ndarray:
    masks = np.arange(1, 2**n_sites, dtype=np.int64)
    keep = masks[subset_order(masks) <= max_order]
    keep.setflags(write=False)
    return keep


def masks_up_to_order(
    n_sites: int, max_order: int | None = None, limit: int | None = None
) -> np.ndarray:
    """Sorted nonempty subset masks with order <= max_order (all if None)."""
    check_dense_limit(n_sites, limit)
    order = n_sites if max_order is None else min(max_order, n_sites)
    if order < 1:
        raise ValueError(f"max_order must be at least 1, got {max_order}")
    return _masks_up_to_order_cached(n_sites, order)


def masks_up_to_order_sparse(n_sites: int, max_order: int) -> np.ndarray:
    """Sorted masks with 1 <= |I| <= max_order, built combinatorially.

    Unlike masks_up_to_order this never touches all 2**N subsets, so it
    works at any n_sites as long as the count C(N,1)+...+C(N,max_order)
    stays manageable.
    """
    if max_order < 1:
        raise ValueError(f"max_order must be at least 1, got {max_order}")
    order = min(max_order, n_sites)
    masks = [
        sum(1 << i for i in combo)
        for k in range(1, order + 1)
        for combo in itertools.combinations(range(n_sites), k)
    ]
    return np.sort(np.asarray(masks, dtype=np.int64))


@dataclass(frozen=True)
class SubsetVector:
    """A real vector indexed by nonempty subsets of the sites.

    Used for effective couplings, moment vectors, coupling-space gradients
    and flow velocities.  Masks are sorted and unique; the empty set is
    excluded by construction.
    """

    n_sites: int
    masks: np.ndarray
    values: np.ndarray
    max_order: int | None = None

    def __post_init__(self):
        masks = np.ascontiguousarray(self.masks, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if masks.ndim != 1 or masks.shape != values.shape:
            raise ValueError("masks and values must be 1-D arrays of equal length")
        if len(masks) > 0:
            if masks[0] < 1 or masks[-1] >= 2**self.n_sites:
                raise ValueError(
                    "masks must encode nonempty subsets of "
                    f"{self.n_sites} sites"
                )
            if np.any(np.diff(masks) <= 0):
                raise ValueError("masks must be strictly increasing")
        if self.max_order is not None and len(masks) > 0:
            if int(np.max(subset_order(masks))) > self.max_order:
                raise ValueError(
                    f"mask exceeds declared max_order={self.max_order}"
                )
        masks.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dict(
        cls,
        n_sites: int,
        entries: dict[int, float],
        max_order: int | None = None,
    ) -> "SubsetVector":
        masks = np.asarray(sorted(entries), dtype=np.int64)
        values = np.asarray([entries[int(m)] for m in masks], dtype=np.float64)
        return cls(n_sites, masks, values, max_order)

    @classmethod
    def dense(
        cls,
        n_sites: int,
        values: np.ndarray | None = None,
        max_order: int | None = None,
    ) -> "SubsetVector":
        """All nonempty masks up to max_order, zero-filled unless given."""
        masks = masks_up_to_order(n_sites, max_order)
        if values is None:
            values = np.zeros(len(masks))
        return cls(n_sites, masks, values, max_order)

    def __len__(self) -> int:
        return len(self.masks)

    def get(self, mask: int, default: float = 0.0) -> float:
        _check_mask(mask, self.n_sites)
        pos = int(np.searchsorted(self.masks, mask))
        if pos < len(self.masks) and self.masks[pos] == mask:
            return float(self.values[pos])
        return default

    def with_values(self, values: np.ndarray) -> "SubsetVector":
        return SubsetVector(self.n_sites, self.masks, values, self.max_order)

    def to_dict(self) -> dict[int, float]:
        return {int(m): float(v) for m, v in zip(self.masks, self.values)}

    def orders(self) -> np.ndarray:
        return subset_order(self.masks)

    def order_indices(self, order: int) -> np.ndarray:
        return np.flatnonzero(self.orders() == order)

    def order_norm(self, order: int) -> float:
        """Frobenius norm of the order-n block, sqrt(sum_{|I|=n} v_I^2)."""
        return float(np.linalg.norm(self.values[self.order_indices(order)]))

    def order_norms(self, up_to: int | None = None) -> np.ndarray:
        top = self.n_sites if up_to is None else up_to
        return np.asarray([self.order_norm(n) for n in range(1, top + 1)])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self) else 0.0

    def dot(self, other: "SubsetVector") -> float:
        self._check_aligned(other)
        return float(np.dot(self.values, other.values))

    def _check_aligned(self, other: "SubsetVector") -> None:
        if self.n_sites != other.n_sites or not np.array_equal(
            self.masks, other.masks
        ):
            raise ValueError("subset vectors are indexed by different masks")

    def __add__(self, other: "SubsetVector") -> "SubsetVector":
        self._check_aligned(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SubsetVector") -> "SubsetVector":
        self._check_aligned(other)
        return self.with_values(self.values - other.values)

    def scaled(self, factor: float) -> "SubsetVector":
        return self.with_values(factor * self.values)

    def dense_full(self) -> np.ndarray:
        """Embed into a length 2**N array (empty-set slot left at zero)."""
        full = np.zeros(2**self.n_sites)
        full[self.masks] = self.values
        return full

    def to_json(self) -> str:
        obj = {
            "n_sites": self.n_sites,
            "max_order": self.max_order,
            "entries": [[int(m), float(v)] for m, v in zip(self.masks, self.values)],
        }
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "SubsetVector":
        obj = json.loads(text)
        entries = {int(m): float(v) for m, v in obj["entries"]}
        return cls.from_dict(obj["n_sites"], entries, obj.get("max_order"))

    def to_csv(self) -> str:
        return _masks_values_to_csv(self.n_sites, self.masks, self.values)

    @classmethod
    def from_csv(cls, text: str) -> "SubsetVector":
        n_sites, masks, values = _masks_values_from_csv(text)
        order = np.argsort(masks)
        return cls(n_sites, masks[order], values[order])


def effective_couplings_from_energy(
    energy: Callable | np.ndarray | FourierSpectrum,
    n_sites: int | None = None,
    max_order: int | None = None,
    limit: int | None = None,
) -> SubsetVector:
    """Multi-body couplings of an energy function.

    For a Boltzmann weight p(s) proportional to exp(-E(s)), writing
    E(s) = Ehat(0) - sum_{I nonempty} phi_I chi_I(s) defines the coupling
    phi_I = -Ehat(I).  The constant Ehat(0) is dropped: it only shifts the
    log partition function.
    """
    if isinstance(energy, FourierSpectrum):
        spectrum = energy
    else:
        spectrum = fast_transform(energy, n_sites, limit)
    masks = masks_up_to_order(spectrum.n_sites, max_order, limit)
    return SubsetVector(
        spectrum.n_sites, masks, -spectrum.coefficients[masks], max_order
    )


def evaluate_subset_expansion(
    vector: SubsetVector, spins: np.ndarray, constant: float = 0.0
) -> np.ndarray | float:
    """Evaluate constant + sum_I v_I chi_I(s) without dense enumeration.

    Complements ``inverse_transform`` for truncated subset vectors; work is
    proportional to the number of stored subsets.
    """
    spins = np.asarray(spins)
    if spins.shape[-1] != vector.n_sites:
        raise ValueError(
            f"configurations have {spins.shape[-1]} sites, vector has "
            f"{vector.n_sites}"
        )
    total = np.full(spins.shape[:-1], float(constant))
    for mask, value in zip(vector.masks, vector.values):
        total = total + value * np.prod(
            spins[..., subset_sites(int(mask))].astype(np.float64), axis=-1
        )
    return float(total) if np.ndim(total) == 0 else total
