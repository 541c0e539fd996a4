"""d-local Kraus channels and their moment matrices on codewords."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .angmom import HalfInt
from .errors import DomainError, NumericalContractError
from .statevec import (DensityMatrix, StateVector, _site_matrix, check_density,
                       embed_operator)

RNG_ALGORITHM = "numpy.PCG64"
COMPLETENESS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Kraus operators on the ordered site tuple ``sites`` (first site = fastest digit).

    Operators that act on a smaller site set are stored already embedded on
    ``sites``; ``blocks`` records which sets they came from.
    """

    s: HalfInt
    sites: tuple[int, ...]
    kraus_ops: np.ndarray = field(repr=False)
    blocks: tuple[tuple[tuple[int, ...], int], ...] = ()
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "s", HalfInt.of(self.s))
        sites = tuple(int(x) for x in self.sites)
        if len(set(sites)) != len(sites):
            raise DomainError(f"repeated site in {sites}")
        object.__setattr__(self, "sites", sites)
        dim = (self.s.twice + 1) ** len(sites)
        ops = np.array(self.kraus_ops, dtype=complex, copy=True)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[1:] != (dim, dim):
            raise DomainError(f"Kraus operators must be {dim}x{dim}, got {ops.shape[1:]}")
        if not self.blocks and len(ops) > dim * dim:
            raise DomainError(f"{len(ops)} Kraus operators exceed the bound {dim * dim}")
        resid = completeness_residual(ops)
        if resid > COMPLETENESS_TOL:
            raise NumericalContractError(f"Kraus completeness residual {resid:.2e}")
        ops.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)
        if not self.blocks:
            object.__setattr__(self, "blocks", ((sites, len(ops)),))

    @property
    def d(self) -> int:
        return len(self.sites)

    @property
    def n_d(self) -> int:
        return len(self.kraus_ops)

    @property
    def D(self) -> int:
        return self.s.twice + 1

    @classmethod
    def identity(cls, s, sites: Sequence[int]) -> "KrausChannel":
        dim = (HalfInt.of(s).twice + 1) ** len(sites)
        return cls(s, tuple(sites), np.eye(dim)[None])

    def metadata(self) -> dict:
        return {
            "s": str(self.s),
            "sites": list(self.sites),
            "n_d": self.n_d,
            "blocks": [{"sites": list(b), "n_kraus": n} for b, n in self.blocks],
            "seed": self.seed,
            "rng": RNG_ALGORITHM if self.seed is not None else None,
        }


def completeness_residual(ops: np.ndarray) -> float:
    """Spectral norm of sum_i K_i^dag K_i - I."""
    ops = np.asarray(ops)
    total = np.einsum("kab,kac->bc", ops.conj(), ops)
    return float(np.linalg.norm(total - np.eye(ops.shape[-1]), 2))


def random_isometry_blocks(dim: int, n_kraus: int, rng: np.random.Generator) -> np.ndarray:
    """``n_kraus`` blocks of an isometry C^dim -> C^(n_kraus*dim) from a Gaussian QR."""
    g = rng.standard_normal((n_kraus * dim, dim)) + 1j * rng.standard_normal((n_kraus * dim, dim))
    q, r = np.linalg.qr(g)
    # fix the column phases so the result depends only on the Gaussian draw
    q = q * (np.diag(r) / np.abs(np.diag(r)))[None, :]
    return q.reshape(n_kraus, dim, dim)


def random_dlocal_channel(s, sites: Sequence[int], n_kraus: int, seed: int) -> KrausChannel:
    """Seeded random channel with ``n_kraus`` Kraus operators on ``sites``."""
    s = HalfInt.of(s)
    sites = tuple(int(x) for x in sites)
    if len(sites) < 1:
        raise DomainError("need at least one site")
    dim = (s.twice + 1) ** len(sites)
    if not 1 <= n_kraus <= dim * dim:
        raise DomainError(f"n_kraus must lie in 1..{dim * dim}")
    rng = np.random.default_rng(seed)
    return KrausChannel(s, sites, random_isometry_blocks(dim, n_kraus, rng), seed=seed)


def random_multiset_channel(s, site_sets: Sequence[Sequence[int]], n_kraus: int, seed: int,
                            weights: Sequence[float] | None = None) -> KrausChannel:
    """Mixture of random channels, each Kraus operator acting on one of ``site_sets``.

    Block t contributes sqrt(p_t) * K^(t)_i, so completeness holds on the union
    of the sets for any probability vector p.
    """
    s = HalfInt.of(s)
    sets = [tuple(int(x) for x in ss) for ss in site_sets]
    if not sets or any(len(ss) < 1 for ss in sets):
        raise DomainError("need at least one nonempty site set")
    union = tuple(sorted(set().union(*sets)))
    p = np.full(len(sets), 1 / len(sets)) if weights is None else np.asarray(weights, float)
    if p.shape != (len(sets),) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
        raise DomainError("weights must be a probability vector, one entry per set")
    D = s.twice + 1
    rng = np.random.default_rng(seed)
    ops = []
    for ss, pt in zip(sets, p):
        dim = D ** len(ss)
        if not 1 <= n_kraus <= dim * dim:
            raise DomainError(f"n_kraus must lie in 1..{dim * dim}")
        for k in random_isometry_blocks(dim, n_kraus, rng):
            ops.append(np.sqrt(pt) * embed_operator(k, ss, union, D))
    return KrausChannel(s, union, np.array(ops), blocks=tuple((ss, n_kraus) for ss in sets),
                        seed=seed)


def apply_kraus(rho: DensityMatrix, ch: KrausChannel) -> DensityMatrix:
    """sum_i K_i rho K_i^dag with each K_i embedded on the sites of ``rho``."""
    if rho.s != ch.s:
        raise DomainError("channel and state have different local spin")
    if not set(ch.sites) <= set(rho.sites):
        raise DomainError(f"channel sites {ch.sites} not contained in {rho.sites}")
    out = np.zeros_like(rho.matrix)
    for k in ch.kraus_ops:
        big = embed_operator(k, ch.sites, rho.sites, ch.D)
        out += big @ rho.matrix @ big.conj().T
    return DensityMatrix(rho.s, rho.sites, out)


def kraus_images(psi: StateVector, ch: KrausChannel) -> np.ndarray:
    """Array Y with Y[i] = K_i X, X the state reshaped as (channel sites, rest)."""
    if psi.s != ch.s:
        raise DomainError("channel and state have different local spin")
    if max(ch.sites) >= psi.N:
        raise DomainError(f"channel sites {ch.sites} outside an {psi.N}-site register")
    x = _site_matrix(psi.amplitudes, ch.sites, psi.N, psi.D)
    return np.einsum("kab,bc->kac", ch.kraus_ops, x)


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    """Entries <psi| K_i^dag K_j |psi> for one codeword."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex, copy=True)
        check_moment_matrix(m)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)


def check_moment_matrix(m: np.ndarray) -> None:
    if np.max(np.abs(m - m.conj().T)) > 1e-12:
        raise NumericalContractError("moment matrix is not Hermitian")
    if abs(np.trace(m) - 1) > 1e-10:
        raise NumericalContractError(f"moment matrix trace {np.trace(m)!r} is not 1")
    check_density(m / np.trace(m).real, herm_tol=1e-12, trace_tol=1e-9, psd_tol=1e-10)


def complementary_moment_matrix(codeword: StateVector, ch: KrausChannel) -> MomentMatrix:
    y = kraus_images(codeword, ch).reshape(ch.n_d, -1)
    gram = y.conj() @ y.T
    return MomentMatrix(0.5 * (gram + gram.conj().T))
