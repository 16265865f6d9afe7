"""Gram system assembly, the linear conversion operator, and APS estimation.

The estimator is the minimum-norm member of the linear variety of spectra
consistent with the observed uplink covariance (and any support
constraints).  Everything reduces to the Gram matrix G of the constraint
functions and the cross matrix Q against the downlink functions; conversion
itself collapses to one matrix-vector product r_d = A r_u with
A = Q^T G^+ restricted to the uplink block.

All quadratic forms in G^+ are evaluated in the eigenbasis of G.  The dense
pseudo-inverse has entries of order 1/lambda_min and forming z^T G^+ z
through it loses ~5 digits to cancellation in ill-conditioned
support-information systems; projecting z onto the retained eigenvectors
first keeps those forms accurate to ~1e-11.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .array_model import FunctionSet, UlaConfig
from .errors import ContractError, NumericalConsistencyError
from .hilbert_space import (
    AngularFunction,
    SupportSet,
    inner_product_with_status,
    norm_sq,
)
from .numerics import PinvResult, PinvSpec, QuadratureSpec, pinv_psd

__all__ = [
    "GramSystem",
    "ConversionOperator",
    "HermitianToeplitzCov",
    "ApsEstimate",
    "build_gram_system",
    "build_q_matrix",
    "build_conversion_operator",
    "convert",
    "estimate_aps",
    "operator_to_dict",
    "operator_from_dict",
    "export_operator",
    "load_operator",
]


def _thread_count() -> int:
    raw = os.environ.get("APSCAST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _pairwise_table(
    rows: Sequence[AngularFunction],
    cols: Sequence[AngularFunction],
    quad: QuadratureSpec,
    symmetric: bool,
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Inner-product table with optional symmetry; returns flagged entries."""
    out = np.zeros((len(rows), len(cols)))
    flagged: list[tuple[int, int]] = []

    def fill_row(j: int) -> list[tuple[int, int]]:
        local: list[tuple[int, int]] = []
        start = j if symmetric else 0
        for k in range(start, len(cols)):
            v, ok = inner_product_with_status(rows[j], cols[k], quad)
            out[j, k] = v
            if symmetric:
                out[k, j] = v
            if not ok:
                local.append((j, k))
        return local

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for local in pool.map(fill_row, range(len(rows))):
                flagged.extend(local)
    else:
        for j in range(len(rows)):
            flagged.extend(fill_row(j))
    return out, flagged


@dataclass(frozen=True)
class GramSystem:
    """Gram matrix of the ordered basis (uplink then constraints) plus its
    cached pseudo-inverse and assembly diagnostics."""

    function_set: FunctionSet
    basis: tuple[AngularFunction, ...]
    G: np.ndarray
    pinv_result: PinvResult
    quad: QuadratureSpec
    pinv: PinvSpec
    flagged_entries: tuple[tuple[int, int], ...]

    @property
    def L(self) -> int:
        return len(self.basis)

    @property
    def rank(self) -> int:
        return self.pinv_result.rank

    @property
    def G_pinv(self) -> np.ndarray:
        return self.pinv_result.pinv

    def quad_form(self, z: np.ndarray) -> float:
        return self.pinv_result.quad_form(z)

    def apply_pinv(self, z: np.ndarray) -> np.ndarray:
        return self.pinv_result.apply(z)


def build_gram_system(
    fs: FunctionSet,
    quad: QuadratureSpec = QuadratureSpec(),
    pinv: PinvSpec = PinvSpec(),
) -> GramSystem:
    """Assemble G over the basis (uplink + constraints) and cache G^+.

    Unmasked pairs use the exact Bessel closed forms; pairs involving a
    masked constraint integrate over the complement region.  Entries whose
    quadrature failed to converge are listed in ``flagged_entries``.
    """
    basis = fs.basis
    G, flagged = _pairwise_table(basis, basis, quad, symmetric=True)
    result = pinv_psd(G, pinv)

    lam_min = float(result.eigenvalues.min()) if result.eigenvalues.size else 0.0
    if lam_min < -1e-9 * max(result.sigma_max, 1.0):
        raise NumericalConsistencyError(
            f"Gram matrix has significantly negative eigenvalue {lam_min:.3e}"
        )
    return GramSystem(
        function_set=fs,
        basis=basis,
        G=G,
        pinv_result=result,
        quad=quad,
        pinv=pinv,
        flagged_entries=tuple(flagged),
    )


def build_q_matrix(gs: GramSystem) -> tuple[np.ndarray, tuple[tuple[int, int], ...]]:
    """Q[j, k] = <x_j, g_d[k]>, shape L x 2N."""
    Q, flagged = _pairwise_table(
        gs.basis, gs.function_set.downlink, gs.quad, symmetric=False
    )
    return Q, tuple(flagged)


@dataclass(frozen=True)
class ConversionOperator:
    """Precomputed uplink-to-downlink conversion.

    ``A`` is Q^T G^+ restricted to its first 2N columns, so that
    [Re(col); Im(col)] of the converted covariance equals A @ r.  It depends
    only on the array geometry and support information, so it is built once
    and reused for every covariance.
    """

    config: UlaConfig
    support: SupportSet | None
    Q_mat: np.ndarray
    A: np.ndarray
    downlink_norms_sq: np.ndarray
    rank: int
    L: int

    @property
    def n(self) -> int:
        return self.config.n_antennas


def build_conversion_operator(gs: GramSystem) -> ConversionOperator:
    """Build Q and collapse the two estimation steps into the matrix A."""
    fs = gs.function_set
    two_n = 2 * fs.n
    Q, _ = build_q_matrix(gs)

    pr = gs.pinv_result
    vk = pr.eigenvectors[:, pr.kept]
    lam = pr.eigenvalues[pr.kept]
    T = vk.T @ Q                      # kept x 2N
    W = vk.T[:, :two_n]               # kept x 2N (uplink slots of r-underbar)
    A = (T / lam[:, None]).T @ W if lam.size else np.zeros((two_n, two_n))

    norms = np.array([norm_sq(g, gs.quad) for g in fs.downlink])
    return ConversionOperator(
        config=fs.config,
        support=fs.support,
        Q_mat=Q,
        A=A,
        downlink_norms_sq=norms,
        rank=gs.rank,
        L=gs.L,
    )


# ---------------------------------------------------------------------------
# Hermitian Toeplitz covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HermitianToeplitzCov:
    """N x N Hermitian Toeplitz covariance stored as its first column."""

    first_col: np.ndarray

    def __post_init__(self) -> None:
        col = np.asarray(self.first_col, dtype=complex)
        if col.ndim != 1 or col.size < 1:
            raise ContractError("first_col must be a nonempty vector")
        if col[0].imag != 0.0:
            raise ContractError(
                "diagonal entry must be real: imag(first_col[0]) = "
                f"{col[0].imag!r}"
            )
        col.setflags(write=False)
        object.__setattr__(self, "first_col", col)

    @property
    def n(self) -> int:
        return self.first_col.size

    def to_r_vector(self) -> np.ndarray:
        """[Re(first column); Im(first column)] in slot order."""
        return np.concatenate([self.first_col.real, self.first_col.imag])

    @classmethod
    def from_r_vector(cls, r: np.ndarray) -> "HermitianToeplitzCov":
        r = np.asarray(r, dtype=float)
        if r.ndim != 1 or r.size % 2 != 0:
            raise ContractError("r vector must have even length 2N")
        n = r.size // 2
        return cls(r[:n] + 1j * r[n:])

    def expand(self) -> np.ndarray:
        """Full Hermitian Toeplitz matrix R[n, m] = c_{n-m}."""
        c = self.first_col
        idx = np.subtract.outer(np.arange(self.n), np.arange(self.n))
        out = np.where(idx >= 0, c[np.abs(idx)], np.conj(c[np.abs(idx)]))
        return out


def convert(op: ConversionOperator, r_u: HermitianToeplitzCov) -> HermitianToeplitzCov:
    """Uplink-to-downlink covariance conversion: one matrix-vector product."""
    if r_u.n != op.n:
        raise ContractError(
            f"covariance dimension {r_u.n} does not match operator dimension {op.n}"
        )
    r = r_u.to_r_vector()
    rd = op.A @ r
    return HermitianToeplitzCov.from_r_vector(rd)


# ---------------------------------------------------------------------------
# APS estimation (minimum-norm consistent spectrum)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ApsEstimate:
    """Estimated angular power spectrum sum_k alpha_k x_k."""

    basis: tuple[AngularFunction, ...]
    coefficients: np.ndarray

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.zeros_like(theta)
        for a, x in zip(self.coefficients, self.basis):
            if a != 0.0 and not x.is_zero():
                out += a * x.evaluate(theta)
        return out


def estimate_aps(
    gs: GramSystem,
    r_u: np.ndarray,
    constraint_values: np.ndarray | None = None,
) -> ApsEstimate:
    """Minimum-norm spectrum consistent with r_u (and the constraint values).

    ``constraint_values`` defaults to zeros (support constraints); passing a
    vector supports general linear-variety priors.
    """
    fs = gs.function_set
    two_n = 2 * fs.n
    r_u = np.asarray(r_u, dtype=float)
    if r_u.shape != (two_n,):
        raise ContractError(f"r_u must have shape ({two_n},), got {r_u.shape}")
    q_count = gs.L - two_n
    if constraint_values is None:
        b = np.zeros(q_count)
    else:
        b = np.asarray(constraint_values, dtype=float)
        if b.shape != (q_count,):
            raise ContractError(
                f"constraint_values must have shape ({q_count},), got {b.shape}"
            )
    rbar = np.concatenate([r_u, b])
    alpha = gs.apply_pinv(rbar)
    return ApsEstimate(basis=gs.basis, coefficients=alpha)


# ---------------------------------------------------------------------------
# Operator (de)serialization
# ---------------------------------------------------------------------------


def _config_to_dict(cfg: UlaConfig) -> dict:
    return {
        "n_antennas": cfg.n_antennas,
        "spacing": cfg.spacing,
        "f_up": cfg.f_up,
        "f_down": cfg.f_down,
        "wave_speed": cfg.wave_speed,
    }


def operator_to_dict(op: ConversionOperator, G: np.ndarray | None = None) -> dict:
    doc = {
        "n": op.n,
        "L": op.L,
        "A": op.A.tolist(),
        "rank": op.rank,
        "config": _config_to_dict(op.config),
        "support": [list(iv) for iv in op.support.intervals] if op.support else [],
        "Q": op.Q_mat.tolist(),
        "downlink_norms_sq": op.downlink_norms_sq.tolist(),
    }
    if G is not None:
        doc["G"] = np.asarray(G).tolist()
    return doc


def operator_from_dict(doc: dict) -> ConversionOperator:
    try:
        cfg = UlaConfig(**doc["config"])
        support_ivs = doc.get("support") or []
        support = SupportSet(support_ivs) if support_ivs else None
        A = np.asarray(doc["A"], dtype=float)
        Q = np.asarray(doc["Q"], dtype=float)
        norms = np.asarray(doc["downlink_norms_sq"], dtype=float)
        n = int(doc["n"])
        L = int(doc["L"])
        rank = int(doc["rank"])
    except (KeyError, TypeError) as exc:
        raise ContractError(f"malformed operator document: {exc}") from exc
    if A.shape != (2 * n, 2 * n):
        raise ContractError(f"A must have shape ({2*n}, {2*n}), got {A.shape}")
    if Q.shape != (L, 2 * n):
        raise ContractError(f"Q must have shape ({L}, {2*n}), got {Q.shape}")
    return ConversionOperator(
        config=cfg, support=support, Q_mat=Q, A=A,
        downlink_norms_sq=norms, rank=rank, L=L,
    )


def export_operator(path: str, op: ConversionOperator, G: np.ndarray | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(operator_to_dict(op, G), fh)
        fh.write("\n")


def load_operator(path: str) -> ConversionOperator:
    with open(path, "r", encoding="utf-8") as fh:
        return operator_from_dict(json.load(fh))
