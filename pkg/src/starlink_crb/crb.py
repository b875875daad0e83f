"""Fisher information and root Cramer-Rao bounds for ToA ranging.

Everything here works in metres so that the channel constant ``gamma``
(m^-2) needs no hidden conversion. Callers holding km positions convert
at the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ConfigurationError, DegenerateGeometryError

SPEED_OF_LIGHT_MS = 2.998e8
# largest admissible 1/(B Ts Fc^2 SNR), seconds
FEASIBILITY_THRESHOLD_S = 4.81e-7
DEFAULT_GAMMA = 0.298605

# condition number above which a FIM is treated as singular
MAX_CONDITION = 1e12
# relative eigenvalue cut for pseudo-inversion (gauge / null modes)
PINV_RTOL = 1e-9


class Mode(str, Enum):
    ANCHORED = "anchored"
    ANCHORLESS_PER_SAT = "anchorless_per_sat"
    ANCHORLESS_NETWORK = "anchorless_network"


def gamma_from_sigma(propagation_velocity_ms: float, sigma_toa_s: float) -> float:
    """Channel constant 1 / (v_p * sigma_T)^2 in m^-2."""
    if not propagation_velocity_ms > 0:
        raise ValueError(f"propagation velocity must be positive, got {propagation_velocity_ms}")
    if not sigma_toa_s > 0:
        raise ValueError(f"ToA standard deviation must be positive, got {sigma_toa_s}")
    return 1.0 / (propagation_velocity_ms * sigma_toa_s) ** 2


@dataclass(frozen=True)
class LinkBudget:
    bandwidth_hz: float
    signal_duration_s: float
    centre_frequency_hz: float
    snr: float

    def __post_init__(self):
        for name in ("bandwidth_hz", "signal_duration_s", "centre_frequency_hz", "snr"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(name, "must be strictly positive")

    @property
    def inverse_product_s(self) -> float:
        """1 / (B Ts Fc^2 SNR)."""
        return 1.0 / (self.bandwidth_hz * self.signal_duration_s
                      * self.centre_frequency_hz**2 * self.snr)


def sigma_toa_lower_bound(budget: LinkBudget) -> float:
    """Smallest achievable ToA standard deviation, 1 / (8 pi^2 B Ts Fc^2 SNR)."""
    return budget.inverse_product_s / (8.0 * math.pi**2)


def link_feasible(budget: LinkBudget, threshold_s: float = FEASIBILITY_THRESHOLD_S) -> bool:
    return budget.inverse_product_s <= threshold_s


@dataclass(frozen=True)
class ChannelModel:
    """ToA channel. ``gamma_per_m2`` always equals 1/(v_p sigma_T)^2."""

    propagation_velocity_ms: float
    sigma_toa_s: float
    path_loss_exponent: int = 2

    def __post_init__(self):
        if not self.propagation_velocity_ms > 0:
            raise ConfigurationError("propagation_velocity_ms", "must be > 0")
        if not self.sigma_toa_s > 0:
            raise ConfigurationError("sigma_toa_s", "must be > 0")
        if self.path_loss_exponent != 2:
            raise ConfigurationError("path_loss_exponent", "ToA ranging fixes s = 2")

    @property
    def gamma_per_m2(self) -> float:
        return gamma_from_sigma(self.propagation_velocity_ms, self.sigma_toa_s)

    @classmethod
    def from_gamma(cls, gamma_per_m2: float,
                   propagation_velocity_ms: float = SPEED_OF_LIGHT_MS) -> ChannelModel:
        if not gamma_per_m2 > 0:
            raise ConfigurationError("gamma_per_m2", "must be > 0")
        sigma = 1.0 / (propagation_velocity_ms * math.sqrt(gamma_per_m2))
        return cls(propagation_velocity_ms, sigma)

    @classmethod
    def from_budget(cls, budget: LinkBudget,
                    propagation_velocity_ms: float = SPEED_OF_LIGHT_MS) -> ChannelModel:
        return cls(propagation_velocity_ms, sigma_toa_lower_bound(budget))


@dataclass(frozen=True)
class RcrbResult:
    sat_id: object
    epoch_s: float
    rcrb_m: float
    mode: Mode
    degenerate: bool = False


# -- 3x3 anchored / per-satellite information --------------------------------

def unit_directions(sat_pos, node_positions) -> np.ndarray:
    """Unit vectors from each node towards the satellite, ``(k, 3)``."""
    sat = np.asarray(sat_pos, dtype=float)
    nodes = np.asarray(node_positions, dtype=float).reshape(-1, 3)
    diff = sat[None, :] - nodes
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist == 0.0):
        raise DegenerateGeometryError("a ranging partner coincides with the satellite")
    return diff / dist[:, None]


def anchored_fim(sat_pos, neighbor_positions, gamma: float) -> np.ndarray:
    """3x3 FIM of one node ranging to partners at known positions.

    F = gamma * sum_j u_j u_j^T, u_j the unit vector between the node and
    partner j. ``neighbor_positions`` may mix satellites and stations.
    """
    u = unit_directions(sat_pos, neighbor_positions)
    return gamma * (u.T @ u)


def det3(F) -> np.ndarray:
    a, b, c = F[..., 0, 0], F[..., 0, 1], F[..., 0, 2]
    d, e, f = F[..., 1, 0], F[..., 1, 1], F[..., 1, 2]
    g, h, i = F[..., 2, 0], F[..., 2, 1], F[..., 2, 2]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def inverse_3x3(F) -> np.ndarray:
    """Closed-form adjugate inverse, vectorised over leading axes."""
    F = np.asarray(F, dtype=float)
    a, b, c = F[..., 0, 0], F[..., 0, 1], F[..., 0, 2]
    d, e, f = F[..., 1, 0], F[..., 1, 1], F[..., 1, 2]
    g, h, i = F[..., 2, 0], F[..., 2, 1], F[..., 2, 2]
    adj = np.stack([
        np.stack([e * i - f * h, c * h - b * i, b * f - c * e], axis=-1),
        np.stack([f * g - d * i, a * i - c * g, c * d - a * f], axis=-1),
        np.stack([d * h - e * g, b * g - a * h, a * e - b * d], axis=-1),
    ], axis=-2)
    return adj / det3(F)[..., None, None]


def trace_inverse_3x3(F) -> np.ndarray:
    """tr(F^-1) from the diagonal cofactors only."""
    F = np.asarray(F, dtype=float)
    a, b, c = F[..., 0, 0], F[..., 0, 1], F[..., 0, 2]
    d, e, f = F[..., 1, 0], F[..., 1, 1], F[..., 1, 2]
    g, h, i = F[..., 2, 0], F[..., 2, 1], F[..., 2, 2]
    cofactor_trace = (e * i - f * h) + (a * i - c * g) + (a * e - b * d)
    return cofactor_trace / det3(F)


def is_degenerate(F, max_condition: float = MAX_CONDITION) -> np.ndarray:
    """Singular or ill-conditioned symmetric FIM(s)."""
    eig = np.linalg.eigvalsh(np.asarray(F, dtype=float))
    lo, hi = eig[..., 0], eig[..., -1]
    return ~(hi > 0) | ~(lo * max_condition > hi)


def batch_rcrb(F, max_condition: float = MAX_CONDITION) -> tuple[np.ndarray, np.ndarray]:
    """RCRB of a stack of 3x3 FIMs.

    Returns ``(values, degenerate)``; degenerate entries carry NaN.
    """
    F = np.asarray(F, dtype=float)
    bad = is_degenerate(F, max_condition)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.sqrt(trace_inverse_3x3(F) / 3.0)
    values = np.where(bad, np.nan, values)
    return values, bad


def rcrb(F, max_condition: float = MAX_CONDITION) -> float:
    """sqrt(tr(F^-1) / 3) in metres, or NaN when F is degenerate."""
    F = np.asarray(F, dtype=float)
    if F.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {F.shape}")
    value, _ = batch_rcrb(F, max_condition)
    return float(value)


def anchorless_rcrb_per_sat(sat_pos, linked_sat_positions, gamma: float,
                            sat_id=None, epoch_s: float = 0.0) -> RcrbResult:
    """Per-satellite relative bound: the 3x3 FIM over satellite links only."""
    F = anchored_fim(sat_pos, linked_sat_positions, gamma)
    value, bad = batch_rcrb(F)
    return RcrbResult(sat_id, epoch_s, float(value), Mode.ANCHORLESS_PER_SAT, bool(bad))


# -- network-wide relative information -----------------------------------------

def anchorless_fim_network(positions, links, gamma: float) -> np.ndarray:
    """3n x 3n relative FIM, gamma * J^T J.

    One Jacobian row per undirected link (j, k): ``+u`` in block j and
    ``-u`` in block k, u the unit vector from k to j.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = len(pos)
    links = np.asarray(links, dtype=int).reshape(-1, 2)
    F = np.zeros((3 * n, 3 * n))
    if len(links) == 0:
        return F
    j, k = links[:, 0], links[:, 1]
    diff = pos[j] - pos[k]
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist == 0.0):
        raise DegenerateGeometryError("a linked pair of satellites coincides")
    u = diff / dist[:, None]
    outer = gamma * np.einsum("li,lm->lim", u, u)
    blocks = F.reshape(n, 3, n, 3)
    # assemble in link order; each block sum is order independent up to rounding
    for idx in range(len(links)):
        a, b, o = j[idx], k[idx], outer[idx]
        blocks[a, :, a, :] += o
        blocks[b, :, b, :] += o
        blocks[a, :, b, :] -= o
        blocks[b, :, a, :] -= o
    return F


def gauge_dimension(n_nodes: int, collinear: bool = False) -> int:
    """Rigid-motion null-space size for n nodes in 3D."""
    if n_nodes <= 1:
        return 3 * n_nodes
    if n_nodes == 2 or collinear:
        return 5
    return 6


def symmetric_pinv(F, rtol: float = PINV_RTOL) -> tuple[np.ndarray, int]:
    """Eigen-decomposition pseudo-inverse and the numerical null-space size."""
    F = np.asarray(F, dtype=float)
    w, V = np.linalg.eigh(F)
    top = w[-1] if len(w) else 0.0
    keep = w > rtol * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    return (V * inv_w) @ V.T, int((~keep).sum())


def anchorless_rcrb_network(F_rel, sat_index, sat_id=None, epoch_s: float = 0.0,
                            gauge_dim: int | None = None) -> RcrbResult:
    """Bound from the diagonal block of the pseudo-inverse of ``F_rel``.

    ``sat_index`` may be an int or a sequence; a sequence returns a list
    of results sharing one decomposition. Rank loss beyond ``gauge_dim``
    (rigid motions) marks the result degenerate.
    """
    F_rel = np.asarray(F_rel, dtype=float)
    n = F_rel.shape[0] // 3
    if gauge_dim is None:
        gauge_dim = gauge_dimension(n)
    pinv, nullity = symmetric_pinv(F_rel)
    flagged = nullity > gauge_dim
    single = np.ndim(sat_index) == 0
    indices = [int(sat_index)] if single else [int(i) for i in sat_index]
    ids = [sat_id] if single else list(sat_id) if sat_id is not None else [None] * len(indices)

    results = []
    for i, sid in zip(indices, ids):
        block = pinv[3 * i:3 * i + 3, 3 * i:3 * i + 3]
        value = math.sqrt(max(np.trace(block), 0.0) / 3.0)
        bad = flagged or not value > 0
        results.append(RcrbResult(sid, epoch_s, math.nan if bad else value,
                                  Mode.ANCHORLESS_NETWORK, bad))
    return results[0] if single else results
