# -*- coding: utf-8 -*-
"""
Alignment weights for the decoder: global, local (Gaussian linear window),
syntax-directed (Gaussian over dependency distance, normalised inside the
n-gram SDC) and the double-context combinations.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Mapping, Optional, Union

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor, TensorLike
from .errors import ConfigurationError, DimensionError
from .utils import round_half_away

log = logging.getLogger(__name__)

DEFAULT_N = 4
DEFAULT_WINDOW = 10


class AttentionKind(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"
    SYNTAX = "syntax"
    DOUBLE = "double"
    DOUBLE_LOCAL = "double_local"

    @property
    def uses_syntax(self) -> bool:
        return self in (AttentionKind.SYNTAX, AttentionKind.DOUBLE)

    @property
    def uses_position(self) -> bool:
        return self is not AttentionKind.GLOBAL

    @property
    def context_keys(self) -> tuple:
        """Prediction-layer context matrices used by this kind."""
        return {
            AttentionKind.GLOBAL: ("L_cg",),
            AttentionKind.LOCAL: ("L_cl",),
            AttentionKind.SYNTAX: ("L_cs",),
            AttentionKind.DOUBLE: ("L_cg", "L_cs"),
            AttentionKind.DOUBLE_LOCAL: ("L_cg", "L_cl"),
        }[self]


@dataclass(frozen=True)
class AttentionConfig:
    kind: AttentionKind = AttentionKind.GLOBAL
    window: int = DEFAULT_WINDOW  # D
    n: int = DEFAULT_N
    linear_sdc_support: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", AttentionKind(self.kind))
        if self.window < 1:
            raise ConfigurationError(f"Local window D must be >= 1, got {self.window}")
        if self.n < 1:
            raise ConfigurationError(f"SDC order n must be >= 1, got {self.n}")

    @property
    def local_sigma(self) -> float:
        return self.window / 2.0

    @property
    def syntax_sigma(self) -> float:
        return self.n / 2.0


@dataclass
class AttentionOutput:
    scores: Tensor
    weights: Tensor
    context: Tensor
    position: Optional[Tensor] = None
    support: Optional[np.ndarray] = None
    # Double-context kinds: the second mechanism's output (syntax or local)
    secondary: Optional["AttentionOutput"] = None
    contexts: Dict[str, Tensor] = field(default_factory=dict)


def score(s_prev: TensorLike, H: TensorLike, params: Mapping[str, Tensor]) -> Tensor:
    """Additive scorer e_j = v_a . tanh(W_a s_prev + U_a h_j) for every source position."""
    H = dc.as_tensor(H)
    if H.value.ndim != 2:
        raise DimensionError(f"Encoder annotations must be a J x d matrix, got shape {H.shape}")
    query = dc.matmul(s_prev, params["W_a"])
    keys = dc.matmul(H, params["U_a"])
    return dc.matmul(dc.tanh(dc.add(keys, query)), params["v_a"])


def global_weights(e: TensorLike) -> Tensor:
    return dc.softmax(e)


def context(alpha: TensorLike, H: TensorLike) -> Tensor:
    alpha, H = dc.as_tensor(alpha), dc.as_tensor(H)
    if alpha.value.ndim != 1 or H.value.ndim != 2 or alpha.shape[0] != H.shape[0]:
        raise DimensionError(f"context: weights {alpha.shape} do not match annotations {H.shape}")
    return dc.matmul(alpha, H)


def aligned_position(h_dec: TensorLike, J: int, params: Mapping[str, Tensor]) -> Tensor:
    """p = J * sigmoid(v_p . tanh(W_p h_dec)), a real in [0, J]."""
    inner = dc.matmul(dc.tanh(dc.matmul(h_dec, params["W_p"])), params["v_p"])
    return dc.scalar_mul(dc.sigmoid(inner), J)


def window_positions(p: float, D: int, J: int) -> np.ndarray:
    """Boolean mask of integer j with p - D <= j <= p + D inside [0, J - 1]."""
    j = np.arange(J, dtype=np.float64)
    return (j >= p - D) & (j <= p + D)


def local_weights(alpha: TensorLike, p: TensorLike, D: int, J: int) -> Tensor:
    """alpha_j * exp(-(j - p)^2 / (2 sigma^2)) inside the window, 0 outside; sigma = D / 2. Not renormalised."""
    alpha, p = dc.as_tensor(alpha), dc.as_tensor(p)
    if alpha.shape != (J,):
        raise DimensionError(f"local_weights: weights of shape {alpha.shape} for J={J}")
    sigma = D / 2.0
    positions = np.arange(J, dtype=np.float64)
    offset = dc.sub(positions, p)
    penalty = dc.exp(dc.scalar_mul(dc.mul(offset, offset), -1.0 / (2.0 * sigma * sigma)))
    inside = window_positions(float(p.value), D, J).astype(np.float64)
    return dc.mul(dc.mul(alpha, penalty), inside)


def gaussian_factors(mask_row: np.ndarray, sigma: float) -> np.ndarray:
    d = np.asarray(mask_row, dtype=np.float64)
    return np.exp(-(d * d) / (2.0 * sigma * sigma))


def sdatt_scores(e: TensorLike, mask_row: np.ndarray, sigma: float) -> Tensor:
    """e_j * exp(-M[p][j]^2 / (2 sigma^2)); the raw score is scaled, not the weight."""
    e = dc.as_tensor(e)
    mask_row = np.asarray(mask_row)
    if e.shape != mask_row.shape:
        raise DimensionError(f"sdatt_scores: scores {e.shape} vs mask row {mask_row.shape}")
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    return dc.mul(e, gaussian_factors(mask_row, sigma))


def sdc_support(mask_row: np.ndarray, n: int, p: Optional[float] = None, linear: bool = False) -> np.ndarray:
    """Words within syntax distance n; with `linear`, also within [p - n, p + n]."""
    support = np.asarray(mask_row) <= n
    if linear:
        if p is None:
            raise ConfigurationError("Linear SDC support needs the aligned position p")
        support &= window_positions(p, n, len(mask_row))
    return support


def sdatt_weights(e_s: TensorLike, mask_row: np.ndarray, n: int, support: Optional[np.ndarray] = None) -> Tensor:
    """Softmax of e_s restricted to the n-gram SDC; exactly 0 outside it."""
    e_s = dc.as_tensor(e_s)
    mask_row = np.asarray(mask_row)
    if e_s.shape != mask_row.shape:
        raise DimensionError(f"sdatt_weights: scores {e_s.shape} vs mask row {mask_row.shape}")
    if support is None:
        support = sdc_support(mask_row, n)
    return dc.softmax(dc.masked_fill(e_s, ~support))


def mask_index(p: float, J: int) -> int:
    """Nearest source word to the real-valued aligned position."""
    return min(max(round_half_away(p), 0), J - 1)


def _mask_matrix(mask: Union[np.ndarray, "object"], J: int) -> np.ndarray:
    dist = getattr(mask, "dist", mask)
    dist = np.asarray(dist)
    if dist.shape != (J, J):
        raise DimensionError(f"SDC mask of shape {dist.shape} does not match a {J}-word source")
    return dist


def _syntax_branch(config: AttentionConfig, e: Tensor, H: Tensor, p: Tensor, dist: np.ndarray) -> AttentionOutput:
    J = H.shape[0]
    row = dist[mask_index(float(p.value), J)]
    e_s = sdatt_scores(e, row, config.syntax_sigma)
    support = sdc_support(row, config.n, float(p.value), config.linear_sdc_support)
    alpha_s = sdatt_weights(e_s, row, config.n, support)
    return AttentionOutput(scores=e_s, weights=alpha_s, context=context(alpha_s, H), position=p, support=support)


def _local_branch(config: AttentionConfig, alpha: Tensor, H: Tensor, p: Tensor, e: Tensor) -> AttentionOutput:
    J = H.shape[0]
    alpha_l = local_weights(alpha, p, config.window, J)
    support = window_positions(float(p.value), config.window, J)
    return AttentionOutput(scores=e, weights=alpha_l, context=context(alpha_l, H), position=p, support=support)


def attend(
    config: AttentionConfig,
    s_prev: TensorLike,
    h_dec: TensorLike,
    H: TensorLike,
    params: Mapping[str, Tensor],
    mask=None,
) -> AttentionOutput:
    """One decoder step of attention for the configured kind."""
    kind = config.kind
    H = dc.as_tensor(H)
    J = H.shape[0]
    dist = None
    if kind.uses_syntax:
        if mask is None:
            raise ConfigurationError(f"Attention kind '{kind.value}' needs an SDC mask for the source sentence")
        dist = _mask_matrix(mask, J)

    e = score(s_prev, H, params)
    p = aligned_position(h_dec, J, params) if kind.uses_position else None

    if kind is AttentionKind.SYNTAX:
        out = _syntax_branch(config, e, H, p, dist)
        out.scores = e
        out.contexts = {"L_cs": out.context}
        return out

    alpha = global_weights(e)
    if kind is AttentionKind.LOCAL:
        out = _local_branch(config, alpha, H, p, e)
        out.contexts = {"L_cl": out.context}
        return out

    c_g = context(alpha, H)
    out = AttentionOutput(scores=e, weights=alpha, context=c_g, position=p, support=np.ones(J, dtype=bool))
    if kind is AttentionKind.GLOBAL:
        out.contexts = {"L_cg": c_g}
    elif kind is AttentionKind.DOUBLE:
        out.secondary = _syntax_branch(config, e, H, p, dist)
        out.contexts = {"L_cg": c_g, "L_cs": out.secondary.context}
    else:
        out.secondary = _local_branch(config, alpha, H, p, e)
        out.contexts = {"L_cg": c_g, "L_cl": out.secondary.context}
    return out
