"""
nb_stein - Binomial negativa, Poisson e limites de erro da aproximação

Este módulo transforma as conclusões quantitativas da aproximação binomial
negativa do fluxo Ξ_{C,t} em funções:
1. NB(r, q) por casamento de média e variância (com recuo para Poisson)
2. pmfs NB e Poisson truncadas com cauda registrada
3. Limite simplificado (2ε_C² + σ_C)/√(2e w_C ρ_C t)
4. Limite completo a partir de Var, Ξ[2], Ξ[3]
5. Limite de deslocamento d_TV(Ξ, Ξ+1) <= 1/√(2e w_C ρ_C t)
6. Intervalos para o tamanho médio de cluster e para θ_{C,t}
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.stats import nbinom, poisson

from .exceptions import NonpositiveDenominator, NonpositiveMean
from .flow_stats import MomentSummary, Pmf, jackknife_se, leave_one_out
from .route_chains import LinkStats

logger = logging.getLogger(__name__)

POISSON_DELTA = 1e-6
PMF_MASS = 1.0 - 1e-12
EMPIRICAL = "empirical"
ASYMPTOTIC = "asymptotic"


@dataclass(frozen=True)
class NBParams:
    """NB(r, q): π_i = Γ(r+i)/(Γ(r) i!) q^r (1−q)^i."""

    r: float
    q: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError(f"r deve ser positivo e finito (recebido {self.r})")
        if not 0 < self.q < 1:
            raise ValueError(f"q deve estar em (0, 1) (recebido {self.q})")

    @property
    def mean(self) -> float:
        return self.r * (1 - self.q) / self.q

    @property
    def variance(self) -> float:
        return self.r * (1 - self.q) / self.q ** 2

    def to_dict(self) -> Dict:
        return {"family": "negative_binomial", "r": self.r, "q": self.q,
                "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class PoissonFallback:
    """Regime degenerado (sem sobredispersão): a NB se reduz a Poisson."""

    mean: float

    @property
    def variance(self) -> float:
        return self.mean

    def to_dict(self) -> Dict:
        return {"family": "poisson", "mean": self.mean}


Approximant = Union[NBParams, PoissonFallback]


@dataclass(frozen=True)
class FullBound:
    """Limite completo avaliado com momentos plug-in."""

    value: float
    se: Optional[float]
    bracket: float
    clamped: bool = False

    def to_dict(self) -> Dict:
        return {"value": self.value, "se": self.se, "bracket": self.bracket,
                "clamped": self.clamped, "mode": "empirical-moment"}


@dataclass(frozen=True)
class ClusterBounds:
    """Intervalos [ρ_C t/(1+ε_C), ρ_C t] para θ e [1, 1+ε_C] para o tamanho de cluster."""

    theta: Tuple[float, float]
    cluster_size: Tuple[float, float]

    def to_dict(self) -> Dict:
        return {"theta_bounds": list(self.theta), "cluster_size_bounds": list(self.cluster_size)}


@dataclass(frozen=True)
class BoundReport:
    """Todos os limites de um cenário, com as entradas ecoadas."""

    bound_simplified: float
    bound_full: Optional[FullBound]
    shift_bound: float
    clusters: ClusterBounds
    inputs: Dict[str, float]
    variance_mode: str = EMPIRICAL
    notes: List[str] = field(default_factory=list)

    @property
    def theta_bounds(self) -> Tuple[float, float]:
        return self.clusters.theta

    @property
    def cluster_size_bounds(self) -> Tuple[float, float]:
        return self.clusters.cluster_size

    def to_dict(self) -> Dict:
        return {
            "bound_simplified": self.bound_simplified,
            "bound_full": self.bound_full.to_dict() if self.bound_full else None,
            "shift_bound": self.shift_bound,
            **self.clusters.to_dict(),
            "inputs": dict(self.inputs),
            "variance_mode": self.variance_mode,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# Parâmetros e pmfs
# ---------------------------------------------------------------------------

def nb_params_from_moments(mean: float, variance: float,
                           delta: float = POISSON_DELTA) -> Approximant:
    """
    Casa média e variância: q = média/variância, r = média²/(variância − média).

    Returns:
        NBParams, ou PoissonFallback quando variância <= média·(1+δ)

    Raises:
        NonpositiveMean: média <= 0
    """
    if not mean > 0:
        raise NonpositiveMean(mean)
    if variance > mean * (1.0 + delta):
        return NBParams(r=mean * mean / (variance - mean), q=mean / variance)
    logger.warning(f"Variância {variance:.6g} <= média·(1+δ): usando Poisson({mean:.6g})")
    return PoissonFallback(mean)


def nb_pmf(params: NBParams, support: Optional[int] = None) -> Pmf:
    """
    pmf NB(r, q) em 0..K pela recorrência π_{i+1}/π_i = (r+i)(1−q)/(i+1), π_0 = q^r.

    Args:
        params (NBParams): parâmetros
        support (int): último ponto K; por padrão o quantil 1−1e-12

    Returns:
        Pmf: com a massa de cauda P(X > K) registrada
    """
    r, q = params.r, params.q
    if support is None:
        support = int(nbinom.ppf(PMF_MASS, r, q))
    K = max(int(support), 0)
    i = np.arange(K, dtype=float)
    log_ratio = np.log(r + i) - np.log(i + 1.0) + math.log1p(-q)
    log_pi = r * math.log(q) + np.concatenate(([0.0], np.cumsum(log_ratio)))
    probs = np.exp(log_pi)
    tail = float(nbinom.sf(K, r, q))
    return Pmf(0, probs, tail)


def poisson_pmf(mean: float, support: Optional[int] = None) -> Pmf:
    """pmf Poisson(mean) em 0..K com cauda registrada."""
    if not mean > 0:
        raise NonpositiveMean(mean)
    if support is None:
        support = int(poisson.ppf(PMF_MASS, mean))
    K = max(int(support), 0)
    probs = poisson.pmf(np.arange(K + 1), mean)
    return Pmf(0, probs, float(poisson.sf(K, mean)))


def approximant_pmf(model: Approximant) -> Pmf:
    """pmf do modelo escolhido (NB ou Poisson)."""
    if isinstance(model, NBParams):
        return nb_pmf(model)
    return poisson_pmf(model.mean)


# ---------------------------------------------------------------------------
# Limites
# ---------------------------------------------------------------------------

def _scale(w_C: float, rho_C: float, t: float) -> float:
    for value, name in ((w_C, "w_C"), (rho_C, "ρ_C"), (t, "t")):
        if not value > 0:
            raise NonpositiveDenominator(name)
    return math.sqrt(2.0 * math.e * w_C * rho_C * t)


def bound_simplified(eps_C: float, sigma_C: float, w_C: float, rho_C: float, t: float) -> float:
    """(2ε_C² + σ_C)/√(2e·w_C·ρ_C·t)."""
    if eps_C < 0 or sigma_C < 0:
        raise ValueError("ε_C e σ_C devem ser não-negativos")
    return (2.0 * eps_C * eps_C + sigma_C) / _scale(w_C, rho_C, t)


def shift_bound(w_C: float, rho_C: float, t: float) -> float:
    """1/√(2e·w_C·ρ_C·t)."""
    return 1.0 / _scale(w_C, rho_C, t)


def _bracket(variance, fact2, fact3, m: float):
    excess = variance - m
    return 2.0 * excess ** 2 + m * (fact3 - m * fact2 - 2.0 * m * excess)


def bound_full(summary: MomentSummary, w_C: float, rho_C: float, t: float) -> FullBound:
    """
    Limite completo com momentos plug-in (modo de momentos empíricos).

    {2(Var − m)² + m(Ξ[3] − mΞ[2] − 2m(Var − m))} / (m²√(2e w_C m)), m = ρ_C t.

    O erro-padrão é o jackknife do próprio colchete, recalculado sem cada
    réplica; sem as amostras originais (modo assintótico) ele é None.
    Colchete negativo é truncado em 0 com aviso.
    """
    scale = _scale(w_C, rho_C, t)
    m = rho_C * t
    bracket = _bracket(summary.variance, summary.fact2, summary.fact3, m)
    denom = m * m * scale

    se = None
    se_bracket = None
    if summary.values is not None and summary.values.size >= 3:
        loo = leave_one_out(summary.values)
        se_bracket = jackknife_se(_bracket(loo.variance, loo.fact2, loo.fact3, m))
        se = se_bracket / denom

    if bracket < 0:
        if se_bracket is not None and -bracket <= se_bracket:
            logger.warning(f"Colchete do limite completo negativo ({bracket:.4g}) dentro do "
                           f"erro-padrão; truncado em 0")
        else:
            logger.error(f"Colchete do limite completo negativo ({bracket:.4g}) além do "
                         f"erro-padrão: momentos inconsistentes; truncado em 0")
        return FullBound(value=0.0, se=se, bracket=bracket, clamped=True)
    return FullBound(value=bracket / denom, se=se, bracket=bracket, clamped=False)


def cluster_bounds(eps_C: float, rho_C: float, t: float) -> ClusterBounds:
    """1 <= E η_0 <= 1+ε_C e ρ_C t/(1+ε_C) <= θ_{C,t} <= ρ_C t."""
    if eps_C < 0:
        raise ValueError("ε_C deve ser não-negativo")
    m = rho_C * t
    if not m > 0:
        raise NonpositiveDenominator("ρ_C·t")
    return ClusterBounds(theta=(m / (1.0 + eps_C), m), cluster_size=(1.0, 1.0 + eps_C))


def asymptotic_moments(stats: LinkStats, t: float) -> MomentSummary:
    """
    Momentos substitutos para t grande.

    Var ≈ ρ_C t (1+ε_C); Ξ[3] segue da identidade de Palm com o segundo
    momento fatorial das visitas extras (σ_C − 2ε_C).
    """
    m = stats.rho_C * t
    variance = m * (1.0 + stats.eps_C)
    fact2 = variance + m * m - m
    fact3 = m * fact2 + 2.0 * m * (variance - m) + stats.sigma_extra_C * m
    return MomentSummary(n=0, mean=m, variance=variance, fact2=fact2, fact3=fact3,
                         source=ASYMPTOTIC)


def bound_report(stats: LinkStats, t: float, summary: Optional[MomentSummary] = None,
                 variance_mode: str = EMPIRICAL) -> BoundReport:
    """
    Monta o BoundReport de um cenário.

    Args:
        stats (LinkStats): w_C, ε_C, σ_C, ρ_C
        t (float): janela
        summary (MomentSummary): momentos para o limite completo (opcional)
        variance_mode (str): 'empirical' ou 'asymptotic'
    """
    notes: List[str] = []
    simplified = bound_simplified(stats.eps_C, stats.sigma_C, stats.w_C, stats.rho_C, t)
    full = bound_full(summary, stats.w_C, stats.rho_C, t) if summary is not None else None
    if stats.no_loop:
        notes.append("Poisson exact (Melamed): loop probability 0, bound 0")
    if stats.touches_outside:
        notes.append("C touches outside links: boundary-link convention applied to w_C")
    if variance_mode == ASYMPTOTIC:
        notes.append("asymptotic variance mode: Var ~ rho_C t (1+eps_C), upper-bound surrogate")
    if full is not None and full.clamped:
        notes.append("bound_full bracket negative under sampling noise, clamped to 0")
    return BoundReport(
        bound_simplified=simplified,
        bound_full=full,
        shift_bound=shift_bound(stats.w_C, stats.rho_C, t),
        clusters=cluster_bounds(stats.eps_C, stats.rho_C, t),
        inputs={"eps_C": stats.eps_C, "sigma_C": stats.sigma_C, "w_C": stats.w_C,
                "rho_C": stats.rho_C, "t": t},
        variance_mode=variance_mode,
        notes=notes,
    )
