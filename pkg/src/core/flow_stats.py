"""
flow_stats - Distribuições empíricas das contagens de fluxo

Funções para:
1. pmf empírica e pmfs de referência com massa de cauda registrada
2. Momentos (média, variância, fatoriais Ξ[2], Ξ[3]) com erros-padrão jackknife
3. Teste de sobredispersão por bootstrap percentil
4. Distância de variação total (valor pontual + limite superior com caudas)
5. Estimativa de d_TV(Ξ, Ξ+1)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InsufficientSamples, ZeroMean
from .simulator import CountSamples

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9
DEFAULT_RESAMPLES = 1000
DEFAULT_LEVEL = 0.95

OVER_DISPERSED = "over-dispersed"
CONSISTENT_WITH_POISSON = "consistent-with-Poisson"
UNDER_DISPERSED_ANOMALY = "under-dispersed-anomaly"

SampleLike = Union[CountSamples, Sequence[int], np.ndarray]


@dataclass(frozen=True, eq=False)
class Pmf:
    """
    pmf sobre inteiros consecutivos a partir de `offset`.

    Attributes:
        offset (int): primeiro ponto do suporte
        probs (ndarray): probabilidades de offset, offset+1, ...
        tail (float): massa não representada (cauda truncada)
    """

    offset: int
    probs: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("pmf precisa de um vetor de probabilidades não vazio")
        if np.any(probs < -1e-15):
            raise ValueError("pmf com probabilidade negativa")
        probs = np.clip(probs, 0.0, None)
        total = probs.sum() + self.tail
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"massa total {total:.12g} fora de [1−1e-9, 1+1e-9]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def last(self) -> int:
        return self.offset + len(self.probs) - 1

    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self.probs))

    def prob(self, k: int) -> float:
        idx = k - self.offset
        if 0 <= idx < len(self.probs):
            return float(self.probs[idx])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.support(), self.probs) / self.probs.sum())

    def variance(self) -> float:
        k = self.support().astype(float)
        w = self.probs / self.probs.sum()
        m = np.dot(k, w)
        return float(np.dot((k - m) ** 2, w))

    def shifted(self, n: int) -> "Pmf":
        return Pmf(self.offset + n, self.probs, self.tail)

    def to_rows(self) -> List[Tuple[int, float]]:
        return [(int(k), float(p)) for k, p in zip(self.support(), self.probs)]

    def to_dict(self) -> Dict:
        return {"offset": self.offset, "probs": self.probs.tolist(), "tail": self.tail}


def align(p: Pmf, q: Pmf) -> Tuple[int, np.ndarray, np.ndarray]:
    """Coloca duas pmfs sobre a união dos suportes."""
    lo = min(p.offset, q.offset)
    hi = max(p.last, q.last)
    a = np.zeros(hi - lo + 1)
    b = np.zeros(hi - lo + 1)
    a[p.offset - lo:p.last - lo + 1] = p.probs
    b[q.offset - lo:q.last - lo + 1] = q.probs
    return lo, a, b


@dataclass(frozen=True)
class MomentSummary:
    """
    Resumo de momentos de Ξ_{C,t}.

    Os erros-padrão são jackknife (None quando não há amostras suficientes
    ou quando o resumo vem do modo assintótico).
    """

    n: int
    mean: float
    variance: float
    fact2: float
    fact3: float
    se_mean: Optional[float] = None
    se_variance: Optional[float] = None
    se_fact2: Optional[float] = None
    se_fact3: Optional[float] = None
    source: str = "empirical"
    values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> Dict:
        return {
            "n": self.n, "mean": self.mean, "variance": self.variance,
            "fact2": self.fact2, "fact3": self.fact3,
            "se_mean": self.se_mean, "se_variance": self.se_variance,
            "se_fact2": self.se_fact2, "se_fact3": self.se_fact3,
            "source": self.source,
        }


@dataclass(frozen=True)
class DispersionResult:
    """Razão variância/média com IC bootstrap e veredito."""

    ratio: float
    ci_low: float
    ci_high: float
    verdict: str
    resamples: int
    level: float

    def to_dict(self) -> Dict:
        return {"ratio": self.ratio, "ci": [self.ci_low, self.ci_high],
                "verdict": self.verdict, "resamples": self.resamples, "level": self.level}


@dataclass(frozen=True)
class TVResult:
    """Distância de variação total: valor pontual e limite superior com caudas."""

    value: float
    upper: float

    def to_dict(self) -> Dict:
        return {"value": self.value, "upper": self.upper}


def _values(samples: SampleLike) -> np.ndarray:
    if isinstance(samples, CountSamples):
        return np.asarray(samples.samples, dtype=np.int64)
    return np.asarray(samples, dtype=np.int64).ravel()


# ---------------------------------------------------------------------------
# Operações
# ---------------------------------------------------------------------------

def empirical_pmf(samples: SampleLike) -> Pmf:
    """
    Frequências relativas sobre o suporte observado.

    Args:
        samples: CountSamples ou vetor de inteiros

    Returns:
        Pmf: pmf empírica (cauda 0)
    """
    values = _values(samples)
    if values.size == 0:
        raise InsufficientSamples(1, 0)
    lo = int(values.min())
    counts = np.bincount(values - lo)
    return Pmf(lo, counts / values.size, 0.0)


def pmf_from_counts(values: Sequence[int]) -> Pmf:
    """Atalho de empirical_pmf para vetores simples."""
    return empirical_pmf(np.asarray(values))


def jackknife_se(loo: np.ndarray) -> float:
    """Erro-padrão jackknife a partir das estimativas leave-one-out."""
    n = loo.size
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


@dataclass(frozen=True)
class LeaveOneOut:
    """Estimativas leave-one-out de média, variância e momentos fatoriais."""

    mean: np.ndarray
    variance: Optional[np.ndarray]
    fact2: np.ndarray
    fact3: np.ndarray


def leave_one_out(values: np.ndarray) -> LeaveOneOut:
    """
    Estimativas leave-one-out em forma fechada a partir das somas totais.

    A variância leave-one-out exige n >= 3 (None caso contrário).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientSamples(2, n)
    g2 = x * (x - 1.0)
    g3 = g2 * (x - 2.0)
    s1, s2, s3 = x.sum(), g2.sum(), g3.sum()
    variance = None
    if n >= 3:
        loo_s = s1 - x
        variance = (np.dot(x, x) - x * x - loo_s * loo_s / (n - 1)) / (n - 2)
    return LeaveOneOut(mean=(s1 - x) / (n - 1), variance=variance,
                       fact2=(s2 - g2) / (n - 1), fact3=(s3 - g3) / (n - 1))


def moments(samples: SampleLike) -> MomentSummary:
    """
    Média, variância não-viesada e momentos fatoriais (plug-in) com SE jackknife.

    Raises:
        InsufficientSamples: menos de 2 amostras
    """
    values = _values(samples)
    n = values.size
    if n < 2:
        raise InsufficientSamples(2, n)
    x = values.astype(float)
    g2 = x * (x - 1.0)
    s1 = x.sum()

    mean = s1 / n
    variance = max((np.dot(x, x) - s1 * s1 / n) / (n - 1), 0.0)
    fact2 = g2.sum() / n
    fact3 = np.dot(g2, x - 2.0) / n

    loo = leave_one_out(x)
    se_variance = jackknife_se(loo.variance) if loo.variance is not None else None

    return MomentSummary(
        n=n,
        mean=float(mean),
        variance=float(variance),
        fact2=float(fact2),
        fact3=float(fact3),
        se_mean=jackknife_se(loo.mean),
        se_variance=se_variance,
        se_fact2=jackknife_se(loo.fact2),
        se_fact3=jackknife_se(loo.fact3),
        source="empirical",
        values=values,
    )


def overdispersion_test(summary: MomentSummary, resamples: int = DEFAULT_RESAMPLES,
                        seed: int = 0, level: float = DEFAULT_LEVEL) -> DispersionResult:
    """
    Razão variância/média com IC bootstrap percentil.

    O bootstrap reamostra as réplicas; para dados inteiros isso equivale a
    sortear contagens multinomiais sobre o suporte observado.

    Returns:
        DispersionResult: veredito 'over-dispersed' (IC acima de 1),
        'consistent-with-Poisson' (IC contém 1) ou 'under-dispersed-anomaly'

    Raises:
        ZeroMean: média amostral 0
        InsufficientSamples: resumo sem as amostras originais
    """
    if summary.mean <= 0:
        raise ZeroMean()
    if summary.values is None:
        raise InsufficientSamples(2, 0)
    ratio = summary.variance / summary.mean

    values = summary.values
    n = values.size
    support, counts = np.unique(values, return_counts=True)
    u = support.astype(float)
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(n, counts / n, size=resamples).astype(float)
    boot_mean = draws @ u / n
    boot_var = (draws @ (u * u) - n * boot_mean ** 2) / (n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        boot_ratio = np.where(boot_mean > 0, np.maximum(boot_var, 0.0) / boot_mean, np.nan)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.nanpercentile(boot_ratio, [100 * alpha, 100 * (1 - alpha)])

    if lo > 1.0:
        verdict = OVER_DISPERSED
    elif hi < 1.0:
        verdict = UNDER_DISPERSED_ANOMALY
        logger.warning(f"Razão variância/média {ratio:.4f} abaixo de 1: verifique a simulação")
    else:
        verdict = CONSISTENT_WITH_POISSON
    logger.info(f"Sobredispersão: razão={ratio:.4f}, IC=[{lo:.4f}, {hi:.4f}] -> {verdict}")
    return DispersionResult(float(ratio), float(lo), float(hi), verdict, resamples, level)


def tv_distance(p: Pmf, q: Pmf) -> TVResult:
    """
    d_TV = (1/2) Σ |p_i − q_i| sobre a união dos suportes.

    O limite superior soma metade das massas de cauda não representadas.
    """
    _, a, b = align(p, q)
    value = 0.5 * float(np.abs(a - b).sum())
    upper = min(1.0, value + 0.5 * (p.tail + q.tail))
    return TVResult(value=min(value, 1.0), upper=upper)


def shift_tv(samples: SampleLike) -> float:
    """
    Estimativa de d_TV(Ξ, Ξ+1) a partir da pmf empírica.

    Raises:
        InsufficientSamples: menos de 2 amostras
    """
    values = _values(samples)
    if values.size < 2:
        raise InsufficientSamples(2, values.size)
    p = empirical_pmf(values)
    return tv_distance(p, p.shifted(1)).value


def tv_noise_floor(p: Pmf, n: int) -> float:
    """Ruído típico de Monte Carlo do TV empírico: Σ √(p_i (1−p_i) / n) / 2."""
    probs = p.probs
    return float(0.5 * np.sum(np.sqrt(probs * (1.0 - probs) / n)))
