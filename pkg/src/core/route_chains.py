"""
route_chains - Cadeias do cliente (para frente e reversa) e estatísticas de laço

Calcula, por sistemas lineares sobre os J+1 estados {fora, 1..J}:
- f(s): probabilidade de a rota restante não cruzar nenhum link de C
- m1(s): número esperado de cruzamentos de C na rota restante
- s2(s): segundo momento fatorial desse número

e a partir deles w_C, ε_C e σ_C para um conjunto de links C. Um oráculo
por enumeração de rotas (agregada por estado e contagem) verifica as
soluções lineares com limite rigoroso de truncamento.

Decomposição usada em link_stats: um cliente cruzando (j, k) tem passado
(cadeia reversa a partir de j) e futuro (cadeia para frente a partir de k)
independentes. Com P = cruzamentos passados, F = futuros e N = 1 + P + F:
    E[N − 1]      = E P + E F
    E[N(N − 1)]   = E P(P−1) + E F(F−1) + 2 E P E F + 2 (E P + E F)
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DepthTooSmall, SingularSystem, ZeroFlowLink
from .network_model import (
    ROW_SUM_TOL,
    Link,
    LinkSet,
    NetworkSpec,
    TrafficSolution,
    parse_link_set,
)

logger = logging.getLogger(__name__)

FORWARD = "forward"
BACKWARD = "backward"
ROW_TOL = ROW_SUM_TOL
COND_LIMIT = 1e14
NO_LOOP_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class RouteChain:
    """
    Cadeia de Markov do percurso de um cliente sobre {0, 1, ..., J}.

    Attributes:
        direction (str): 'forward' ou 'backward'
        P (ndarray): matriz de transição (J+1, J+1), p_00 = 0
    """

    direction: str
    P: np.ndarray

    def __post_init__(self):
        rows = self.P.sum(axis=1)
        # folga de arredondamento da soma além da tolerância de entrada
        tol = ROW_TOL + (self.J + 1) * np.finfo(float).eps
        if np.any(np.abs(rows - 1.0) > tol):
            raise ValueError(f"cadeia {self.direction}: linhas não somam 1 ({rows.tolist()})")

    @property
    def J(self) -> int:
        return self.P.shape[0] - 1

    def crossing_mask(self, C: LinkSet) -> np.ndarray:
        """
        Indicadora de passos que cruzam C.

        Para frente o passo s→l cruza (s, l); na cadeia reversa o passo s→i
        corresponde ao link (i, s) no tempo direto.
        """
        mask = C.indicator(self.J)
        return mask if self.direction == FORWARD else mask.T.copy()

    def transient(self) -> np.ndarray:
        """Bloco Q das transições entre filas (estados 1..J)."""
        return self.P[1:, 1:]


@dataclass(frozen=True, eq=False)
class CrossingMoments:
    """f, m1 e s2 por estado inicial s ∈ {0..J}; o estado 0 é terminal."""

    f: np.ndarray
    m1: np.ndarray
    s2: np.ndarray

    def at(self, s: int) -> Tuple[float, float, float]:
        return float(self.f[s]), float(self.m1[s]), float(self.s2[s])


@dataclass(frozen=True)
class OracleMoments:
    """Momentos de cruzamento por enumeração de rotas a partir de um estado."""

    start: int
    depth: int
    f: float
    m1: float
    s2: float
    residual: float
    f_bound: float
    m1_bound: float
    s2_bound: float


@dataclass(frozen=True)
class LinkMetrics:
    """Quantidades de um link (j, k) ∈ C."""

    w: float
    eps: float
    sigma: float
    rho: float
    future_single: float

    def to_dict(self) -> Dict[str, float]:
        return {"w": self.w, "eps": self.eps, "sigma": self.sigma, "rho": self.rho,
                "future_single": self.future_single}


@dataclass(frozen=True)
class LinkStats:
    """
    Estatísticas de laço de um conjunto C.

    Attributes:
        links (tuple): links de C, na ordem fornecida
        per_link (dict): (j, k) -> LinkMetrics
        w_C, eps_C, sigma_C (float): médias ponderadas por ρ_jk/ρ_C
        rho_C (float): Σ ρ_jk sobre C
        w_lower_bound (float): Σ ρ_jk μ_k / ρ_C
        touches_outside (bool): C contém link de/para fora
    """

    links: Tuple[Link, ...]
    per_link: Dict[Link, LinkMetrics]
    w_C: float
    eps_C: float
    sigma_C: float
    rho_C: float
    w_lower_bound: float
    touches_outside: bool

    @property
    def loop_probability(self) -> float:
        return 1.0 - self.w_C

    @property
    def sigma_extra_C(self) -> float:
        """Segundo momento fatorial das visitas extras, ponderado (σ_C − 2ε_C)."""
        return max(self.sigma_C - 2.0 * self.eps_C, 0.0)

    @property
    def no_loop(self) -> bool:
        return self.eps_C <= NO_LOOP_TOL

    def to_dict(self) -> Dict:
        return {
            "links": [[j, k] for j, k in self.links],
            "per_link": {f"{j},{k}": m.to_dict() for (j, k), m in self.per_link.items()},
            "w_C": self.w_C,
            "eps_C": self.eps_C,
            "sigma_C": self.sigma_C,
            "rho_C": self.rho_C,
            "w_lower_bound": self.w_lower_bound,
            "loop_probability": self.loop_probability,
            "touches_outside": self.touches_outside,
        }


# ---------------------------------------------------------------------------
# Cadeias
# ---------------------------------------------------------------------------

def _frozen(P: np.ndarray) -> np.ndarray:
    P.setflags(write=False)
    return P


def forward_chain(spec: NetworkSpec, traffic: Optional[TrafficSolution] = None) -> RouteChain:
    """Cadeia para frente: p_0k = ν_k/Σν, p_jk = λ_jk, p_j0 = μ_j, p_00 = 0."""
    J = spec.J
    P = np.zeros((J + 1, J + 1))
    P[0, 1:] = spec.nu / spec.nu.sum()
    P[1:, 1:] = spec.routing
    P[1:, 0] = spec.mu
    return RouteChain(FORWARD, _frozen(P))


def backward_chain(spec: NetworkSpec, traffic: TrafficSolution) -> RouteChain:
    """
    Cadeia reversa: p*_0j = μ_jα_j/Σ μ_lα_l, p*_k0 = ν_k/α_k, p*_kj = α_jλ_jk/α_k.

    Equivale a normalizar por linha a transposta da matriz de fluxos ρ.
    """
    flows = traffic.rho.T
    totals = flows.sum(axis=1, keepdims=True)
    P = flows / totals
    P[0, 0] = 0.0
    return RouteChain(BACKWARD, _frozen(P))


def _solve(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if A.size == 0:
        return np.zeros(0)
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise SingularSystem(what)
    if not np.all(np.isfinite(x)) or np.linalg.cond(A) > COND_LIMIT:
        raise SingularSystem(what)
    return x


def crossing_moments(chain: RouteChain, C: LinkSet) -> CrossingMoments:
    """
    Resolve os três sistemas lineares de cruzamento de C.

    f(s)  = Σ_l p_sl 1[passo ∉ C] f(l)
    m1(s) = Σ_l p_sl (1[passo ∈ C] + m1(l))
    s2(s) = Σ_l p_sl (s2(l) + 2·1[passo ∈ C] m1(l))

    com valores terminais f(0) = 1, m1(0) = s2(0) = 0.

    Raises:
        SingularSystem: cadeia que nunca atinge 0
    """
    P = chain.P
    X = chain.crossing_mask(C).astype(float)
    Q = chain.transient()
    XQ = X[1:, 1:]
    I = np.eye(chain.J)

    cross_now = (P[1:, :] * X[1:, :]).sum(axis=1)

    # probabilidade de cruzar C alguma vez; f = 1 − h
    hit = _solve(I - Q * (1.0 - XQ), cross_now, f"hitting de C ({chain.direction})")
    m1 = _solve(I - Q, cross_now, f"m1 ({chain.direction})")
    s2 = _solve(I - Q, 2.0 * (Q * XQ) @ m1, f"s2 ({chain.direction})")

    f_full = np.concatenate(([1.0], np.clip(1.0 - hit, 0.0, 1.0)))
    m1_full = np.concatenate(([0.0], np.maximum(m1, 0.0)))
    s2_full = np.concatenate(([0.0], np.maximum(s2, 0.0)))
    return CrossingMoments(f=f_full, m1=m1_full, s2=s2_full)


def _absorption_moments(Q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """E[L] e E[L²] do número de passos até a absorção (matriz fundamental)."""
    I = np.eye(Q.shape[0])
    t1 = _solve(I - Q, np.ones(Q.shape[0]), "tempo de absorção")
    u = _solve(I - Q, 1.0 + 2.0 * Q @ t1, "segundo momento de absorção")
    return t1, u


def route_oracle(chain: RouteChain, C: LinkSet, start: int, max_depth: int,
                 tol: float = 1e-10) -> OracleMoments:
    """
    Enumera as rotas de comprimento <= max_depth a partir de `start`.

    As rotas são agregadas por (estado atual, cruzamentos até agora), o que
    preserva as probabilidades exatas de cada contagem. A massa não absorvida
    gera limites rigorosos de truncamento usando E[L] e E[L²] do tempo
    restante até a absorção.

    Raises:
        DepthTooSmall: massa residual acima de tol
    """
    if max_depth < 1:
        raise ValueError("max_depth deve ser >= 1")
    if start == 0:
        return OracleMoments(start, max_depth, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    J = chain.J
    P = chain.P
    X = chain.crossing_mask(C)
    width = max_depth + 2
    mass = np.zeros((J + 1, width))
    mass[start, 0] = 1.0
    absorbed = np.zeros(width)

    for _ in range(max_depth):
        nxt = np.zeros_like(mass)
        for s in range(1, J + 1):
            row = mass[s]
            if not row.any():
                continue
            for l in range(J + 1):
                p = P[s, l]
                if p == 0.0:
                    continue
                contrib = p * row
                if X[s, l]:
                    contrib = np.concatenate(([0.0], contrib[:-1]))
                if l == 0:
                    absorbed += contrib
                else:
                    nxt[l] += contrib
        mass = nxt

    residual = float(mass.sum())
    if residual > tol:
        raise DepthTooSmall(max_depth, residual, tol)

    counts = np.arange(width, dtype=float)
    f = float(absorbed[0])
    m1 = float(np.dot(counts, absorbed))
    s2 = float(np.dot(counts * (counts - 1.0), absorbed))

    if residual > 0.0:
        t1, u = _absorption_moments(chain.transient())
        per_state = mass[1:].sum(axis=1)
        c_mass = mass[1:] @ counts
        cc_mass = mass[1:] @ (counts * (counts - 1.0))
        m1_bound = float(c_mass.sum() + per_state @ t1)
        s2_bound = float(cc_mass.sum() + 2.0 * c_mass @ t1 + per_state @ u)
    else:
        m1_bound = s2_bound = 0.0

    return OracleMoments(start=start, depth=max_depth, f=f, m1=m1, s2=s2, residual=residual,
                         f_bound=residual, m1_bound=m1_bound, s2_bound=s2_bound)


# ---------------------------------------------------------------------------
# Estatísticas por link
# ---------------------------------------------------------------------------

def link_stats(spec: NetworkSpec, traffic: TrafficSolution,
               C: Union[LinkSet, Iterable[Sequence[int]]]) -> LinkStats:
    """
    Calcula w_C(jk), ε_C(jk), σ_C(jk) e os agregados ponderados por ρ.

    Para (j, k) ∈ C, o futuro vem da cadeia para frente em k e o passado da
    cadeia reversa em j. Em (0, k) o passado não contribui; em (j, 0) o
    futuro não contribui.

    Raises:
        ZeroFlowLink: link de C com ρ_jk = 0
    """
    if not isinstance(C, LinkSet):
        C = parse_link_set(C, traffic)
    for j, k in C:
        if traffic.rho[j, k] <= 0:
            raise ZeroFlowLink(j, k)

    fwd = crossing_moments(forward_chain(spec, traffic), C)
    bwd = crossing_moments(backward_chain(spec, traffic), C)

    per_link: Dict[Link, LinkMetrics] = {}
    for j, k in C:
        f_past, m_past, s_past = bwd.at(j)
        f_fut, m_fut, s_fut = fwd.at(k)
        eps = m_past + m_fut
        sigma = s_past + s_fut + 2.0 * m_past * m_fut + 2.0 * eps
        per_link[(j, k)] = LinkMetrics(
            w=f_past * f_fut,
            eps=eps,
            sigma=sigma,
            rho=traffic.rho_link(j, k),
            future_single=f_fut,
        )

    rho_C = traffic.rho_C(C)
    weights = {link: m.rho / rho_C for link, m in per_link.items()}
    w_C = sum(weights[l] * m.w for l, m in per_link.items())
    eps_C = sum(weights[l] * m.eps for l, m in per_link.items())
    sigma_C = sum(weights[l] * m.sigma for l, m in per_link.items())

    exit_prob = np.concatenate(([1.0], spec.mu))
    w_lower = sum(weights[(j, k)] * exit_prob[k] for j, k in C)

    if C.touches_outside():
        logger.warning("C contém links de/para fora: convenção de fronteira em uso "
                       "(passado de (0,k) e futuro de (j,0) não contribuem)")
    logger.info(f"Estatísticas de C={list(C.links)}: w_C={w_C:.6g}, ε_C={eps_C:.6g}, "
                f"σ_C={sigma_C:.6g}, ρ_C={rho_C:.6g}")
    return LinkStats(
        links=C.links,
        per_link=per_link,
        w_C=float(min(w_C, 1.0)),
        eps_C=float(eps_C),
        sigma_C=float(sigma_C),
        rho_C=rho_C,
        w_lower_bound=float(w_lower),
        touches_outside=C.touches_outside(),
    )
