"""
network_model - Representação e solução estática de redes de Jackson abertas

Este módulo cobre:
1. Esforço de serviço φ_j (constante, rampa, linear)
2. Validação da rede (somas de linha, irredutibilidade, estabilidade)
3. Equações de tráfego e taxas de fluxo em equilíbrio ρ_jk
4. Distribuição estacionária em forma-produto (truncada) e amostragem

Convenção: o estado 0 representa "fora da rede"; as filas são 1..J.
Internamente os vetores são indexados de 0 a J-1 (fila j -> índice j-1).
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.special import logsumexp

from .exceptions import (
    ConfigError,
    InvalidLink,
    InvalidServiceEffort,
    NonMonotoneServiceEffort,
    NotIrreducible,
    RowSumViolation,
    SingularSystem,
    Unstable,
    ZeroFlowLink,
)

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
STABILITY_MARGIN = 1e-9
DEFAULT_TAIL_TOL = 1e-12
MAX_TRUNCATION = 10_000_000

Link = Tuple[int, int]


# ---------------------------------------------------------------------------
# Esforço de serviço
# ---------------------------------------------------------------------------

class ServiceEffort:
    """
    Função de esforço de serviço φ(m) de uma fila com m clientes.

    Subclasses implementam `value(m)` para m >= 1 e `sup()`; φ(0) = 0 sempre.
    """

    kind = "abstract"

    def value(self, m: int) -> float:
        raise NotImplementedError

    def sup(self) -> float:
        raise NotImplementedError

    def plateau(self) -> Optional[int]:
        """Menor m a partir do qual φ é constante (None se nunca estabiliza)."""
        raise NotImplementedError

    def __call__(self, m: int) -> float:
        if m <= 0:
            return 0.0
        return self.value(m)

    def values(self, n: int) -> np.ndarray:
        """Vetor (φ(1), ..., φ(n))."""
        return np.array([self.value(m) for m in range(1, n + 1)], dtype=float)

    def to_dict(self) -> Dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantEffort(ServiceEffort):
    """φ(m) = c para m >= 1 (fila ·/M/1)."""

    rate: float
    kind = "constant"

    def value(self, m: int) -> float:
        return self.rate

    def sup(self) -> float:
        return self.rate

    def plateau(self) -> Optional[int]:
        return 1

    def to_dict(self) -> Dict:
        return {"type": "constant", "rate": self.rate}


@dataclass(frozen=True)
class RampEffort(ServiceEffort):
    """φ(1..m*) dados explicitamente, constante igual a φ(m*) depois (·/M/s e afins)."""

    steps: Tuple[float, ...]
    kind = "ramp"

    def value(self, m: int) -> float:
        return self.steps[min(m, len(self.steps)) - 1]

    def sup(self) -> float:
        return self.steps[-1]

    def plateau(self) -> Optional[int]:
        return len(self.steps)

    def to_dict(self) -> Dict:
        return {"type": "ramp", "values": list(self.steps)}


@dataclass(frozen=True)
class LinearEffort(ServiceEffort):
    """φ(m) = c·m (servidores infinitos); sempre estável."""

    rate: float
    kind = "linear"

    def value(self, m: int) -> float:
        return self.rate * m

    def sup(self) -> float:
        return math.inf

    def plateau(self) -> Optional[int]:
        return None

    def to_dict(self) -> Dict:
        return {"type": "linear", "rate": self.rate}


def service_effort_from_dict(data: Dict) -> ServiceEffort:
    """Constrói um ServiceEffort a partir do bloco `service` do arquivo de rede."""
    if not isinstance(data, dict) or "type" not in data:
        raise InvalidServiceEffort("bloco 'service' precisa do campo 'type'")
    kind = data["type"]
    try:
        if kind == "constant":
            return ConstantEffort(float(data["rate"]))
        if kind == "linear":
            return LinearEffort(float(data["rate"]))
        if kind == "ramp":
            steps = tuple(float(v) for v in data["values"])
            if not steps:
                raise InvalidServiceEffort("rampa sem valores")
            return RampEffort(steps)
    except KeyError as e:
        raise InvalidServiceEffort(f"campo ausente {e} no serviço do tipo '{kind}'")
    raise InvalidServiceEffort(f"tipo desconhecido '{kind}' (use constant, ramp ou linear)")


# ---------------------------------------------------------------------------
# Tipos de domínio
# ---------------------------------------------------------------------------

def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ConfigError(f"esperado array com {ndim} dimensão(ões), recebido shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """
    Rede de Jackson aberta com J filas.

    Attributes:
        nu (ndarray): taxas de chegada exógenas ν_j (J,)
        routing (ndarray): probabilidades de roteamento λ_ij (J, J)
        mu (ndarray): probabilidades de saída μ_i (J,)
        phi (tuple): funções de esforço de serviço φ_j
        names (tuple): rótulos opcionais das filas
    """

    nu: np.ndarray
    routing: np.ndarray
    mu: np.ndarray
    phi: Tuple[ServiceEffort, ...]
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nu", _frozen_array(self.nu, 1))
        object.__setattr__(self, "mu", _frozen_array(self.mu, 1))
        object.__setattr__(self, "routing", _frozen_array(self.routing, 2))
        object.__setattr__(self, "phi", tuple(self.phi))
        J = len(self.nu)
        if self.routing.shape != (J, J) or len(self.mu) != J or len(self.phi) != J:
            raise ConfigError(
                f"dimensões inconsistentes: nu={len(self.nu)}, mu={len(self.mu)}, "
                f"routing={self.routing.shape}, service={len(self.phi)}"
            )
        if not self.names:
            object.__setattr__(self, "names", tuple(f"q{j}" for j in range(1, J + 1)))

    @property
    def J(self) -> int:
        return len(self.nu)

    def to_dict(self) -> Dict:
        return {
            "queues": [
                {"name": self.names[i], "nu": float(self.nu[i]), "mu": float(self.mu[i]),
                 "service": self.phi[i].to_dict()}
                for i in range(self.J)
            ],
            "routing": self.routing.tolist(),
        }


@dataclass(frozen=True)
class LinkSet:
    """Conjunto C de links (j, k), 0 = fora; (0, 0) proibido."""

    links: Tuple[Link, ...]

    def __iter__(self):
        return iter(self.links)

    def __len__(self):
        return len(self.links)

    def __contains__(self, link) -> bool:
        return tuple(link) in self.links

    def touches_outside(self) -> bool:
        return any(j == 0 or k == 0 for j, k in self.links)

    def indicator(self, J: int) -> np.ndarray:
        """Matriz booleana (J+1, J+1) com True nas posições (j, k) ∈ C."""
        mask = np.zeros((J + 1, J + 1), dtype=bool)
        for j, k in self.links:
            mask[j, k] = True
        return mask

    def union(self, other: "LinkSet") -> "LinkSet":
        merged = list(self.links) + [l for l in other.links if l not in self.links]
        return LinkSet(tuple(merged))

    def to_list(self) -> List[List[int]]:
        return [[j, k] for j, k in self.links]


@dataclass(frozen=True, eq=False)
class TrafficSolution:
    """
    Solução das equações de tráfego.

    Attributes:
        alpha (ndarray): taxas totais de chegada α_j (J,)
        rho (ndarray): taxas de fluxo ρ_jk sobre estados 0..J, shape (J+1, J+1)
        residual (float): ‖α − ν − λᵀα‖_∞
    """

    alpha: np.ndarray
    rho: np.ndarray
    residual: float

    @property
    def J(self) -> int:
        return len(self.alpha)

    def rho_link(self, j: int, k: int) -> float:
        return float(self.rho[j, k])

    def rho_C(self, links: Iterable[Link]) -> float:
        return float(sum(self.rho[j, k] for j, k in links))

    def flow_imbalance(self) -> np.ndarray:
        """Entrada − saída em cada fila (deve ser ~0)."""
        inflow = self.rho[:, 1:].sum(axis=0)
        outflow = self.rho[1:, :].sum(axis=1)
        return inflow - outflow


@dataclass(frozen=True, eq=False)
class QueueDist:
    """Componente estacionária (truncada) de uma fila."""

    queue: int
    pmf: np.ndarray
    log_normalizer: float
    truncation: int
    tail_bound: float

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer)

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))


@dataclass(frozen=True)
class StationaryDist:
    """Distribuição estacionária em forma-produto: filas independentes."""

    queues: Tuple[QueueDist, ...]

    def mean_queue_length(self, j: int) -> float:
        return self.queues[j - 1].mean()


@dataclass(frozen=True, eq=False)
class ValidatedNetwork:
    """Rede validada, anotada com alcançabilidade e capacidade por fila."""

    spec: NetworkSpec
    traffic: TrafficSolution
    reachable: Tuple[int, ...]
    capacity: Tuple[float, ...]


# ---------------------------------------------------------------------------
# Validação
# ---------------------------------------------------------------------------

def _forward_digraph(spec: NetworkSpec) -> np.ndarray:
    """Matriz de adjacência (J+1, J+1) da cadeia do cliente para frente."""
    J = spec.J
    adj = np.zeros((J + 1, J + 1), dtype=float)
    adj[0, 1:] = spec.nu > 0
    adj[1:, 1:] = spec.routing > 0
    adj[1:, 0] = spec.mu > 0
    return adj


def _check_irreducible(spec: NetworkSpec) -> Tuple[int, ...]:
    adj = _forward_digraph(spec)
    graph = csr_matrix(adj)
    forward = set(breadth_first_order(graph, 0, directed=True, return_predecessors=False))
    backward = set(breadth_first_order(csr_matrix(adj.T), 0, directed=True,
                                       return_predecessors=False))
    bad = [j for j in range(1, spec.J + 1) if j not in forward or j not in backward]
    if bad:
        raise NotIrreducible(bad)
    return tuple(sorted(forward - {0}))


def _check_service_effort(spec: NetworkSpec):
    for idx, phi in enumerate(spec.phi, start=1):
        if isinstance(phi, RampEffort):
            steps = np.array(phi.steps)
            if np.any(np.diff(steps) < 0):
                raise NonMonotoneServiceEffort(idx)
            first = steps[0]
        elif isinstance(phi, (ConstantEffort, LinearEffort)):
            first = phi.rate
        else:
            raise InvalidServiceEffort(f"fila {idx}: tipo {type(phi).__name__} não suportado")
        if not math.isfinite(first) or first <= 0:
            raise InvalidServiceEffort(f"fila {idx}: φ(1) deve ser finito e > 0")


def validate_network(spec: NetworkSpec) -> ValidatedNetwork:
    """
    Valida a rede e a anota com alcançabilidade e estabilidade.

    Args:
        spec (NetworkSpec): rede a validar

    Returns:
        ValidatedNetwork: rede com solução de tráfego e capacidades

    Raises:
        RowSumViolation, NotIrreducible, Unstable, NonMonotoneServiceEffort
    """
    for arr, label in ((spec.nu, "nu"), (spec.mu, "mu"), (spec.routing, "routing")):
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ConfigError(f"'{label}' deve conter apenas valores finitos e não-negativos")
    if spec.nu.sum() <= 0:
        raise ConfigError("soma das taxas exógenas ν deve ser > 0")

    row_sums = spec.routing.sum(axis=1) + spec.mu
    for i, total in enumerate(row_sums, start=1):
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise RowSumViolation(i, float(total))

    _check_service_effort(spec)
    reachable = _check_irreducible(spec)
    traffic = solve_traffic(spec)

    capacity = tuple(phi.sup() for phi in spec.phi)
    for j, (alpha, cap) in enumerate(zip(traffic.alpha, capacity), start=1):
        if math.isfinite(cap) and alpha >= cap * (1 - STABILITY_MARGIN):
            raise Unstable(j, float(alpha), cap)

    logger.info(f"Rede validada: J={spec.J}, Σν={spec.nu.sum():.6g}")
    return ValidatedNetwork(
        spec=spec,
        traffic=traffic,
        reachable=reachable,
        capacity=capacity,
    )


# ---------------------------------------------------------------------------
# Equações de tráfego
# ---------------------------------------------------------------------------

def solve_traffic(spec: NetworkSpec) -> TrafficSolution:
    """
    Resolve α = ν + λᵀα por eliminação densa (LU com pivoteamento parcial).

    Returns:
        TrafficSolution: α, matriz de fluxos ρ e resíduo

    Raises:
        SingularSystem: se (I − λᵀ) for numericamente singular
    """
    J = spec.J
    A = np.eye(J) - spec.routing.T
    try:
        alpha = np.linalg.solve(A, spec.nu)
    except np.linalg.LinAlgError:
        raise SingularSystem("equações de tráfego")
    if not np.all(np.isfinite(alpha)) or np.linalg.cond(A) > 1e14:
        raise SingularSystem("equações de tráfego")

    # Um passo de refinamento iterativo
    alpha = alpha + np.linalg.solve(A, spec.nu - A @ alpha)
    residual = float(np.max(np.abs(alpha - spec.nu - spec.routing.T @ alpha)))

    rho = np.zeros((J + 1, J + 1))
    rho[0, 1:] = spec.nu
    rho[1:, 1:] = alpha[:, None] * spec.routing
    rho[1:, 0] = alpha * spec.mu
    rho.setflags(write=False)
    alpha.setflags(write=False)

    logger.debug(f"Tráfego resolvido: α={np.round(alpha, 6).tolist()}, resíduo={residual:.2e}")
    return TrafficSolution(alpha=alpha, rho=rho, residual=residual)


def all_links(spec: NetworkSpec, traffic: TrafficSolution) -> LinkSet:
    """Conjunto S de todos os links com fluxo positivo."""
    J = spec.J
    links = [(j, k) for j in range(J + 1) for k in range(J + 1)
             if (j, k) != (0, 0) and traffic.rho[j, k] > 0]
    return LinkSet(tuple(links))


def parse_link_set(links: Iterable[Sequence[int]], traffic: TrafficSolution) -> LinkSet:
    """
    Valida uma lista de pares [j, k] e constrói o LinkSet.

    Raises:
        InvalidLink: conjunto vazio, índices fora de faixa ou (0, 0)
        ZeroFlowLink: link sem tráfego
    """
    J = traffic.J
    seen: List[Link] = []
    for raw in links:
        if len(raw) != 2:
            raise InvalidLink(f"link {raw!r} deve ser um par [j, k]")
        j, k = int(raw[0]), int(raw[1])
        if not (0 <= j <= J and 0 <= k <= J):
            raise InvalidLink(f"link ({j},{k}) fora da faixa 0..{J}")
        if (j, k) == (0, 0):
            raise InvalidLink("o link (0,0) não existe")
        if traffic.rho[j, k] <= 0:
            raise ZeroFlowLink(j, k)
        if (j, k) not in seen:
            seen.append((j, k))
    if not seen:
        raise InvalidLink("conjunto de links vazio")
    return LinkSet(tuple(seen))


# ---------------------------------------------------------------------------
# Distribuição estacionária
# ---------------------------------------------------------------------------

def stationary_queue_dist(spec: NetworkSpec, traffic: TrafficSolution, j: int,
                          tail_tol: float = DEFAULT_TAIL_TOL) -> QueueDist:
    """
    Distribuição estacionária truncada da fila j (1-indexada).

    pmf(k) ∝ α_j^k / ∏_{r=1}^k φ_j(r). A série é truncada quando a cauda,
    dominada geometricamente pela razão atual, cai abaixo de tail_tol.

    Raises:
        Unstable: se os termos não decaem
    """
    alpha = float(traffic.alpha[j - 1])
    phi = spec.phi[j - 1]
    if alpha <= 0:
        return QueueDist(queue=j, pmf=np.array([1.0]), log_normalizer=0.0,
                         truncation=0, tail_bound=0.0)

    log_alpha = math.log(alpha)
    plateau = phi.plateau()
    log_terms = [0.0]
    log_running = 0.0
    k = 0
    while True:
        ratio = alpha / phi.value(k + 1)
        if ratio < 1 - STABILITY_MARGIN:
            # cauda depois do termo k <= t_k · r / (1 − r)
            log_tail = log_terms[-1] + math.log(ratio) - math.log1p(-ratio)
            if log_tail - log_running < math.log(tail_tol):
                tail_bound = math.exp(log_tail - log_running)
                break
        elif plateau is not None and k + 1 >= plateau:
            raise Unstable(j, alpha, phi.sup())
        k += 1
        if k > MAX_TRUNCATION:
            raise Unstable(j, alpha, phi.sup())
        log_terms.append(log_terms[-1] + log_alpha - math.log(phi.value(k)))
        log_running = float(np.logaddexp(log_running, log_terms[-1]))

    log_terms = np.array(log_terms)
    log_z = float(logsumexp(log_terms))
    pmf = np.exp(log_terms - log_z)
    pmf.setflags(write=False)
    if tail_bound > 0.1 * tail_tol:
        logger.debug(f"Fila {j}: truncada em K={k}, cauda <= {tail_bound:.2e}")
    return QueueDist(queue=j, pmf=pmf, log_normalizer=log_z, truncation=k, tail_bound=tail_bound)


def stationary_distribution(spec: NetworkSpec, traffic: TrafficSolution,
                            tail_tol: float = DEFAULT_TAIL_TOL) -> StationaryDist:
    """Distribuição estacionária conjunta (produto das componentes)."""
    queues = tuple(stationary_queue_dist(spec, traffic, j, tail_tol)
                   for j in range(1, spec.J + 1))
    return StationaryDist(queues=queues)


def sample_stationary_state(dist: StationaryDist, rng: np.random.Generator) -> np.ndarray:
    """
    Sorteia (n_1, ..., n_J) por CDF inversa, independentemente por fila.

    Args:
        dist (StationaryDist): distribuição estacionária
        rng (Generator): gerador do chamador

    Returns:
        ndarray: estado inicial com inteiros >= 0
    """
    u = rng.random(len(dist.queues))
    state = np.empty(len(dist.queues), dtype=np.int64)
    for idx, (q, ui) in enumerate(zip(dist.queues, u)):
        n = int(np.searchsorted(q.cdf, ui, side="right"))
        state[idx] = min(n, q.truncation)
    return state


# ---------------------------------------------------------------------------
# Arquivo de rede
# ---------------------------------------------------------------------------

def _line_of(text: str, needle: str) -> Optional[int]:
    pos = text.find(needle)
    if pos < 0:
        return None
    return text.count("\n", 0, pos) + 1


def network_from_dict(data: Dict, path: Optional[str] = None, text: str = "") -> NetworkSpec:
    """Constrói NetworkSpec a partir do documento JSON já carregado."""
    if not isinstance(data, dict):
        raise ConfigError("documento de rede deve ser um objeto JSON", path=path)
    for key in ("queues", "routing"):
        if key not in data:
            raise ConfigError(f"campo obrigatório '{key}' ausente", path=path, pointer=key)
    queues = data["queues"]
    nu, mu, phi, names = [], [], [], []
    for i, q in enumerate(queues):
        pointer = f"queues[{i}]"
        try:
            nu.append(float(q["nu"]))
            mu.append(float(q["mu"]))
            phi.append(service_effort_from_dict(q["service"]))
        except KeyError as e:
            raise ConfigError(f"campo {e} ausente", path=path,
                              line=_line_of(text, '"queues"'), pointer=pointer)
        except InvalidServiceEffort as e:
            raise ConfigError(str(e), path=path, line=_line_of(text, '"queues"'),
                              pointer=f"{pointer}.service")
        names.append(str(q.get("name", f"q{i + 1}")))
    routing = data["routing"]
    if len(routing) != len(queues) or any(len(row) != len(queues) for row in routing):
        raise ConfigError(f"'routing' deve ser uma matriz {len(queues)}x{len(queues)}",
                          path=path, line=_line_of(text, '"routing"'), pointer="routing")
    return NetworkSpec(nu=nu, routing=routing, mu=mu, phi=tuple(phi), names=tuple(names))


def load_network(path: Union[str, Path]) -> NetworkSpec:
    """
    Lê o arquivo JSON da rede (formato em docs/network_schema.json).

    Raises:
        ConfigError: arquivo ausente, JSON inválido ou campos ausentes
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("arquivo de rede não encontrado", path=str(path))
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido: {e.msg}", path=str(path), line=e.lineno)
    spec = network_from_dict(data, path=str(path), text=text)
    logger.info(f"Rede carregada de {path}: {spec.J} filas")
    return spec


def routing_row_line(path: Union[str, Path], row: int) -> Optional[int]:
    """Linha aproximada da linha `row` (1-indexada) da matriz de roteamento no arquivo."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        return None
    start = text.find('"routing"')
    if start < 0:
        return None
    depth = 0
    seen = 0
    for pos in range(start, len(text)):
        ch = text[pos]
        if ch == "[":
            depth += 1
            if depth == 2:
                seen += 1
                if seen == row:
                    return text.count("\n", 0, pos) + 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                break
    return None
