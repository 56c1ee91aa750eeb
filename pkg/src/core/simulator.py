"""
simulator - Simulação de eventos discretos da rede de Jackson em equilíbrio

Este módulo implementa:
1. Motor da cadeia de Markov de tempo contínuo com identidade de clientes
2. Janela [0, t] a partir do estado estacionário, registrando cruzamentos de C
3. Réplicas independentes com fluxos de números aleatórios por réplica
4. Diagnóstico de clusters (clientes distintos que cruzam C)
5. Execução longa para ocupação média e taxas por link

Na conclusão de serviço da fila j, um residente é escolhido uniformemente
ao acaso e roteado por λ_j· / μ_j. Clientes presentes em t = 0 não têm
passado sintético.
"""

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .exceptions import SimulationOverflow, TrackingDisabled
from .network_model import (
    DEFAULT_TAIL_TOL,
    Link,
    LinkSet,
    NetworkSpec,
    StationaryDist,
    TrafficSolution,
    sample_stationary_state,
    stationary_distribution,
)

logger = logging.getLogger(__name__)

THREADS_ENV = "JACKSON_FLOWS_THREADS"
DEFAULT_MAX_EVENTS = 100_000_000
UNIFORM_BLOCK = 8192

Event = Tuple[float, int, int, int]


@dataclass(frozen=True)
class SimConfig:
    """
    Parâmetros de simulação.

    Attributes:
        t (float): comprimento da janela
        n_replicates (int): número de réplicas
        base_seed (int): semente base de 64 bits
        customer_tracking (bool): registrar identidade dos clientes
        warmup (str): 'stationary-init' (estado inicial estacionário) ou 'none' (rede vazia)
        max_events (int): limite de eventos por réplica
        threads (int): limite de concorrência (None usa JACKSON_FLOWS_THREADS ou cpu_count)
    """

    t: float
    n_replicates: int = 1
    base_seed: int = 0
    customer_tracking: bool = True
    warmup: str = "stationary-init"
    max_events: int = DEFAULT_MAX_EVENTS
    threads: Optional[int] = None
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError(f"t deve ser positivo e finito (recebido {self.t})")
        if self.n_replicates < 1:
            raise ValueError(f"n_replicates deve ser >= 1 (recebido {self.n_replicates})")
        if self.warmup not in ("stationary-init", "none"):
            raise ValueError(f"warmup inválido: {self.warmup!r}")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ValueError("base_seed deve caber em 64 bits sem sinal")


@dataclass
class FlowTrace:
    """
    Realização do processo de fluxo sobre C em [0, t].

    Attributes:
        events (list): (tempo, j, k, id do cliente) em ordem temporal
        count (int): Ξ_{C,t}
        per_customer (dict): id -> cruzamentos na janela
        link_counts (dict): (j, k) -> cruzamentos na janela
    """

    t: float
    links: Tuple[Link, ...]
    events: List[Event]
    count: int
    per_customer: Dict[int, int]
    link_counts: Dict[Link, int]
    initial_customers: int
    n_events: int
    tracking: bool = True
    replicate_index: int = 0

    @property
    def distinct_customers(self) -> int:
        return len(self.per_customer)


@dataclass(frozen=True)
class ClusterSummary:
    """Diagnóstico de clusters de uma janela (M̂, tamanho médio e máximo)."""

    distinct_customers: int
    mean_size: float
    max_size: int

    def to_dict(self) -> Dict:
        return {"distinct_customers": self.distinct_customers,
                "mean_size": self.mean_size, "max_size": self.max_size}


@dataclass
class CountSamples:
    """
    Amostras de Ξ_{C,t} sobre as réplicas.

    Attributes:
        samples (ndarray): contagens por réplica
        clusters (list): ClusterSummary por réplica (vazia sem rastreamento)
        seeds (list): (base_seed, replicate_index) de cada réplica
        per_link (ndarray): contagens por link de C, shape (n, |C|)
    """

    t: float
    links: Tuple[Link, ...]
    samples: np.ndarray
    clusters: List[ClusterSummary]
    seeds: List[Tuple[int, int]]
    per_link: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))

    def __len__(self):
        return len(self.samples)

    def mean_cluster_size(self) -> float:
        """Média entre réplicas do tamanho médio de cluster (réplicas com M̂ > 0)."""
        sizes = [c.mean_size for c in self.clusters if c.distinct_customers > 0]
        return float(np.mean(sizes)) if sizes else 0.0


@dataclass
class OccupancyProfile:
    """Resultado de uma execução longa: ocupação média no tempo e taxas por link."""

    time: float
    n_events: int
    occupancy: List[np.ndarray]
    link_counts: np.ndarray

    @property
    def link_rates(self) -> np.ndarray:
        return self.link_counts / self.time


# ---------------------------------------------------------------------------
# Números aleatórios
# ---------------------------------------------------------------------------

def make_rng(base_seed: int, replicate_index: int) -> np.random.Generator:
    """Fluxo Philox (baseado em contador) com chave (base_seed, replicate_index)."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(replicate_index),))
    return np.random.Generator(np.random.Philox(seq))


class _UniformStream:
    """Uniformes em blocos para reduzir o custo por evento."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buffer = rng.random(UNIFORM_BLOCK)
        self.pos = 0

    def next(self) -> float:
        if self.pos == UNIFORM_BLOCK:
            self.buffer = self.rng.random(UNIFORM_BLOCK)
            self.pos = 0
        u = self.buffer[self.pos]
        self.pos += 1
        return float(u)


# ---------------------------------------------------------------------------
# Motor
# ---------------------------------------------------------------------------

class JacksonSimulator:
    """
    Motor de eventos da CTMC de Jackson.

    Taxas: chegada ν_j, conclusão φ_j(n_j); o relógio de permanência é
    sorteado de novo após cada salto (falta de memória).

    Attributes:
        residents (list): por fila, ids dos residentes (vazia sem rastreamento)
        counts (list): n_j atual por fila
    """

    def __init__(self, spec: NetworkSpec, rng: np.random.Generator,
                 initial_state: Optional[np.ndarray] = None, tracking: bool = True):
        self.logger = logging.getLogger(__name__)
        self.spec = spec
        self.J = spec.J
        self.uniforms = _UniformStream(rng)
        self.tracking = tracking

        self.arrival_rate = float(spec.nu.sum())
        self.arrival_cdf = np.cumsum(spec.nu / self.arrival_rate).tolist()
        # destinos por fila: 1..J e depois 0 (saída)
        self.route_cdf = [
            np.cumsum(np.concatenate((spec.routing[i], [spec.mu[i]]))).tolist()
            for i in range(self.J)
        ]
        self.phi = spec.phi

        if initial_state is None:
            initial_state = np.zeros(self.J, dtype=np.int64)
        self.counts = [int(n) for n in initial_state]
        self.next_id = 0
        self.residents: List[List[int]] = [[] for _ in range(self.J)]
        if tracking:
            for i, n in enumerate(self.counts):
                self.residents[i] = list(range(self.next_id, self.next_id + n))
                self.next_id += n
        self.initial_customers = sum(self.counts)
        self.service_rates = [self.phi[i](self.counts[i]) for i in range(self.J)]
        self.total_rate = self.arrival_rate + sum(self.service_rates)
        self.logger.debug(f"Motor iniciado: estado {self.counts}, "
                          f"taxa total {self.total_rate:.6g}, rastreamento={tracking}")

    @staticmethod
    def _pick(cdf: List[float], u: float) -> int:
        for idx, c in enumerate(cdf):
            if u < c:
                return idx
        return len(cdf) - 1

    def _set_count(self, i: int, n: int):
        self.counts[i] = n
        self.service_rates[i] = self.phi[i](n)
        self.total_rate = self.arrival_rate + sum(self.service_rates)

    def holding_time(self) -> float:
        """Sorteia o tempo até o próximo evento a partir do estado atual."""
        return -math.log(1.0 - self.uniforms.next()) / self.total_rate

    def fire(self) -> Tuple[int, int, int]:
        """
        Escolhe e aplica o próximo evento.

        Returns:
            tuple: (j, k, id) do link cruzado, com 0 = fora; id = -1 sem rastreamento
        """
        x = self.uniforms.next() * self.total_rate
        if x < self.arrival_rate or not any(self.counts):
            k = self._pick(self.arrival_cdf, x / self.arrival_rate) + 1
            cid = -1
            if self.tracking:
                cid = self.next_id
                self.next_id += 1
                self.residents[k - 1].append(cid)
            self._set_count(k - 1, self.counts[k - 1] + 1)
            return 0, k, cid

        x -= self.arrival_rate
        i = self.J - 1
        for idx, rate in enumerate(self.service_rates):
            if x < rate:
                i = idx
                break
            x -= rate
        while self.counts[i] == 0:
            # proteção contra arredondamento na escolha acima
            i = (i + 1) % self.J

        cid = -1
        if self.tracking:
            pool = self.residents[i]
            pos = int(self.uniforms.next() * len(pool))
            pool[pos], pool[-1] = pool[-1], pool[pos]
            cid = pool.pop()
        self._set_count(i, self.counts[i] - 1)

        dest = self._pick(self.route_cdf[i], self.uniforms.next())
        if dest == self.J:
            return i + 1, 0, cid
        if self.tracking:
            self.residents[dest].append(cid)
        self._set_count(dest, self.counts[dest] + 1)
        return i + 1, dest + 1, cid


# ---------------------------------------------------------------------------
# Operações
# ---------------------------------------------------------------------------

def _initial_state(config: SimConfig, dist: Optional[StationaryDist],
                   rng: np.random.Generator, J: int) -> np.ndarray:
    if config.warmup == "none":
        return np.zeros(J, dtype=np.int64)
    return sample_stationary_state(dist, rng)


def simulate_window(spec: NetworkSpec, traffic: TrafficSolution, C: LinkSet,
                    config: SimConfig, replicate_index: int = 0,
                    dist: Optional[StationaryDist] = None) -> FlowTrace:
    """
    Simula uma réplica em [0, t] e registra os cruzamentos de links em C.

    Args:
        spec (NetworkSpec): rede validada e estável
        traffic (TrafficSolution): solução de tráfego
        C (LinkSet): links observados
        config (SimConfig): parâmetros
        replicate_index (int): índice da réplica (chave do fluxo aleatório)
        dist (StationaryDist): distribuição estacionária pré-calculada (opcional)

    Returns:
        FlowTrace: eventos e contagens da janela

    Raises:
        SimulationOverflow: mais de max_events eventos
    """
    if dist is None and config.warmup == "stationary-init":
        dist = stationary_distribution(spec, traffic, config.tail_tol)
    rng = make_rng(config.base_seed, replicate_index)
    state = _initial_state(config, dist, rng, spec.J)
    engine = JacksonSimulator(spec, rng, state, tracking=config.customer_tracking)

    in_C = C.indicator(spec.J).tolist()
    events: List[Event] = []
    per_customer: Dict[int, int] = {}
    link_counts: Dict[Link, int] = {link: 0 for link in C}
    tracking = config.customer_tracking
    horizon = config.t
    max_events = config.max_events

    now = 0.0
    n_events = 0
    while True:
        now += engine.holding_time()
        if now > horizon:
            break
        j, k, cid = engine.fire()
        n_events += 1
        if n_events > max_events:
            raise SimulationOverflow(max_events)
        if in_C[j][k]:
            events.append((now, j, k, cid))
            link_counts[(j, k)] += 1
            if tracking:
                per_customer[cid] = per_customer.get(cid, 0) + 1

    return FlowTrace(
        t=horizon,
        links=C.links,
        events=events,
        count=len(events),
        per_customer=per_customer,
        link_counts=link_counts,
        initial_customers=engine.initial_customers,
        n_events=n_events,
        tracking=tracking,
        replicate_index=replicate_index,
    )


def cluster_diagnostics(trace: FlowTrace) -> ClusterSummary:
    """
    M̂, tamanho médio (Ξ/M̂) e máximo dos clusters na janela.

    M̂ é uma aproximação truncada pela janela do número de clusters.

    Raises:
        TrackingDisabled: réplica simulada sem rastreamento de clientes
    """
    if not trace.tracking:
        raise TrackingDisabled()
    m_hat = trace.distinct_customers
    if m_hat == 0:
        return ClusterSummary(distinct_customers=0, mean_size=0.0, max_size=0)
    return ClusterSummary(
        distinct_customers=m_hat,
        mean_size=trace.count / m_hat,
        max_size=max(trace.per_customer.values()),
    )


def replicate_workers(config: SimConfig) -> int:
    """Número de threads para as réplicas (config > variável de ambiente > CPUs)."""
    if config.threads is not None:
        return max(1, int(config.threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"{THREADS_ENV}={env!r} inválido, usando número de CPUs")
    return os.cpu_count() or 1


def replicate_counts(spec: NetworkSpec, traffic: TrafficSolution, C: LinkSet,
                     config: SimConfig) -> CountSamples:
    """
    Executa n_replicates janelas independentes e junta as contagens em ordem.

    Cada réplica usa o fluxo (base_seed, índice); o resultado não depende da
    ordem de execução nem do número de threads.
    """
    dist = None
    if config.warmup == "stationary-init":
        dist = stationary_distribution(spec, traffic, config.tail_tol)
    workers = min(replicate_workers(config), config.n_replicates)
    logger.info(f"Simulando {config.n_replicates} réplicas (t={config.t}, "
                f"seed={config.base_seed}, threads={workers})")

    def run(index: int):
        trace = simulate_window(spec, traffic, C, config, index, dist)
        cluster = cluster_diagnostics(trace) if trace.tracking else None
        counts = [trace.link_counts[link] for link in C]
        if index and index % 1000 == 0:
            logger.debug(f"Réplica {index} concluída: Ξ={trace.count}")
        return trace.count, cluster, counts

    if workers == 1:
        results = [run(i) for i in range(config.n_replicates)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, range(config.n_replicates)))

    samples = np.array([r[0] for r in results], dtype=np.int64)
    clusters = [r[1] for r in results if r[1] is not None]
    per_link = np.array([r[2] for r in results], dtype=np.int64).reshape(len(results), len(C))
    logger.info(f"Réplicas concluídas: média Ξ={samples.mean():.4f}")
    return CountSamples(
        t=config.t,
        links=C.links,
        samples=samples,
        clusters=clusters,
        seeds=[(config.base_seed, i) for i in range(config.n_replicates)],
        per_link=per_link,
    )


def occupancy_run(spec: NetworkSpec, traffic: TrafficSolution, n_events: int,
                  seed: int = 0, tail_tol: float = DEFAULT_TAIL_TOL) -> OccupancyProfile:
    """
    Execução longa a partir do estado estacionário.

    Acumula, para cada fila, o tempo passado com n clientes e conta os
    cruzamentos de todos os links.

    Args:
        n_events (int): número de eventos a simular
        seed (int): semente (fluxo (seed, 0))

    Returns:
        OccupancyProfile: pmf de ocupação média no tempo e contagens por link
    """
    dist = stationary_distribution(spec, traffic, tail_tol)
    rng = make_rng(seed, 0)
    engine = JacksonSimulator(spec, rng, sample_stationary_state(dist, rng), tracking=False)
    J = spec.J
    occupancy = [np.zeros(max(16, 2 * len(q.pmf))) for q in dist.queues]
    link_counts = np.zeros((J + 1, J + 1), dtype=np.int64)
    now = 0.0
    for _ in range(n_events):
        dt = engine.holding_time()
        for i, n in enumerate(engine.counts):
            if n >= len(occupancy[i]):
                grown = np.zeros(2 * n + 1)
                grown[:len(occupancy[i])] = occupancy[i]
                occupancy[i] = grown
            occupancy[i][n] += dt
        now += dt
        j, k, _ = engine.fire()
        link_counts[j, k] += 1

    pmfs = [occ / now for occ in occupancy]
    logger.info(f"Execução longa: {n_events} eventos em tempo {now:.2f}")
    return OccupancyProfile(time=now, n_events=n_events, occupancy=pmfs, link_counts=link_counts)


def write_event_log(trace: FlowTrace, path: Union[str, Path]) -> Path:
    """Grava os eventos em CSV: time,link_from,link_to,customer_id."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["time", "link_from", "link_to", "customer_id"])
        for time, j, k, cid in trace.events:
            writer.writerow([repr(time), j, k, cid])
    logger.debug(f"Log de eventos salvo em {path} ({len(trace.events)} linhas)")
    return path
