"""
Exceções do analisador de fluxos em redes de Jackson.

Todas derivam de JacksonFlowsError e carregam os campos estruturados
que o CLI usa para montar mensagens e escolher o código de saída.
"""

from typing import Iterable, List, Optional


class JacksonFlowsError(Exception):
    """Erro base do projeto."""


# ---------------------------------------------------------------------------
# Validação da rede
# ---------------------------------------------------------------------------

class NetworkValidationError(JacksonFlowsError):
    """Rede rejeitada na validação."""


class RowSumViolation(NetworkValidationError):
    def __init__(self, queue: int, total: float):
        self.queue = queue
        self.total = total
        super().__init__(
            f"RowSumViolation({queue}): soma de roteamento + saída = {total:.12g} (esperado 1)"
        )


class NotIrreducible(NetworkValidationError):
    def __init__(self, queues: Iterable[int]):
        self.queues: List[int] = sorted(queues)
        super().__init__(
            f"NotIrreducible({self.queues}): filas inalcançáveis a partir de fora "
            f"ou sem caminho de volta para fora"
        )


class Unstable(NetworkValidationError):
    def __init__(self, queue: int, alpha: float, capacity: float):
        self.queue = queue
        self.alpha = alpha
        self.capacity = capacity
        super().__init__(
            f"Unstable({queue}): taxa de chegada total {alpha:.6g} >= capacidade {capacity:.6g}"
        )


class NonMonotoneServiceEffort(NetworkValidationError):
    def __init__(self, queue: int):
        self.queue = queue
        super().__init__(f"NonMonotoneServiceEffort({queue}): φ deve ser não-decrescente")


class InvalidServiceEffort(NetworkValidationError):
    def __init__(self, message: str):
        super().__init__(f"InvalidServiceEffort: {message}")


# ---------------------------------------------------------------------------
# Conjuntos de links
# ---------------------------------------------------------------------------

class LinkSetError(JacksonFlowsError):
    """Conjunto de links C inválido."""


class ZeroFlowLink(LinkSetError):
    def __init__(self, j: int, k: int):
        self.link = (j, k)
        super().__init__(f"ZeroFlowLink({j},{k}): o link não carrega tráfego (ρ_jk = 0)")


class InvalidLink(LinkSetError):
    def __init__(self, message: str):
        super().__init__(f"InvalidLink: {message}")


# ---------------------------------------------------------------------------
# Numérico / estatístico
# ---------------------------------------------------------------------------

class NumericalError(JacksonFlowsError):
    """Falha numérica ou estatística."""


class SingularSystem(NumericalError):
    def __init__(self, what: str):
        super().__init__(f"SingularSystem: sistema linear singular em {what}")


class DepthTooSmall(NumericalError):
    def __init__(self, depth: int, residual: float, tol: float):
        self.depth = depth
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"DepthTooSmall: massa residual {residual:.3e} > tolerância {tol:.1e} "
            f"na profundidade {depth}"
        )


class NonpositiveDenominator(NumericalError):
    def __init__(self, what: str):
        super().__init__(f"NonpositiveDenominator: {what} deve ser > 0")


class NonpositiveMean(NumericalError):
    def __init__(self, mean: float):
        self.mean = mean
        super().__init__(f"NonpositiveMean: média {mean!r} deve ser > 0")


class ZeroMean(NumericalError):
    def __init__(self):
        super().__init__("ZeroMean: razão variância/média indefinida para média 0")


class InsufficientSamples(NumericalError):
    def __init__(self, needed: int, got: int):
        self.needed = needed
        self.got = got
        super().__init__(f"InsufficientSamples: necessárias {needed} amostras, recebidas {got}")


class SimulationOverflow(NumericalError):
    def __init__(self, max_events: int):
        self.max_events = max_events
        super().__init__(f"SimulationOverflow: limite de {max_events} eventos excedido")


# ---------------------------------------------------------------------------
# Diversos
# ---------------------------------------------------------------------------

class TrackingDisabled(JacksonFlowsError):
    def __init__(self):
        super().__init__("TrackingDisabled: diagnóstico de clusters exige customer_tracking ligado")


class ConfigError(JacksonFlowsError):
    """Erro de configuração com contexto do arquivo (caminho, linha, campo)."""

    def __init__(self, message: str, path: Optional[str] = None,
                 line: Optional[int] = None, pointer: Optional[str] = None):
        self.path = path
        self.line = line
        self.pointer = pointer
        where = ""
        if path:
            where = str(path)
            if line is not None:
                where += f":{line}"
            if pointer:
                where += f" ({pointer})"
            where += ": "
        elif pointer:
            where = f"{pointer}: "
        super().__init__(f"{where}{message}")
