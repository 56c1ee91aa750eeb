"""Redes pequenas usadas em toda a suíte."""

import json

import numpy as np
import pytest

from src.core.network_model import (
    ConstantEffort,
    LinearEffort,
    NetworkSpec,
    RampEffort,
    validate_network,
)


def make_feedback() -> NetworkSpec:
    """Fila única com realimentação: ν=1, λ11=0.2, μ=0.8, φ≡5."""
    return NetworkSpec(nu=[1.0], routing=[[0.2]], mu=[0.8], phi=(ConstantEffort(5.0),))


def make_tandem() -> NetworkSpec:
    """Duas filas em série sem laço: 0 → 1 → 2 → 0."""
    return NetworkSpec(
        nu=[1.0, 0.0],
        routing=[[0.0, 1.0], [0.0, 0.0]],
        mu=[0.0, 1.0],
        phi=(ConstantEffort(2.0), ConstantEffort(2.0)),
    )


def make_triangle() -> NetworkSpec:
    return NetworkSpec(
        nu=[0.6, 0.2, 0.0],
        routing=[[0.0, 0.5, 0.2], [0.1, 0.0, 0.4], [0.3, 0.1, 0.0]],
        mu=[0.3, 0.5, 0.6],
        phi=(RampEffort((1.0, 2.0, 3.0)), ConstantEffort(2.5), LinearEffort(1.0)),
    )


def random_network(rng: np.random.Generator, J: int, min_exit: float = 0.2) -> NetworkSpec:
    """Rede aleatória irredutível com μ_j >= min_exit."""
    nu = rng.uniform(0.0, 1.0, J)
    nu[rng.integers(J)] += 0.5
    mu = rng.uniform(min_exit, 0.9, J)
    routing = rng.uniform(0.0, 1.0, (J, J)) * (rng.random((J, J)) < 0.7)
    # ciclo 1 → 2 → ... → J garante alcançabilidade entre as filas
    for j in range(J - 1):
        routing[j, j + 1] += 0.1
    sums = routing.sum(axis=1)
    for j in range(J):
        if sums[j] > 0:
            routing[j] *= (1.0 - mu[j]) / sums[j]
        else:
            mu[j] = 1.0
    return NetworkSpec(nu=nu, routing=routing, mu=mu,
                       phi=tuple(LinearEffort(1.0) for _ in range(J)))


@pytest.fixture
def feedback():
    spec = make_feedback()
    return spec, validate_network(spec).traffic


@pytest.fixture
def tandem():
    spec = make_tandem()
    return spec, validate_network(spec).traffic


@pytest.fixture
def triangle():
    spec = make_triangle()
    return spec, validate_network(spec).traffic


@pytest.fixture
def scenario_dir(tmp_path):
    """Diretório com rede de realimentação + cenário pequeno para a CLI."""
    network = {
        "queues": [{"name": "servidor", "nu": 1.0, "mu": 0.8,
                    "service": {"type": "constant", "rate": 5.0}}],
        "routing": [[0.2]],
    }
    (tmp_path / "network.json").write_text(json.dumps(network, indent=2), encoding="utf-8")
    scenario = {
        "network": "network.json",
        "links": [[1, 1]],
        "t": 40,
        "n_replicates": 60,
        "base_seed": 5,
        "out_dir": "out",
        "sweep_t": [10, 40],
        "tolerances": {"bootstrap_resamples": 200},
    }
    (tmp_path / "scenario.json").write_text(json.dumps(scenario, indent=2), encoding="utf-8")
    return tmp_path
