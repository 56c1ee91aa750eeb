import json
import math

import numpy as np
import pytest

from src.core.exceptions import (
    ConfigError,
    InvalidLink,
    NonMonotoneServiceEffort,
    NotIrreducible,
    RowSumViolation,
    Unstable,
    ZeroFlowLink,
)
from src.core.network_model import (
    ConstantEffort,
    NetworkSpec,
    QueueDist,
    RampEffort,
    StationaryDist,
    all_links,
    load_network,
    parse_link_set,
    routing_row_line,
    sample_stationary_state,
    solve_traffic,
    stationary_distribution,
    stationary_queue_dist,
    validate_network,
)
from tests.conftest import make_feedback, make_tandem


def test_feedback_traffic_solution(feedback):
    print("TEST: test_feedback_traffic_solution — α = 1/(1−0.2) and flows on every link")
    spec, traffic = feedback
    assert traffic.alpha[0] == pytest.approx(1.25, abs=1e-12)
    assert traffic.rho_link(1, 1) == pytest.approx(0.25, abs=1e-12)
    assert traffic.rho_link(0, 1) == pytest.approx(1.0)
    assert traffic.rho_link(1, 0) == pytest.approx(1.0)
    assert traffic.residual < 1e-12


def test_tandem_and_flow_balance(tandem, triangle):
    print("TEST: test_tandem_and_flow_balance — tandem α=(1,1); inflow equals outflow on every queue")
    _, traffic = tandem
    np.testing.assert_allclose(traffic.alpha, [1.0, 1.0], atol=1e-12)
    for _, tr in (tandem, triangle):
        np.testing.assert_allclose(tr.flow_imbalance(), 0.0, atol=1e-12)


def test_row_sum_violation_reports_queue():
    print("TEST: test_row_sum_violation_reports_queue — routing row plus exit must sum to 1")
    spec = NetworkSpec(nu=[1.0], routing=[[0.3]], mu=[0.8], phi=(ConstantEffort(5.0),))
    with pytest.raises(RowSumViolation) as info:
        validate_network(spec)
    assert info.value.queue == 1


def test_not_irreducible_queue_never_reached():
    print("TEST: test_not_irreducible_queue_never_reached — queue 2 has no inflow")
    spec = NetworkSpec(nu=[1.0, 0.0], routing=[[0.0, 0.0], [0.0, 0.0]], mu=[1.0, 1.0],
                       phi=(ConstantEffort(2.0), ConstantEffort(2.0)))
    with pytest.raises(NotIrreducible) as info:
        validate_network(spec)
    assert 2 in info.value.queues


def test_unstable_when_alpha_reaches_capacity():
    print("TEST: test_unstable_when_alpha_reaches_capacity — α = 1.25 against φ ≡ 1")
    spec = NetworkSpec(nu=[1.0], routing=[[0.2]], mu=[0.8], phi=(ConstantEffort(1.0),))
    with pytest.raises(Unstable):
        validate_network(spec)


def test_non_monotone_ramp_rejected():
    print("TEST: test_non_monotone_ramp_rejected — ramp φ must be non-decreasing")
    spec = NetworkSpec(nu=[1.0], routing=[[0.0]], mu=[1.0], phi=(RampEffort((2.0, 1.0)),))
    with pytest.raises(NonMonotoneServiceEffort):
        validate_network(spec)


def test_stationary_feedback_is_geometric(feedback):
    print("TEST: test_stationary_feedback_is_geometric — φ ≡ 5 and α = 1.25 give geometric(0.25)")
    spec, traffic = feedback
    q = stationary_queue_dist(spec, traffic, 1)
    n = np.arange(len(q.pmf))
    expected = 0.75 * 0.25 ** n
    np.testing.assert_allclose(q.pmf, expected, rtol=1e-9, atol=1e-15)
    assert q.tail_bound < 1e-12
    assert q.mean() == pytest.approx(0.25 / 0.75, rel=1e-9)


def test_stationary_linear_effort_is_poisson(triangle):
    print("TEST: test_stationary_linear_effort_is_poisson — φ(m) = m gives Poisson(α)")
    spec, traffic = triangle
    q = stationary_queue_dist(spec, traffic, 3)
    alpha = traffic.alpha[2]
    expected = np.array([math.exp(-alpha) * alpha ** k / math.factorial(k)
                         for k in range(len(q.pmf))])
    np.testing.assert_allclose(q.pmf, expected, rtol=1e-8, atol=1e-14)


def test_sample_stationary_state_is_reproducible(triangle):
    print("TEST: test_sample_stationary_state_is_reproducible — same generator seed, same state")
    spec, traffic = triangle
    dist = stationary_distribution(spec, traffic)
    a = sample_stationary_state(dist, np.random.default_rng(3))
    b = sample_stationary_state(dist, np.random.default_rng(3))
    assert a.tolist() == b.tolist()
    assert a.shape == (3,) and np.all(a >= 0)


def test_parse_link_set_errors(feedback):
    print("TEST: test_parse_link_set_errors — (0,0), out-of-range and zero-flow links")
    spec, traffic = feedback
    with pytest.raises(InvalidLink):
        parse_link_set([[0, 0]], traffic)
    with pytest.raises(InvalidLink):
        parse_link_set([[1, 3]], traffic)
    with pytest.raises(InvalidLink):
        parse_link_set([], traffic)
    tandem_traffic = validate_network(make_tandem()).traffic
    with pytest.raises(ZeroFlowLink):
        parse_link_set([[2, 1]], tandem_traffic)


def test_all_links_lists_positive_flows(tandem):
    print("TEST: test_all_links_lists_positive_flows — tandem has exactly (0,1), (1,2), (2,0)")
    spec, traffic = tandem
    assert set(all_links(spec, traffic)) == {(0, 1), (1, 2), (2, 0)}


def test_load_network_and_row_line(tmp_path):
    print("TEST: test_load_network_and_row_line — JSON file with line context for routing rows")
    doc = {
        "queues": [
            {"nu": 1.0, "mu": 0.5, "service": {"type": "constant", "rate": 4.0}},
            {"nu": 0.0, "mu": 1.0, "service": {"type": "linear", "rate": 1.0}},
        ],
        "routing": [[0.0, 0.5], [0.0, 0.0]],
    }
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    spec = load_network(path)
    assert spec.J == 2
    assert spec.names == ("q1", "q2")
    first = routing_row_line(path, 1)
    second = routing_row_line(path, 2)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert first is not None and second is not None
    assert first < second
    assert lines[second - 1].strip() == "["


def test_load_network_invalid_json(tmp_path):
    print("TEST: test_load_network_invalid_json — ConfigError carries path and line")
    path = tmp_path / "bad.json"
    path.write_text('{\n  "queues": [\n', encoding="utf-8")
    with pytest.raises(ConfigError) as info:
        load_network(path)
    assert info.value.line is not None
    assert str(path) in str(info.value)


def test_solve_traffic_direct(feedback):
    print("TEST: test_solve_traffic_direct — solve_traffic without validation")
    traffic = solve_traffic(make_feedback())
    assert traffic.alpha[0] == pytest.approx(1.25)


def test_sample_stationary_state_feedback_mean(feedback):
    print("TEST: test_sample_stationary_state_feedback_mean — geometric(0.25) queue has mean 1/3")
    spec, traffic = feedback
    dist = stationary_distribution(spec, traffic)
    rng = np.random.default_rng(11)
    draws = np.array([sample_stationary_state(dist, rng)[0] for _ in range(50_000)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - 1 / 3) <= 3 * se


def test_sample_stationary_state_degenerate_queues():
    print("TEST: test_sample_stationary_state_degenerate_queues — point mass at 0 gives the empty state")
    queues = tuple(QueueDist(queue=j, pmf=np.array([1.0]), log_normalizer=0.0,
                             truncation=0, tail_bound=0.0) for j in (1, 2, 3))
    dist = StationaryDist(queues=queues)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sample_stationary_state(dist, rng).tolist() == [0, 0, 0]
