import csv
import logging

import numpy as np
import pytest

from src.core.exceptions import SimulationOverflow, TrackingDisabled
from src.core.network_model import LinkSet
from src.core.simulator import (
    THREADS_ENV,
    JacksonSimulator,
    SimConfig,
    cluster_diagnostics,
    make_rng,
    occupancy_run,
    replicate_counts,
    replicate_workers,
    simulate_window,
    write_event_log,
)

FEEDBACK_C = LinkSet(((1, 1),))


def test_sim_config_rejects_bad_values():
    print("TEST: test_sim_config_rejects_bad_values — t, n_replicates, warmup and seed are checked")
    with pytest.raises(ValueError):
        SimConfig(t=0.0)
    with pytest.raises(ValueError):
        SimConfig(t=1.0, n_replicates=0)
    with pytest.raises(ValueError):
        SimConfig(t=1.0, warmup="burn-in")
    with pytest.raises(ValueError):
        SimConfig(t=1.0, base_seed=-1)


def test_make_rng_streams_are_keyed():
    print("TEST: test_make_rng_streams_are_keyed — same key same stream, other index other stream")
    a = make_rng(7, 3).random(5)
    b = make_rng(7, 3).random(5)
    c = make_rng(7, 4).random(5)
    assert a.tolist() == b.tolist()
    assert a.tolist() != c.tolist()


def test_engine_arrival_from_empty_network(tandem):
    print("TEST: test_engine_arrival_from_empty_network — first event of an empty tandem is (0,1)")
    spec, _ = tandem
    engine = JacksonSimulator(spec, make_rng(0, 0))
    assert engine.total_rate == pytest.approx(1.0)
    j, k, cid = engine.fire()
    assert (j, k, cid) == (0, 1, 0)
    assert engine.counts == [1, 0]
    assert engine.residents[0] == [0]


def test_simulate_window_is_deterministic(feedback):
    print("TEST: test_simulate_window_is_deterministic — same (seed, index) gives the same events")
    spec, traffic = feedback
    config = SimConfig(t=30.0, base_seed=11)
    a = simulate_window(spec, traffic, FEEDBACK_C, config, replicate_index=2)
    b = simulate_window(spec, traffic, FEEDBACK_C, config, replicate_index=2)
    assert a.events == b.events
    assert a.count == len(a.events) == sum(a.link_counts.values())
    assert sum(a.per_customer.values()) == a.count
    times = [e[0] for e in a.events]
    assert times == sorted(times)
    assert all(0.0 < s <= 30.0 for s in times)


def test_replicates_independent_of_thread_count(feedback):
    print("TEST: test_replicates_independent_of_thread_count — 1 thread vs 4 threads")
    spec, traffic = feedback
    one = replicate_counts(spec, traffic, FEEDBACK_C,
                           SimConfig(t=20.0, n_replicates=24, base_seed=3, threads=1))
    four = replicate_counts(spec, traffic, FEEDBACK_C,
                            SimConfig(t=20.0, n_replicates=24, base_seed=3, threads=4))
    assert one.samples.tolist() == four.samples.tolist()
    assert one.seeds == [(3, i) for i in range(24)]
    assert one.per_link[:, 0].tolist() == one.samples.tolist()


def test_replicate_workers_env(monkeypatch):
    print("TEST: test_replicate_workers_env — JACKSON_FLOWS_THREADS caps the pool")
    monkeypatch.setenv(THREADS_ENV, "3")
    assert replicate_workers(SimConfig(t=1.0)) == 3
    assert replicate_workers(SimConfig(t=1.0, threads=2)) == 2
    monkeypatch.setenv(THREADS_ENV, "muitos")
    assert replicate_workers(SimConfig(t=1.0)) >= 1


def test_feedback_mean_close_to_rho_t(feedback):
    print("TEST: test_feedback_mean_close_to_rho_t — mean of Ξ near ρ_C·t = 10")
    spec, traffic = feedback
    samples = replicate_counts(spec, traffic, FEEDBACK_C,
                               SimConfig(t=40.0, n_replicates=400, base_seed=1))
    mean = samples.samples.mean()
    se = samples.samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(mean - 10.0) <= 5 * se


def test_tandem_customers_cross_once(tandem):
    print("TEST: test_tandem_customers_cross_once — no-loop network, clusters of size 1")
    spec, traffic = tandem
    config = SimConfig(t=50.0, n_replicates=20, base_seed=9)
    for idx in range(config.n_replicates):
        trace = simulate_window(spec, traffic, LinkSet(((1, 2),)), config, idx)
        assert set(trace.per_customer.values()) <= {1}
        summary = cluster_diagnostics(trace)
        if summary.distinct_customers:
            assert summary.mean_size == 1.0
            assert summary.max_size == 1


def test_tracking_disabled_blocks_cluster_diagnostics(feedback):
    print("TEST: test_tracking_disabled_blocks_cluster_diagnostics — TrackingDisabled raised")
    spec, traffic = feedback
    trace = simulate_window(spec, traffic, FEEDBACK_C,
                            SimConfig(t=5.0, customer_tracking=False))
    assert trace.per_customer == {}
    with pytest.raises(TrackingDisabled):
        cluster_diagnostics(trace)


def test_simulation_overflow(feedback):
    print("TEST: test_simulation_overflow — max_events=10 in a window with ~90 events")
    spec, traffic = feedback
    with pytest.raises(SimulationOverflow):
        simulate_window(spec, traffic, FEEDBACK_C, SimConfig(t=40.0, max_events=10))


def test_empty_start_has_no_initial_customers(feedback):
    print("TEST: test_empty_start_has_no_initial_customers — warmup='none' starts empty")
    spec, traffic = feedback
    trace = simulate_window(spec, traffic, FEEDBACK_C, SimConfig(t=5.0, warmup="none"))
    assert trace.initial_customers == 0


def test_write_event_log(feedback, tmp_path):
    print("TEST: test_write_event_log — CSV with one row per crossing")
    spec, traffic = feedback
    trace = simulate_window(spec, traffic, FEEDBACK_C, SimConfig(t=20.0, base_seed=4))
    path = write_event_log(trace, tmp_path / "events.csv")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["time", "link_from", "link_to", "customer_id"]
    assert len(rows) == trace.count + 1
    assert all(r[1:3] == ["1", "1"] for r in rows[1:])


def test_occupancy_run_rates(feedback):
    print("TEST: test_occupancy_run_rates — short run, occupancy pmfs sum to 1")
    spec, traffic = feedback
    profile = occupancy_run(spec, traffic, 5000, seed=2)
    assert profile.n_events == 5000
    assert profile.occupancy[0].sum() == pytest.approx(1.0)
    assert profile.link_counts.sum() == 5000
    assert profile.link_rates[0, 1] > 0


@pytest.mark.slow
def test_occupancy_matches_geometric(feedback):
    print("TEST: test_occupancy_matches_geometric — 10^6 events vs geometric(0.25), link rates vs ρ")
    spec, traffic = feedback
    profile = occupancy_run(spec, traffic, 1_000_000, seed=1)
    occ = profile.occupancy[0]
    geometric = 0.75 * 0.25 ** np.arange(len(occ))
    assert 0.5 * np.abs(occ - geometric).sum() <= 0.02
    for j, k in ((0, 1), (1, 1), (1, 0)):
        count = profile.link_counts[j, k]
        rate = count / profile.time
        se = np.sqrt(count) / profile.time
        # SE de Poisson subestima a variância do laço (1,1)
        assert abs(rate - traffic.rho[j, k]) <= 6 * se


def test_counts_add_over_disjoint_link_sets(triangle):
    print("TEST: test_counts_add_over_disjoint_link_sets — Ξ over C1 ∪ C2 equals Ξ over C1 plus Ξ over C2")
    spec, traffic = triangle
    C1 = LinkSet(((1, 2), (2, 1)))
    C2 = LinkSet(((0, 1), (3, 0)))
    union = LinkSet(C1.links + C2.links)
    config = SimConfig(t=30.0, n_replicates=30, base_seed=21)
    a = replicate_counts(spec, traffic, C1, config)
    b = replicate_counts(spec, traffic, C2, config)
    both = replicate_counts(spec, traffic, union, config)
    assert both.samples.tolist() == (a.samples + b.samples).tolist()
    np.testing.assert_array_equal(both.per_link, np.hstack([a.per_link, b.per_link]))


def test_engine_logs_initial_state(tandem, caplog):
    print("TEST: test_engine_logs_initial_state — engine start is logged at DEBUG")
    spec, _ = tandem
    with caplog.at_level(logging.DEBUG, logger="src.core.simulator"):
        JacksonSimulator(spec, make_rng(0, 0), np.array([2, 1]))
    assert any("Motor iniciado" in r.getMessage() and "[2, 1]" in r.getMessage()
               for r in caplog.records)
