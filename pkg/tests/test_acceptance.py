"""Execuções de Monte Carlo de aceitação (marcadas `slow`)."""

import pytest

from src.core.flow_stats import (
    OVER_DISPERSED,
    empirical_pmf,
    moments,
    overdispersion_test,
    shift_tv,
    tv_distance,
    tv_noise_floor,
)
from src.core.nb_stein import (
    approximant_pmf,
    bound_simplified,
    nb_params_from_moments,
    poisson_pmf,
    shift_bound,
)
from src.core.network_model import LinkSet, validate_network
from src.core.route_chains import link_stats
from src.core.simulator import SimConfig, replicate_counts
from tests.conftest import make_feedback, make_tandem

pytestmark = pytest.mark.slow

FEEDBACK_C = LinkSet(((1, 1),))


def _feedback_samples(t: float, n: int, seed: int):
    spec = make_feedback()
    traffic = validate_network(spec).traffic
    samples = replicate_counts(spec, traffic, FEEDBACK_C,
                               SimConfig(t=t, n_replicates=n, base_seed=seed))
    return spec, traffic, samples


def _nb_tv(samples, rho_C: float):
    m = rho_C * samples.t
    model = approximant_pmf(nb_params_from_moments(m, moments(samples).variance))
    emp = empirical_pmf(samples)
    return tv_distance(emp, model), tv_distance(emp, poisson_pmf(m)), \
        tv_noise_floor(model, len(samples))


@pytest.fixture(scope="module")
def feedback_400():
    return _feedback_samples(400.0, 10_000, 20251029)


def test_no_loop_flow_is_poisson():
    print("TEST: test_no_loop_flow_is_poisson — tandem, t=20, 5·10^4 replicates vs Poisson(20)")
    spec = make_tandem()
    traffic = validate_network(spec).traffic
    samples = replicate_counts(spec, traffic, LinkSet(((1, 2),)),
                               SimConfig(t=20.0, n_replicates=50_000, base_seed=3))
    tv = tv_distance(empirical_pmf(samples), poisson_pmf(20.0))
    assert tv.upper <= 0.03
    assert all(c.max_size <= 1 for c in samples.clusters)
    assert samples.mean_cluster_size() == 1.0


def test_feedback_over_dispersed(feedback_400):
    print("TEST: test_feedback_over_dispersed — bootstrap 95% CI of variance/mean above 1")
    _, _, samples = feedback_400
    result = overdispersion_test(moments(samples), 1000, seed=0)
    assert result.verdict == OVER_DISPERSED
    assert result.ci_low > 1.0
    assert result.ratio <= 1.5 + 0.1


def test_nb_bound_holds(feedback_400):
    print("TEST: test_nb_bound_holds — TV(Ξ, NB) under 0.1005 and below TV(Ξ, Poisson)")
    spec, traffic, samples = feedback_400
    stats = link_stats(spec, traffic, FEEDBACK_C)
    tv_nb, tv_pois, noise = _nb_tv(samples, stats.rho_C)
    bound = bound_simplified(stats.eps_C, stats.sigma_C, stats.w_C, stats.rho_C, 400.0)
    assert tv_nb.upper <= bound + noise
    assert tv_nb.value < tv_pois.value


def test_shift_lemma(feedback_400):
    print("TEST: test_shift_lemma — d_TV(Ξ, Ξ+1) under 1/√(2e·0.64·100)")
    spec, traffic, samples = feedback_400
    stats = link_stats(spec, traffic, FEEDBACK_C)
    emp = empirical_pmf(samples)
    budget = 2 * tv_noise_floor(emp, len(samples))
    assert shift_tv(samples) <= shift_bound(stats.w_C, stats.rho_C, 400.0) + budget


def test_tv_does_not_grow_with_t(feedback_400):
    print("TEST: test_tv_does_not_grow_with_t — TV(Ξ, NB) at t=1600 against t=400")
    spec, traffic, samples = feedback_400
    stats = link_stats(spec, traffic, FEEDBACK_C)
    tv_400, _, noise_400 = _nb_tv(samples, stats.rho_C)
    _, _, long_samples = _feedback_samples(1600.0, 10_000, 20251030)
    tv_1600, _, noise_1600 = _nb_tv(long_samples, stats.rho_C)
    assert tv_1600.value <= tv_400.value + 2 * max(noise_400, noise_1600)


def test_cluster_size_within_bounds(feedback_400):
    print("TEST: test_cluster_size_within_bounds — replicate-mean cluster size in [1, 1.55]")
    _, _, samples = feedback_400
    size = samples.mean_cluster_size()
    assert 1.0 <= size <= 1.5 + 0.05
