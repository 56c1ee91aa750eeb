"""
cli - Interface de linha de comando do analisador de fluxos

Subcomandos:
    solve     equações de tráfego e tabelas estacionárias
    analyze   w_C, ε_C, σ_C e limites (sem simulação)
    simulate  réplicas de Ξ_{C,t} gravadas em samples.csv
    compare   NB vs Poisson vs empírico, limites e diagnósticos (report.json)
    sweep     varredura em t do limite vs TV empírico (sweep.csv)

Códigos de saída: 0 sucesso, 2 erro de configuração, 3 erro numérico ou de
validação, 4 violação de limite no modo --self-check.
"""

import argparse
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..core.exceptions import (
    ConfigError,
    JacksonFlowsError,
    LinkSetError,
    NetworkValidationError,
    NumericalError,
    RowSumViolation,
    TrackingDisabled,
)
from ..core.flow_stats import (
    empirical_pmf,
    moments,
    overdispersion_test,
    shift_tv,
    tv_distance,
    tv_noise_floor,
)
from ..core.nb_stein import (
    ASYMPTOTIC,
    EMPIRICAL,
    approximant_pmf,
    asymptotic_moments,
    bound_report,
    bound_simplified,
    nb_params_from_moments,
    poisson_pmf,
    shift_bound,
)
from ..core.network_model import (
    LinkSet,
    NetworkSpec,
    TrafficSolution,
    load_network,
    parse_link_set,
    routing_row_line,
    stationary_distribution,
    validate_network,
)
from ..core.route_chains import link_stats
from ..core.simulator import SimConfig, replicate_counts, simulate_window, write_event_log
from .report import ApproxReport, provenance, read_samples, write_csv, write_json, write_samples

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_BOUND = 4

DEFAULT_TOLERANCES = {
    "tail_tol": 1e-12,
    "poisson_delta": 1e-6,
    "bootstrap_resamples": 1000,
    "bootstrap_seed": 0,
    "mc_z": 3.0,
    "cluster_slack": 0.05,
}


@dataclass
class ScenarioConfig:
    """
    Cenário de análise.

    Attributes:
        network (Path): arquivo JSON da rede
        links (list): pares [j, k] de C (0 = fora)
        t (float): janela
        n_replicates (int): réplicas
        base_seed (int): semente base
        variance_mode (str): 'empirical' ou 'asymptotic'
        out_dir (Path): diretório de saída
        tolerances (dict): tolerâncias numéricas e de Monte Carlo
    """

    network: Path
    links: List[List[int]]
    t: float
    n_replicates: int = 1000
    base_seed: int = 0
    variance_mode: str = EMPIRICAL
    out_dir: Path = Path("out")
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    sweep_t: List[float] = field(default_factory=list)
    max_events: int = 100_000_000
    source: Optional[Path] = None

    def validate(self):
        where = str(self.source) if self.source else None
        if not self.t > 0:
            raise ConfigError(f"t deve ser > 0 (recebido {self.t})", path=where, pointer="t")
        if self.n_replicates < 1:
            raise ConfigError("n_replicates deve ser >= 1", path=where, pointer="n_replicates")
        if not 0 <= self.base_seed < 2 ** 64:
            raise ConfigError("base_seed deve caber em 64 bits", path=where, pointer="base_seed")
        if self.variance_mode not in (EMPIRICAL, ASYMPTOTIC):
            raise ConfigError(f"variance_mode inválido: {self.variance_mode!r}", path=where,
                              pointer="variance_mode")
        if not self.links:
            raise ConfigError("'links' vazio", path=where, pointer="links")
        if any(not s > 0 for s in self.sweep_t):
            raise ConfigError("valores de sweep_t devem ser > 0", path=where, pointer="sweep_t")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "network": self.network.as_posix(),
            "links": [list(map(int, l)) for l in self.links],
            "t": self.t,
            "n_replicates": self.n_replicates,
            "base_seed": self.base_seed,
            "variance_mode": self.variance_mode,
            "tolerances": dict(sorted(self.tolerances.items())),
            "sweep_t": list(self.sweep_t),
            "max_events": self.max_events,
        }

    def sim_config(self, t: Optional[float] = None) -> SimConfig:
        return SimConfig(
            t=self.t if t is None else t,
            n_replicates=self.n_replicates,
            base_seed=self.base_seed,
            customer_tracking=True,
            max_events=self.max_events,
            tail_tol=self.tolerances["tail_tol"],
        )


def load_scenario(path: Path) -> ScenarioConfig:
    """
    Lê o arquivo de cenário; caminhos relativos são resolvidos a partir dele.

    Raises:
        ConfigError: arquivo ausente, JSON inválido ou campos inválidos
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("arquivo de configuração não encontrado", path=str(path))
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido: {e.msg}", path=str(path), line=e.lineno)
    if "network" not in data:
        raise ConfigError("campo obrigatório 'network' ausente", path=str(path), pointer="network")

    base = path.parent
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(data.get("tolerances", {}))
    try:
        config = ScenarioConfig(
            network=base / data["network"],
            links=[list(l) for l in data.get("links", [])],
            t=float(data.get("t", 0.0)),
            n_replicates=int(data.get("n_replicates", 1000)),
            base_seed=int(data.get("base_seed", 0)),
            variance_mode=str(data.get("variance_mode", EMPIRICAL)),
            out_dir=base / data.get("out_dir", "out"),
            tolerances=tolerances,
            sweep_t=[float(v) for v in data.get("sweep_t", [])],
            max_events=int(data.get("max_events", 100_000_000)),
            source=path,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"valor inválido: {e}", path=str(path))
    return config


def apply_overrides(config: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    """Flags da linha de comando têm precedência sobre o arquivo."""
    changes: Dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        changes["base_seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        changes["n_replicates"] = args.replicates
    if getattr(args, "t", None) is not None:
        changes["t"] = args.t
    if getattr(args, "variance_mode", None) is not None:
        changes["variance_mode"] = args.variance_mode
    if getattr(args, "out", None) is not None:
        changes["out_dir"] = Path(args.out)
    config = replace(config, **changes)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Preparação comum
# ---------------------------------------------------------------------------

@dataclass
class Prepared:
    spec: NetworkSpec
    traffic: TrafficSolution
    C: LinkSet


def _prepare(config: ScenarioConfig) -> Prepared:
    spec = load_network(config.network)
    validated = validate_network(spec)
    C = parse_link_set(config.links, validated.traffic)
    return Prepared(spec=spec, traffic=validated.traffic, C=C)


# ---------------------------------------------------------------------------
# Subcomandos
# ---------------------------------------------------------------------------

def cmd_solve(config: ScenarioConfig) -> Dict[str, Any]:
    """Resolve o tráfego e grava traffic.csv e stationary.csv."""
    spec = load_network(config.network)
    validated = validate_network(spec)
    traffic = validated.traffic
    dist = stationary_distribution(spec, traffic, config.tolerances["tail_tol"])

    rows = []
    for j in range(1, spec.J + 1):
        q = dist.queues[j - 1]
        rows.append([j, spec.names[j - 1], float(traffic.alpha[j - 1]), validated.capacity[j - 1],
                     q.mean(), q.truncation, q.tail_bound])
    write_csv(rows, ["queue", "name", "alpha", "capacity", "mean_queue_length", "truncation",
                     "tail_bound"], config.out_dir / "traffic.csv")
    stat_rows = [[q.queue, n, float(p)] for q in dist.queues for n, p in enumerate(q.pmf)]
    write_csv(stat_rows, ["queue", "n", "probability"], config.out_dir / "stationary.csv")

    print("fila  α_j          E[N_j]")
    for row in rows:
        print(f"{row[0]:>4}  {row[2]:<12.6g} {row[4]:.6g}")
    return {"alpha": traffic.alpha.tolist(), "residual": traffic.residual}


def cmd_analyze(config: ScenarioConfig) -> Dict[str, Any]:
    """w_C, ε_C, σ_C e BoundReport sem simulação (grava link_stats.csv e analysis.json)."""
    prep = _prepare(config)
    stats = link_stats(prep.spec, prep.traffic, prep.C)
    summary = asymptotic_moments(stats, config.t)
    bounds = bound_report(stats, config.t, summary, ASYMPTOTIC)

    rows = [[j, k, m.rho, m.w, m.eps, m.sigma] for (j, k), m in stats.per_link.items()]
    rows.append(["C", "", stats.rho_C, stats.w_C, stats.eps_C, stats.sigma_C])
    write_csv(rows, ["link_from", "link_to", "rho", "w", "eps", "sigma"],
              config.out_dir / "link_stats.csv")
    result = {
        "scenario": config.to_dict(),
        "traffic": {"alpha": prep.traffic.alpha.tolist()},
        "link_stats": stats.to_dict(),
        "bounds": bounds.to_dict(),
        "provenance": provenance(config.base_seed, config.to_dict()),
    }
    write_json(result, config.out_dir / "analysis.json")

    print(f"w_C={stats.w_C:.6g}  ε_C={stats.eps_C:.6g}  σ_C={stats.sigma_C:.6g}  "
          f"ρ_C={stats.rho_C:.6g}")
    print(f"limite simplificado (t={config.t:g}): {bounds.bound_simplified:.6g}")
    for note in bounds.notes:
        print(f"  nota: {note}")
    return result


def cmd_simulate(config: ScenarioConfig, dump_events: bool = False) -> Dict[str, Any]:
    """Simula as réplicas e grava samples.csv (e events.csv da réplica 0, se pedido)."""
    prep = _prepare(config)
    sim = config.sim_config()
    samples = replicate_counts(prep.spec, prep.traffic, prep.C, sim)
    path = write_samples(samples, config.out_dir / "samples.csv")
    if dump_events:
        trace = simulate_window(prep.spec, prep.traffic, prep.C, sim, 0)
        write_event_log(trace, config.out_dir / "events.csv")
    print(f"✓ {len(samples)} réplicas, média Ξ = {samples.samples.mean():.4f} -> {path}")
    return {"samples": path, "mean": float(samples.samples.mean())}


def build_report(config: ScenarioConfig, prep: Prepared, samples) -> Tuple[ApproxReport, List]:
    """Monta o ApproxReport a partir das amostras; retorna também as linhas de pmf.csv."""
    tol = config.tolerances
    t = samples.t
    stats = link_stats(prep.spec, prep.traffic, prep.C)
    summary = moments(samples)
    m = stats.rho_C * t

    if config.variance_mode == ASYMPTOTIC:
        bound_summary = asymptotic_moments(stats, t)
    else:
        bound_summary = summary
    model = nb_params_from_moments(m, bound_summary.variance, tol["poisson_delta"])
    model_pmf = approximant_pmf(model)
    pois_pmf = poisson_pmf(m)
    emp = empirical_pmf(samples)
    tv_nb = tv_distance(emp, model_pmf)
    tv_pois = tv_distance(emp, pois_pmf)
    n = len(samples)
    noise_model = tv_noise_floor(model_pmf, n)
    noise_emp = tv_noise_floor(emp, n)
    shift_emp = shift_tv(samples)
    dispersion = overdispersion_test(summary, int(tol["bootstrap_resamples"]),
                                     int(tol["bootstrap_seed"]))
    bounds = bound_report(stats, t, bound_summary, config.variance_mode)

    clusters: Dict[str, Any] = {"label": "window-truncated approximation of the cluster count"}
    if samples.clusters:
        clusters.update({
            "mean_cluster_size": samples.mean_cluster_size(),
            "mean_distinct_customers": sum(c.distinct_customers for c in samples.clusters)
            / len(samples.clusters),
            "max_cluster_size": max(c.max_size for c in samples.clusters),
        })

    report = ApproxReport(sections={
        "scenario": config.to_dict(),
        "traffic": {"alpha": prep.traffic.alpha.tolist(), "rho_C": stats.rho_C},
        "link_stats": stats.to_dict(),
        "moments": summary.to_dict(),
        "approximation": {"model": model.to_dict(), "poisson_baseline": {"mean": m}},
        "tv": {
            "nb": tv_nb.to_dict(),
            "poisson": tv_pois.to_dict(),
            "noise_floor": noise_model,
            "shift": shift_emp,
        },
        "bounds": bounds.to_dict(),
        "overdispersion": dispersion.to_dict(),
        "clusters": clusters,
    })
    report.add_check("tv_nb_vs_bound_simplified", tv_nb.upper, bounds.bound_simplified,
                     noise_model)
    report.add_check("shift_tv_vs_shift_bound", shift_emp, bounds.shift_bound, 2 * noise_emp)
    report.add_check("mean_vs_rho_C_t", abs(summary.mean - m), 0.0,
                     tol["mc_z"] * (summary.se_mean or 0.0))
    if "mean_cluster_size" in clusters:
        lo, hi = bounds.cluster_size_bounds
        report.add_check("cluster_size_upper", clusters["mean_cluster_size"], hi,
                         tol["cluster_slack"])
        report.add_check("cluster_size_lower", clusters["mean_cluster_size"], lo, 0.0,
                         kind="lower")
    report.provenance = provenance(config.base_seed, config.to_dict())

    lo = min(emp.offset, model_pmf.offset, pois_pmf.offset)
    hi = max(emp.last, model_pmf.last, pois_pmf.last)
    pmf_rows = [[k, emp.prob(k), model_pmf.prob(k), pois_pmf.prob(k)]
                for k in range(lo, hi + 1)]
    return report, pmf_rows


def cmd_compare(config: ScenarioConfig, samples_path: Optional[Path] = None,
                self_check: bool = False) -> int:
    """Compara o empírico com NB e Poisson e grava report.json e pmf.csv."""
    prep = _prepare(config)
    samples_path = Path(samples_path) if samples_path else config.out_dir / "samples.csv"
    samples = read_samples(samples_path)
    if abs(samples.t - config.t) > 1e-12 * max(1.0, config.t):
        raise ConfigError(f"amostras com t={samples.t:g} diferente do cenário t={config.t:g}",
                          path=str(samples_path))
    if samples.links and tuple(samples.links) != tuple(prep.C.links):
        raise ConfigError("amostras simuladas para outro conjunto de links",
                          path=str(samples_path))

    report, pmf_rows = build_report(config, prep, samples)
    write_json(report.to_dict(), config.out_dir / "report.json")
    write_csv(pmf_rows, ["k", "empirical", "model", "poisson"], config.out_dir / "pmf.csv")

    tv = report.sections["tv"]
    print(f"TV(Ξ, NB) = {tv['nb']['value']:.5f} (sup {tv['nb']['upper']:.5f})   "
          f"TV(Ξ, Poisson) = {tv['poisson']['value']:.5f}")
    print(f"limite simplificado = {report.sections['bounds']['bound_simplified']:.5f}   "
          f"veredito: {report.sections['overdispersion']['verdict']}")
    return _check_exit(report.violations, self_check)


def cmd_sweep(config: ScenarioConfig, self_check: bool = False) -> int:
    """Varre os valores de sweep_t e grava sweep.csv (limites vs TV empírico)."""
    if not config.sweep_t:
        raise ConfigError("'sweep_t' vazio no cenário", pointer="sweep_t")
    prep = _prepare(config)
    stats = link_stats(prep.spec, prep.traffic, prep.C)
    rows = []
    violations = []
    for t in config.sweep_t:
        samples = replicate_counts(prep.spec, prep.traffic, prep.C, config.sim_config(t))
        m = stats.rho_C * t
        if config.variance_mode == ASYMPTOTIC:
            variance = asymptotic_moments(stats, t).variance
        else:
            variance = moments(samples).variance
        model_pmf = approximant_pmf(
            nb_params_from_moments(m, variance, config.tolerances["poisson_delta"]))
        emp = empirical_pmf(samples)
        tv_nb = tv_distance(emp, model_pmf)
        tv_pois = tv_distance(emp, poisson_pmf(m))
        bound = bound_simplified(stats.eps_C, stats.sigma_C, stats.w_C, stats.rho_C, t)
        noise = tv_noise_floor(model_pmf, len(samples))
        rows.append([t, bound, shift_bound(stats.w_C, stats.rho_C, t), tv_nb.value,
                     tv_nb.upper, tv_pois.value])
        if tv_nb.upper > bound + noise:
            violations.append({"t": t, "tv_nb_upper": tv_nb.upper, "bound": bound})
    write_csv(rows, ["t", "bound_simplified", "shift_bound", "tv_nb", "tv_nb_upper",
                     "tv_poisson"], config.out_dir / "sweep.csv")
    return _check_exit(violations, self_check)


def _check_exit(violations: List, self_check: bool) -> int:
    if violations:
        for v in violations:
            logger.warning(f"Limite violado: {v}")
        if self_check:
            return EXIT_BOUND
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser e despacho
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jackson-flows",
        description="Fluxos de clientes em redes de Jackson: analítica de laços, "
                    "simulação e aproximação binomial negativa",
    )
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", required=True, type=Path, help="arquivo JSON do cenário")
        p.add_argument("--seed", type=int, help="semente base (U64)")
        p.add_argument("--replicates", type=int, help="número de réplicas")
        p.add_argument("--t", type=float, help="comprimento da janela")
        p.add_argument("--variance-mode", choices=[EMPIRICAL, ASYMPTOTIC])
        p.add_argument("--out", type=Path, help="diretório de saída")

    common(sub.add_parser("solve", help="equações de tráfego e distribuição estacionária"))
    common(sub.add_parser("analyze", help="w_C, ε_C, σ_C e limites"))
    p_sim = sub.add_parser("simulate", help="simula réplicas de Ξ_{C,t}")
    common(p_sim)
    p_sim.add_argument("--dump-events", action="store_true",
                       help="grava events.csv da réplica 0")
    p_cmp = sub.add_parser("compare", help="relatório NB vs Poisson vs empírico")
    common(p_cmp)
    p_cmp.add_argument("--samples", type=Path, help="arquivo de amostras (padrão OUT/samples.csv)")
    p_cmp.add_argument("--self-check", action="store_true",
                       help="sai com código 4 se algum limite for violado")
    p_sweep = sub.add_parser("sweep", help="varredura em t do limite vs TV empírico")
    common(p_sweep)
    p_sweep.add_argument("--self-check", action="store_true")
    return parser


def _describe(error: JacksonFlowsError, config: Optional[ScenarioConfig]) -> str:
    if isinstance(error, RowSumViolation) and config is not None:
        line = routing_row_line(config.network, error.queue)
        if line is not None:
            return f"{config.network}:{line}: {error}"
        return f"{config.network}: {error}"
    return str(error)


def dispatch(args: argparse.Namespace) -> int:
    """Executa o subcomando e converte exceções em códigos de saída."""
    config: Optional[ScenarioConfig] = None
    try:
        config = apply_overrides(load_scenario(args.config), args)
        if args.command == "solve":
            cmd_solve(config)
            return EXIT_OK
        if args.command == "analyze":
            cmd_analyze(config)
            return EXIT_OK
        if args.command == "simulate":
            cmd_simulate(config, dump_events=args.dump_events)
            return EXIT_OK
        if args.command == "compare":
            return cmd_compare(config, args.samples, args.self_check)
        if args.command == "sweep":
            return cmd_sweep(config, args.self_check)
        raise ConfigError(f"subcomando desconhecido: {args.command}")
    except ConfigError as e:
        logger.error(str(e))
        print(f"❌ Erro de configuração: {e}")
        return EXIT_CONFIG
    except (NetworkValidationError, NumericalError, LinkSetError, TrackingDisabled) as e:
        message = _describe(e, config)
        logger.error(message)
        print(f"❌ {message}")
        return EXIT_NUMERIC


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Ponto de entrada programático (sem configurar logging)."""
    args = build_parser().parse_args(argv)
    return dispatch(args)
