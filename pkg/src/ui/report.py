"""
report - Escrita de artefatos reprodutíveis (JSON + CSV)

Os arquivos são gerados sem carimbo de tempo e com chaves ordenadas, de
modo que (config, seed) produzem bytes idênticos.
"""

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import scipy

from ..core import __version__
from ..core.exceptions import ConfigError
from ..core.simulator import ClusterSummary, CountSamples

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = ["replicate_index", "base_seed", "t", "count",
                  "distinct_customers", "mean_cluster_size", "max_cluster_size"]


def _jsonable(value: Any) -> Any:
    """Converte tipos numpy/tuplas para tipos JSON nativos."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Path):
        return value.as_posix()
    return value


def canonical_json(data: Dict) -> str:
    return json.dumps(_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False,
                      allow_nan=False) + "\n"


def config_hash(data: Dict) -> str:
    """SHA-256 da configuração canônica."""
    payload = json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def provenance(seed: int, scenario: Dict) -> Dict:
    return {
        "seed": int(seed),
        "versions": {"jackson_flows": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "config_hash": config_hash(scenario),
    }


@dataclass
class ApproxReport:
    """
    Relatório de comparação: cada limite acompanha a quantidade empírica que limita.

    Attributes:
        sections (dict): blocos já serializáveis (traffic, link_stats, moments, ...)
        checks (list): pares (empírico, limite, orçamento, ok)
    """

    sections: Dict[str, Any]
    checks: List[Dict[str, Any]] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def add_check(self, name: str, empirical: float, bound: float, budget: float = 0.0,
                  kind: str = "upper"):
        if kind == "upper":
            ok = empirical <= bound + budget
        else:
            ok = empirical >= bound - budget
        self.checks.append({"name": name, "empirical": empirical, "bound": bound,
                            "budget": budget, "kind": kind, "ok": bool(ok)})

    @property
    def violations(self) -> List[Dict[str, Any]]:
        return [c for c in self.checks if not c["ok"]]

    def to_dict(self) -> Dict:
        return {**self.sections, "checks": self.checks, "provenance": self.provenance}


# ---------------------------------------------------------------------------
# Escrita
# ---------------------------------------------------------------------------

def write_json(data: Dict, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(data), encoding="utf-8")
    logger.info(f"✓ JSON salvo: {path}")
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_csv(rows: Iterable[Sequence[Any]], header: Sequence[str],
              path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        count = 0
        for row in rows:
            writer.writerow([_cell(v) for v in row])
            count += 1
    logger.info(f"✓ CSV salvo: {path} ({count} linhas)")
    return path


def write_samples(samples: CountSamples, path: Union[str, Path]) -> Path:
    """Grava CountSamples (uma linha por réplica) com contagens por link."""
    link_cols = [f"link_{j}_{k}" for j, k in samples.links]
    header = SAMPLE_COLUMNS + link_cols
    rows = []
    for i, (count, (base_seed, index)) in enumerate(zip(samples.samples, samples.seeds)):
        if samples.clusters:
            c = samples.clusters[i]
            cluster = [c.distinct_customers, c.mean_size, c.max_size]
        else:
            cluster = ["", "", ""]
        per_link = samples.per_link[i].tolist() if samples.per_link.size else []
        rows.append([index, base_seed, samples.t, int(count), *cluster, *per_link])
    return write_csv(rows, header, path)


def read_samples(path: Union[str, Path]) -> CountSamples:
    """
    Lê um arquivo gerado por write_samples.

    Raises:
        ConfigError: arquivo ausente ou malformado
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("arquivo de amostras não encontrado (rode 'simulate' antes)",
                          path=str(path))
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in SAMPLE_COLUMNS if c not in header]
        if missing:
            raise ConfigError(f"colunas ausentes: {missing}", path=str(path), line=1)
        link_cols = [c for c in header if c.startswith("link_")]
        counts, clusters, seeds, per_link, ts = [], [], [], [], set()
        for lineno, row in enumerate(reader, start=2):
            try:
                counts.append(int(row["count"]))
                seeds.append((int(row["base_seed"]), int(row["replicate_index"])))
                ts.add(float(row["t"]))
                if row["distinct_customers"] != "":
                    clusters.append(ClusterSummary(int(row["distinct_customers"]),
                                                   float(row["mean_cluster_size"]),
                                                   int(row["max_cluster_size"])))
                per_link.append([int(row[c]) for c in link_cols])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"linha inválida: {e}", path=str(path), line=lineno)
    if not counts:
        raise ConfigError("arquivo de amostras vazio", path=str(path))
    if len(ts) != 1:
        raise ConfigError("amostras com janelas t diferentes", path=str(path))
    links = tuple(tuple(int(x) for x in c.split("_")[1:]) for c in link_cols)
    logger.info(f"Amostras lidas de {path}: {len(counts)} réplicas")
    return CountSamples(
        t=ts.pop(),
        links=links,
        samples=np.array(counts, dtype=np.int64),
        clusters=clusters,
        seeds=seeds,
        per_link=np.array(per_link, dtype=np.int64).reshape(len(counts), len(link_cols)),
    )
