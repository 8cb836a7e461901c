# varbesov/experiments/corpus.py
"""Deterministic test-function corpora.

Every entry is drawn from its own child of ``SeedSequence(seed)``, so an
entry depends only on (seed, index, family) and the same corpus can be
regenerated one grid level finer. All entries vanish outside the inner
half [-R/2, R/2]^n of the box.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple, Union

import numpy as np

from ..analysis.fourier import psi0
from ..analysis.splines import SplineLayer
from ..config import CorpusConfig
from ..core.error_handling import ConfigError, GridError
from ..core.grid import GridFunction
from ..utils import ensure_directory, get_file_hash

logger = logging.getLogger(__name__)

MANIFEST_NAME = "corpus.json"


@dataclass(frozen=True, eq=False)
class CorpusEntry:
    id: str
    function: GridFunction
    family: str
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def tag(self) -> str:
        return f"{self.family}(seed={self.params.get('seed')}, index={self.params.get('index')})"


@dataclass(frozen=True)
class Corpus:
    entries: Tuple[CorpusEntry, ...]
    config: CorpusConfig

    def __iter__(self) -> Iterator[CorpusEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def functions(self) -> List[GridFunction]:
        return [entry.function for entry in self.entries]

    def at_level(self, level: int) -> "Corpus":
        """The same corpus regenerated on a grid of another level."""
        return generate_corpus(self.config.model_copy(update={"level": level}))


def _bump(radius_sq: np.ndarray) -> np.ndarray:
    out = np.zeros(np.shape(radius_sq))
    inside = radius_sq < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - radius_sq[inside]))
    return out


def _scaled_distance_sq(coords, center: np.ndarray, radius: float) -> np.ndarray:
    return sum((c - x0) ** 2 for c, x0 in zip(coords, center)) / radius ** 2


def _bump_params(rng: np.random.Generator, dim: int, scale: float) -> Dict[str, Any]:
    return {
        "center": (rng.uniform(-0.25, 0.25, dim) * scale).tolist(),
        "radius": float(rng.uniform(0.3, 0.6) * scale),
        "amplitude": float(rng.uniform(0.5, 2.0)),
    }


def _bump_values(grid: GridFunction, params: Dict[str, Any]) -> np.ndarray:
    dist = _scaled_distance_sq(grid.coordinates(), np.asarray(params["center"]), params["radius"])
    return params["amplitude"] * _bump(np.broadcast_to(dist, grid.shape))


def _bumps(rng, grid, config) -> Tuple[np.ndarray, Dict[str, Any]]:
    params = _bump_params(rng, grid.dim, config.box_radius / 2.0)
    return _bump_values(grid, params), params


def _modulated_bumps(rng, grid, config) -> Tuple[np.ndarray, Dict[str, Any]]:
    params = _bump_params(rng, grid.dim, config.box_radius / 2.0)
    params["omega"] = float(rng.uniform(2.0, 6.0))
    params["phase"] = float(rng.uniform(0.0, 2.0 * np.pi))
    carrier = np.cos(params["omega"] * grid.coordinates()[0] + params["phase"])
    return _bump_values(grid, params) * carrier, params


def _piecewise_polys(rng, grid, config) -> Tuple[np.ndarray, Dict[str, Any]]:
    """A polynomial of degree < spline_degree on |x| <= R/4, cut off smoothly by R/2."""
    degree = int(rng.integers(0, config.spline_degree))
    coefficients = rng.uniform(-1.0, 1.0, (degree + 1,) * grid.dim)
    coords = grid.coordinates()
    poly = np.zeros(grid.shape)
    for powers in np.ndindex(coefficients.shape):
        if sum(powers) <= degree:
            term = coefficients[powers]
            for c, e in zip(coords, powers):
                term = term * c ** e
            poly = poly + term
    radius = np.sqrt(sum(c ** 2 for c in coords))
    cutoff = psi0(np.broadcast_to(radius, grid.shape) * 4.0 / config.box_radius)
    return poly * cutoff, {"degree": degree, "coefficients": coefficients.tolist()}


def _random_splines(rng, grid, config) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Random level-k layer whose splines all live in the inner half of the box."""
    k, l = config.spline_level, config.spline_degree
    first = int(np.ceil(-config.box_radius / 2.0 * 2 ** k))
    last = int(np.floor(config.box_radius / 2.0 * 2 ** k)) - (l + 1)
    if last < first:
        raise GridError(f"no degree-{l} spline of level {k} fits in the inner half of the box")
    shape = (last - first + 1,) * grid.dim
    layer = SplineLayer(k, l, (first,) * grid.dim, rng.standard_normal(shape))
    return layer.evaluate(grid).values, {"layer": layer.to_json()}


_FAMILIES = {
    "bumps": _bumps,
    "modulated_bumps": _modulated_bumps,
    "piecewise_polys": _piecewise_polys,
    "random_splines": _random_splines,
}


def generate_corpus(config: CorpusConfig) -> Corpus:
    """``config.count`` entries cycling through ``config.families``."""
    grid = GridFunction.zeros(config.dim, config.box_radius, config.level)
    children = np.random.SeedSequence(config.seed).spawn(config.count)
    entries = []
    for index, child in enumerate(children):
        family = config.families[index % len(config.families)]
        values, params = _FAMILIES[family](np.random.default_rng(child), grid, config)
        params.update(seed=config.seed, index=index)
        entries.append(CorpusEntry(f"{family}_{index:03d}", grid.with_values(values), family,
                                   params))
    logger.debug("generated %d corpus entries at J=%d", len(entries), config.level)
    return Corpus(tuple(entries), config)


def save_corpus(corpus: Corpus, directory: Union[str, Path]) -> Path:
    """One CSV per entry plus a ``corpus.json`` manifest; returns the manifest path."""
    directory = ensure_directory(directory)
    records = []
    for entry in corpus:
        name = f"{entry.id}.csv"
        entry.function.to_csv(directory / name)
        records.append({"id": entry.id, "family": entry.family, "file": name,
                        "sha256": get_file_hash(directory / name), "params": entry.params})
    manifest = {"schema": 1, "config": corpus.config.model_dump(), "entries": records}
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_corpus(path: Union[str, Path]) -> Corpus:
    """Read a corpus from its manifest (or the directory holding it)."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        manifest = json.loads(path.read_text())
        config = CorpusConfig.model_validate(manifest["config"])
        records = manifest["entries"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read corpus manifest {path}: {exc}") from exc
    entries = []
    for rec in records:
        csv_path = path.parent / rec["file"]
        digest = rec.get("sha256")
        if digest is not None and get_file_hash(csv_path) != digest:
            raise ConfigError(f"corpus file {csv_path} does not match its manifest checksum")
        entries.append(CorpusEntry(rec["id"], GridFunction.from_csv(csv_path), rec["family"],
                                   rec.get("params", {})))
    return Corpus(tuple(entries), config)
