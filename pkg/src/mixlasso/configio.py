"""Structured-text experiment configuration.

Experiments are described by an INI document with sections [mixing], [rows],
[structure], [noise], and [sweep]; the CLI subcommands add small sections of
their own ([width], [solve], [orthants], [concentration], [slope],
[network]).  Parsing is strict: unknown kinds and missing mandatory fields
raise ValueError so a typo never silently changes an experiment.
"""

from __future__ import annotations

import configparser
import os
from typing import Dict, List, Optional

from .ensembles import MixingSpec, RowDistribution, load_matrix_csv
from .harness import AXIS_NAMES, ExperimentConfig
from .structures import StructureSpec


def _floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def read_config(path: str) -> configparser.ConfigParser:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    return parser


def _require(section, key: str, section_name: str) -> str:
    if key not in section:
        raise ValueError(f"[{section_name}] is missing mandatory key {key!r}")
    return section[key]


def mixing_from_config(parser, base_dir: str = ".") -> MixingSpec:
    if "mixing" not in parser:
        raise ValueError("config needs a [mixing] section")
    sec = parser["mixing"]
    kind = _require(sec, "kind", "mixing").strip().lower()
    rows = int(_require(sec, "rows", "mixing"))
    cols = int(_require(sec, "cols", "mixing"))
    if kind == "identity":
        return MixingSpec(rows, cols, "identity")
    if kind in ("diagonal", "rotated"):
        spectrum = _floats(_require(sec, "spectrum", "mixing"))
        seed = int(sec["seed"]) if kind == "rotated" else None
        if kind == "rotated" and "seed" not in sec:
            raise ValueError("[mixing] rotated kind requires a seed")
        return MixingSpec(rows, cols, kind, spectrum=spectrum, seed=seed)
    if kind == "explicit":
        path = os.path.join(base_dir, _require(sec, "path", "mixing"))
        return MixingSpec(rows, cols, "explicit", matrix=load_matrix_csv(path))
    raise ValueError(f"unknown mixing kind {kind!r}")


def rows_from_config(parser) -> RowDistribution:
    if "rows" not in parser:
        raise ValueError("config needs a [rows] section")
    return RowDistribution(_require(parser["rows"], "kind", "rows")
                           .strip().lower())


def structure_from_config(parser, base_dir: str = ".") -> StructureSpec:
    if "structure" not in parser:
        raise ValueError("config needs a [structure] section")
    sec = parser["structure"]
    kind = _require(sec, "kind", "structure").strip().lower()
    n = int(_require(sec, "n", "structure"))
    if kind == "sparse":
        return StructureSpec("sparse", n, sparsity=int(
            _require(sec, "sparsity", "structure")))
    if kind == "subspace":
        return StructureSpec("subspace", n,
                             dim=int(_require(sec, "dim", "structure")),
                             seed=int(_require(sec, "seed", "structure")))
    if kind == "union":
        return StructureSpec("union", n,
                             member_dims=_ints(
                                 _require(sec, "dims", "structure")),
                             seed=int(_require(sec, "seed", "structure")))
    if kind == "network":
        if "path" in sec:
            return StructureSpec(
                "network", n,
                network_path=os.path.join(base_dir, sec["path"]),
                leak=float(sec.get("leak", "0")))
        return StructureSpec(
            "network", n,
            network_dims=_ints(_require(sec, "layer_dims", "structure")),
            seed=int(_require(sec, "seed", "structure")),
            leak=float(sec.get("leak", "0")))
    raise ValueError(f"unknown structure kind {kind!r}")


def experiment_from_config(parser, base_dir: str = ".",
                           seed_override: Optional[int] = None
                           ) -> ExperimentConfig:
    for name in ("noise", "sweep"):
        if name not in parser:
            raise ValueError(f"config needs a [{name}] section")
    noise = parser["noise"]
    sweep = parser["sweep"]
    axes = []
    for key in sweep:
        if key.startswith("axis_"):
            name = key[len("axis_"):]
            if name not in AXIS_NAMES:
                raise ValueError(f"unknown sweep axis {name!r}")
            axes.append((name, _floats(sweep[key])))
    master = seed_override if seed_override is not None else int(
        _require(sweep, "master_seed", "sweep"))
    return ExperimentConfig(
        mixing=mixing_from_config(parser, base_dir),
        row_dist=rows_from_config(parser),
        structure=structure_from_config(parser, base_dir),
        noise_norm=float(_require(noise, "noise_norm", "noise")),
        mismatch=float(_require(noise, "mismatch", "noise")),
        eps_target=float(_require(noise, "eps_target", "noise")),
        trials=int(_require(sweep, "trials", "sweep")),
        master_seed=master,
        axes=tuple(axes),
        eps_inject=float(noise.get("eps_inject", "0")),
    )


def describe_experiment(config: ExperimentConfig) -> List[str]:
    """One comment line per resolved field, for self-describing outputs."""
    lines = [
        f"mixing = {config.mixing.describe()}",
        f"rows = {config.row_dist.describe()}",
        f"structure = {config.structure.describe()}",
        f"noise_norm = {config.noise_norm:g}",
        f"mismatch = {config.mismatch:g}",
        f"eps_target = {config.eps_target:g}",
        f"eps_inject = {config.eps_inject:g}",
        f"trials = {config.trials}",
        f"master_seed = {config.master_seed}",
    ]
    for name, values in config.axes:
        lines.append(f"axis_{name} = {','.join(f'{v:g}' for v in values)}")
    return lines


def section_items(parser, name: str) -> Dict[str, str]:
    return dict(parser[name]) if name in parser else {}
