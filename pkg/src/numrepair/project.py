"""Project directories: schema, one CSV per relation, constraints, optional config.

Layout::

    schema.txt        relation declarations
    <Relation>.csv    one table per relation, header row first
    constraints.acl   aggregation functions and rules
    config.json       optional: max_support, max_branches, box, max_nodes
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .circuits import CIRCUIT_CONSTRAINTS, CIRCUIT_SCHEMA, Circuit, encode_circuit
from .constraints import ConstraintSet
from .dsl import parse_constraints
from .errors import LoadError
from .relational import Instance, load_instance, parse_schema, write_table
from .repair import DEFAULT_MAX_SUPPORT, SearchLimits
from .solver import SolverConfig

SCHEMA_FILE = "schema.txt"
CONSTRAINTS_FILE = "constraints.acl"
CONFIG_FILE = "config.json"
CONFIG_KEYS = ("max_support", "max_branches", "box", "max_nodes")


@dataclass(frozen=True)
class Project:
    path: Path
    instance: Instance
    constraints: ConstraintSet
    constraints_text: str
    config: dict = field(default_factory=dict)

    def limits(self, **overrides) -> SearchLimits:
        """Search limits from the config file, with non-``None`` overrides applied."""
        cfg = {**self.config, **{k: v for k, v in overrides.items() if v is not None}}
        solver = SolverConfig(box=cfg.get("box"), max_nodes=cfg.get("max_nodes", SolverConfig.max_nodes))
        return SearchLimits(cfg.get("max_support", DEFAULT_MAX_SUPPORT), cfg.get("max_branches"), solver)


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_config(path: Path) -> dict:
    if not path.exists():
        return {}
    try:
        cfg = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise LoadError(f"{path}: expected a JSON object")
    unknown = set(cfg) - set(CONFIG_KEYS)
    if unknown:
        raise LoadError(f"{path}: unknown keys {sorted(unknown)}")
    for k, v in cfg.items():
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 0):
            raise LoadError(f"{path}: {k} must be a non-negative integer")
    return cfg


def load_project(directory: Union[str, Path]) -> Project:
    """Load and validate a project directory; raises ``LoadError`` or a parse error."""
    root = Path(directory)
    if not root.is_dir():
        raise LoadError(f"project directory {root} does not exist")
    schema_text = _read(root / SCHEMA_FILE)
    schema = parse_schema(schema_text)
    tables = {name: root / f"{name}.csv" for name in schema.names}
    for name, path in tables.items():
        if not path.exists():
            raise LoadError(f"missing table file {path.name} for relation {name}")
    instance = load_instance(schema_text, tables)
    constraints_text = _read(root / CONSTRAINTS_FILE)
    cs = parse_constraints(constraints_text, schema)
    return Project(root, instance, cs, constraints_text, _load_config(root / CONFIG_FILE))


def write_project(
    directory: Union[str, Path],
    instance: Instance,
    constraints_text: str,
    config: Optional[dict] = None,
    schema_text: Optional[str] = None,
) -> Path:
    """Write a project directory that ``load_project`` reads back unchanged."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    if schema_text is None:
        schema_text = instance.schema.to_text()
    (root / SCHEMA_FILE).write_text(schema_text, encoding="utf-8")
    for name in instance.schema.names:
        (root / f"{name}.csv").write_text(write_table(instance, name), encoding="utf-8")
    (root / CONSTRAINTS_FILE).write_text(constraints_text, encoding="utf-8")
    if config:
        (root / CONFIG_FILE).write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
    return root


def write_circuit_project(directory: Union[str, Path], circuit: Circuit) -> Path:
    instance, _ = encode_circuit(circuit)
    header = f"# {circuit.describe()}\n"
    return write_project(directory, instance, header + CIRCUIT_CONSTRAINTS, schema_text=CIRCUIT_SCHEMA)


def fixture_path(name: str = "cash_budget") -> Path:
    """Directory of a project shipped with the package."""
    path = Path(str(resources.files("numrepair") / "data" / name))
    if not path.is_dir():
        raise LoadError(f"no bundled project named {name!r}")
    return path


def load_fixture(name: str = "cash_budget") -> Project:
    return load_project(fixture_path(name))
