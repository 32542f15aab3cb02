"""Consistency checking, minimal repairs and consistent query answering for
numerical databases under linear aggregate constraints."""

from .circuits import Circuit, brute_force_sat, encode_circuit, gen_circuit
from .constraints import ConstraintSet, desugar_equalities
from .cqa import CQAVerdict, GroundAtomQuery, cqa, make_query
from .dsl import parse_constraints, parse_ground_atom
from .errors import (
    BranchLimitError,
    ConstraintError,
    ConstraintSyntaxError,
    InvalidUpdateError,
    LoadError,
    NumRepairError,
    ResourceError,
    SchemaError,
)
from .evaluator import ViolationReport, check, ground_all, is_consistent
from .linear import BranchSet, SupportEncoding, adjusted_constant, encode_support, search_support
from .linsys import LinearSystem, Row
from .project import Project, fixture_path, load_fixture, load_project, write_project
from .relational import (
    CellRef,
    Instance,
    TupleId,
    Update,
    UpdateSet,
    apply_update_set,
    load_instance,
    make_instance,
    parse_schema,
    validate_update_set,
)
from .repair import (
    RepairReport,
    RepairVerdict,
    SearchLimits,
    check_repair,
    feasible,
    minimal_supports,
    repair_exists,
)
from .solver import BoundExhausted, Feasible, Infeasible, SolverConfig, solve, verify

__version__ = "0.1.0"
