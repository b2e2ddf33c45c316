"""resultdb: an in-memory relational engine for queries that return a subdatabase.

A `SELECT RESULTDB` query returns, for every participating relation, the
subset of its tuples that take part in the join result — computed natively by
semi-join reduction (with join-graph folding for cyclic queries), checked
against a brute-force oracle, or realized through four SQL rewrite methods.
"""

from .catalog import (
    Database,
    ForeignKey,
    ForeignKeyViolation,
    LoadResult,
    RelationInstance,
    RelationSchema,
    load_database,
    load_database_from_dir,
    load_schema,
    make_database,
    validate_foreign_keys,
    write_database,
)
from .engine import (
    ResultTable,
    SubDatabase,
    SubRelation,
    execute_single_table,
    oracle_resultdb,
    post_join,
    project_subdatabase,
    reduce_relations,
    select_resultdb,
    semi_join,
)
from .errors import (
    AnalysisError,
    DataError,
    EngineError,
    GraphError,
    ParseError,
    PostJoinError,
    ResultDbError,
    ScriptError,
    SemanticError,
    UnsupportedFeatureError,
)
from .frontend import AnalyzedQuery, QueryAst, QueryMode, analyze, build_join_graph, parse
from .joingraph import (
    AttrRef,
    FilterPredicate,
    GraphEdge,
    GraphNode,
    JoinGraph,
    JoinPredicate,
    apply_filters,
    fold_join_graph,
    is_cyclic,
    split_folds,
    to_dot,
)
from .rewrite import RewriteMethod, SqlScript, execute_script, generate_rewrite, script_text
from .sizing import SizeReport, compare_sizes

__version__ = "0.1.0"
