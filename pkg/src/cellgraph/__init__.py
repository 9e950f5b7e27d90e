"""Social-network views of cellular traffic: base stations, apps and users.

Traffic records are binned into per-entity series, related by Pearson
correlation, filtered to a planar maximally filtered graph (PMFG) and split
into communities with Louvain. User networks come straight from call records.
"""
from .community import (
    CommunityPartition,
    ScenarioLabel,
    adjusted_rand_index,
    label_scenarios,
    louvain,
    modularity,
)
from .corr import CorrelationMatrix, correlation_matrix, pearson
from .errors import CellgraphError, RecordError, SchemaError, UndefinedStatisticError
from .pgraph import (
    Edge,
    Node,
    PlanarCertificate,
    WeightedGraph,
    export,
    from_json,
    is_planar,
    planar,
    pmfg,
    threshold_filter,
    verify_certificate,
)
from .records import (
    CallRecord,
    CellInfo,
    FlowRecord,
    ParseReport,
    parse_call_csv,
    parse_cells_csv,
    parse_flow_csv,
)
from .series import (
    ConcentrationCurve,
    TimeSeries,
    aggregate,
    autocorrelation,
    concentration,
    cross_correlation,
    top_share,
)
from .socialnets import PipelineConfig, build_asn, build_bssn, build_usn

__version__ = "0.1.0"
