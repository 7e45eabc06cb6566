from extract.ast_graph import build_ast_graph
from extract.control_flow import attach_cfg_edges
from extract.data_flow import attach_dfg_edges
from extract.obfuscate import obfuscate_identifiers
from extract.parser import parse_source
from extract.pipeline import extract_graph, select_edge_classes, verify_graph
from extract.serialize import canonical_form, serialize_graph_text
from extract.types import CodePropertyGraph, CpgEdge, CpgNode, SourceUnit

__all__ = [
    "SourceUnit", "CpgNode", "CpgEdge", "CodePropertyGraph",
    "parse_source", "build_ast_graph", "attach_cfg_edges", "attach_dfg_edges",
    "obfuscate_identifiers", "serialize_graph_text", "canonical_form",
    "extract_graph", "verify_graph", "select_edge_classes",
]
