from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from loguru import logger

from extract.ast_graph import build_ast_graph
from extract.control_flow import attach_cfg_edges
from extract.data_flow import attach_dfg_edges
from extract.obfuscate import obfuscate_identifiers
from extract.parser import parse_source
from extract.types import AstIndex, CodePropertyGraph, SourceUnit
from utils.exceptions import ParseError, TaxonomyError

LANGUAGE_SUFFIXES = {"python": (".py",), "java": (".java",)}


def extract_graph(unit: SourceUnit, obfuscate_seed=None) -> CodePropertyGraph:
    """Full extraction: parse, AST graph, then CFG and DFG edges"""
    if obfuscate_seed is not None:
        unit = obfuscate_identifiers(unit, obfuscate_seed)
    tree = parse_source(unit)
    graph = build_ast_graph(tree, unit)
    graph = attach_cfg_edges(graph)
    return attach_dfg_edges(graph)


def verify_graph(graph: CodePropertyGraph) -> list:
    """Structural problems of a graph; an empty list means it is valid"""
    problems = []
    count = len(graph.nodes)
    if [node.id for node in graph.nodes] != list(range(count)):
        problems.append("node ids are not 0..N-1 in order")
        return problems

    for edge in graph.edges:
        if not (0 <= edge.src < count and 0 <= edge.dst < count):
            problems.append(f"edge {edge.src}->{edge.dst} has an invalid endpoint")
    ast_edges = graph.edges_of("AST")
    if len(ast_edges) != count - 1:
        problems.append(f"{len(ast_edges)} AST edges for {count} nodes")

    parents = {}
    for edge in ast_edges:
        if edge.src == edge.dst:
            problems.append(f"AST self-loop on {edge.src}")
        if edge.dst in parents:
            problems.append(f"node {edge.dst} has two AST parents")
        parents[edge.dst] = edge.src
    roots = [node.id for node in graph.nodes if node.id not in parents]
    if roots != [0] or graph.nodes[0].node_type != "module":
        problems.append(f"AST roots {roots} instead of the module node")

    index = AstIndex(graph)
    if len(index.subtree(0)) != count:
        problems.append("AST does not reach every node from the root")

    for child, parent in parents.items():
        inner, outer = graph.nodes[child].span, graph.nodes[parent].span
        if inner[0] < outer[0] or inner[1] > outer[1]:
            problems.append(f"span of node {child} escapes its parent {parent}")
    source_length = len(graph.code.encode("utf-8")) if graph.code else None
    for node in graph.nodes:
        start, end = node.span
        if start < 0 or end < start or (source_length is not None and end > source_length):
            problems.append(f"span of node {node.id} out of bounds")
    return problems


def select_edge_classes(graph: CodePropertyGraph, classes) -> CodePropertyGraph:
    """View of a graph that keeps only the given edge classes"""
    keep = set(classes)
    return replace(graph, edges=tuple(edge for edge in graph.edges if edge.edge_class in keep))


@dataclass
class ExtractionResult:
    graphs: list = field(default_factory=list)
    rejected: list = field(default_factory=list)

    @property
    def counts(self) -> dict:
        return {"parsed": len(self.graphs), "rejected": len(self.rejected)}


def collect_units(path: Path, language: str):
    """
    Source units from a file or every matching file below a directory, sorted
    by path. Files that are not valid UTF-8 come back as (id, reason) rejects.
    """
    path = Path(path)
    suffixes = LANGUAGE_SUFFIXES[language]
    if path.is_file():
        files, base = [path], path.parent
    else:
        files = sorted(p for p in path.rglob("*") if p.is_file() and p.suffix in suffixes)
        base = path
    units, rejected = [], []
    for file in files:
        source_id = file.relative_to(base).as_posix()
        try:
            code = file.read_text(encoding="utf-8")
        except UnicodeDecodeError as e:
            logger.warning(f"{file}: rejected, not valid UTF-8 at byte {e.start}")
            rejected.append((source_id, f"not valid UTF-8 at byte {e.start}"))
            continue
        if not code.strip():
            logger.warning(f"{file}: empty source skipped")
            continue
        units.append(SourceUnit(id=source_id, language=language, code=code))
    return units, rejected


def extract_units(units, threads: int = 1, obfuscate_seed=None) -> ExtractionResult:
    """Extract every unit; failures are logged and counted, output order follows input order"""

    def run(unit):
        try:
            return extract_graph(unit, obfuscate_seed), None
        except ParseError as e:
            logger.warning(f"{unit.id}: rejected, {e}")
            return None, (unit.id, str(e))
        except TaxonomyError as e:
            logger.warning(f"{unit.id}: rejected, {e}")
            return None, (unit.id, str(e))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, units))
    else:
        outcomes = [run(unit) for unit in units]

    result = ExtractionResult()
    for graph, failure in outcomes:
        if graph is not None:
            result.graphs.append(graph)
        else:
            result.rejected.append(failure)
    logger.info(f"extracted {len(result.graphs)} graphs, rejected {len(result.rejected)}")
    return result
