from config.taxonomy import FIRST_LINE_TYPES
from extract.parser import SyntaxTree, iter_named_children
from extract.types import CodePropertyGraph, CpgEdge, CpgNode, SourceUnit
from utils.exceptions import TaxonomyError

ELIF_TYPES = frozenset({"elif_clause", "if_statement"})


def node_text(source: bytes, start: int, end: int, node_type: str) -> str:
    text = source[start:end].decode("utf-8", errors="replace")
    if node_type in FIRST_LINE_TYPES:
        return text.split("\n", 1)[0].rstrip("\r")
    return text


def build_ast_graph(tree: SyntaxTree, unit: SourceUnit) -> CodePropertyGraph:
    """One node per named syntax node (DFS pre-order ids) and one AST edge per parent/child pair"""
    profile = tree.profile
    source = tree.source

    unmapped = set()
    stack = [tree.root]
    while stack:
        current = stack.pop()
        if profile.taxonomy_type(current.type) is None:
            unmapped.add(current.type)
        stack.extend(child for child, _ in iter_named_children(current, profile))
    if unmapped:
        raise TaxonomyError(unmapped)

    nodes, edges = [], []
    syntax_kinds = {}
    # (syntax node, parent id, field name of the parent link)
    stack = [(tree.root, None, None)]
    while stack:
        current, parent_id, field_name = stack.pop()
        node_type = profile.taxonomy_type(current.type)
        node_id = len(nodes)
        nodes.append(CpgNode(
            id=node_id,
            node_type=node_type,
            text=node_text(source, current.start_byte, current.end_byte, node_type),
            span=(current.start_byte, current.end_byte),
        ))
        if parent_id is not None:
            parent_kind = syntax_kinds[parent_id]
            attr = profile.role(parent_kind, field_name)
            if attr == "has_else_body" and node_type in ELIF_TYPES:
                attr = "has_elif_branch"
            edges.append(CpgEdge(parent_id, node_id, "AST", attr))
        syntax_kinds[node_id] = current.type
        children = list(iter_named_children(current, profile))
        stack.extend((child, node_id, name) for child, name in reversed(children))

    return CodePropertyGraph(
        source_id=unit.id,
        nodes=tuple(nodes),
        edges=tuple(edges),
        language=unit.language,
        code=unit.code,
    )
