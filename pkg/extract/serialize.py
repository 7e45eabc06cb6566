from extract.types import CodePropertyGraph


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def _edge_lines(graph: CodePropertyGraph) -> list:
    return [
        f"edge {edge.src} -> {edge.dst} [{edge.edge_class}/{edge.attr}]"
        for edge in sorted(graph.edges, key=lambda edge: edge.sort_key)
    ]


def serialize_graph_text(graph: CodePropertyGraph) -> str:
    """GraphText listing: node lines in id order, then edge lines sorted by (src, dst, attr)

    Newlines inside node text are escaped so every node stays on one line.
    """
    lines = [
        f"node {node.id} {node.node_type}: {_escape(node.text)}"
        for node in sorted(graph.nodes, key=lambda node: node.id)
    ]
    lines.extend(_edge_lines(graph))
    return "\n".join(lines) + "\n"


def canonical_form(graph: CodePropertyGraph) -> str:
    """Text-free serialization; equal forms mean isomorphic graphs

    Ids are DFS pre-order positions of an ordered tree, so two graphs whose
    syntax trees have the same shape get the same ids and the identity map is
    the bijection.
    """
    lines = [f"node {node.id} {node.node_type}" for node in sorted(graph.nodes, key=lambda node: node.id)]
    lines.extend(_edge_lines(graph))
    return "\n".join(lines)
