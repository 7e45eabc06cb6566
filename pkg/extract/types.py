from dataclasses import dataclass, field, replace
from typing import Optional

from config.taxonomy import EDGE_CLASSES

SUPPORTED_LANGUAGES = ("python", "java")


@dataclass(frozen=True)
class SourceUnit:
    id: str
    language: str
    code: str

    def __post_init__(self):
        if not self.code:
            raise ValueError(f"source unit '{self.id}' has empty code")
        if self.language not in SUPPORTED_LANGUAGES:
            raise ValueError(f"unsupported language '{self.language}'")


@dataclass(frozen=True)
class CpgNode:
    id: int
    node_type: str
    text: str
    span: tuple

    def to_dict(self) -> dict:
        return {"id": self.id, "type": self.node_type, "text": self.text, "span": list(self.span)}

    @classmethod
    def from_dict(cls, data: dict) -> "CpgNode":
        return cls(int(data["id"]), data["type"], data["text"], tuple(int(x) for x in data["span"]))


@dataclass(frozen=True)
class CpgEdge:
    src: int
    dst: int
    edge_class: str
    attr: str

    def __post_init__(self):
        if self.attr not in EDGE_CLASSES.get(self.edge_class, ()):
            raise ValueError(f"attr '{self.attr}' is not a {self.edge_class} attribute")

    @property
    def sort_key(self):
        return (self.src, self.dst, self.attr)

    def to_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst, "class": self.edge_class, "attr": self.attr}

    @classmethod
    def from_dict(cls, data: dict) -> "CpgEdge":
        return cls(int(data["src"]), int(data["dst"]), data["class"], data["attr"])


@dataclass(frozen=True)
class CodePropertyGraph:
    """Typed nodes in DFS pre-order plus AST, CFG and DFG edges

    `language` and `code` travel with the graph so persisted datasets can pair
    graphs with their source text for alignment.
    """
    source_id: str
    nodes: tuple
    edges: tuple
    language: str = "python"
    code: str = ""

    def edges_of(self, edge_class: str) -> list:
        return [edge for edge in self.edges if edge.edge_class == edge_class]

    def with_edges(self, extra) -> "CodePropertyGraph":
        return replace(self, edges=tuple(self.edges) + tuple(extra))

    def count_by_class(self) -> dict:
        counts = {edge_class: 0 for edge_class in EDGE_CLASSES}
        for edge in self.edges:
            counts[edge.edge_class] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "id": self.source_id,
            "language": self.language,
            "code": self.code,
            "nodes": [node.to_dict() for node in self.nodes],
            "edges": [edge.to_dict() for edge in self.edges],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CodePropertyGraph":
        return cls(
            source_id=data["id"],
            nodes=tuple(CpgNode.from_dict(node) for node in data["nodes"]),
            edges=tuple(CpgEdge.from_dict(edge) for edge in data["edges"]),
            language=data.get("language", "python"),
            code=data.get("code", ""),
        )


@dataclass
class AstIndex:
    """Parent/children lookups over the AST edges of a graph"""
    graph: CodePropertyGraph
    parent: dict = field(default_factory=dict)
    parent_attr: dict = field(default_factory=dict)
    children: dict = field(default_factory=dict)

    def __post_init__(self):
        self.children = {node.id: [] for node in self.graph.nodes}
        for edge in self.graph.edges:
            if edge.edge_class != "AST":
                continue
            self.parent[edge.dst] = edge.src
            self.parent_attr[edge.dst] = edge.attr
            self.children[edge.src].append(edge.dst)
        for kids in self.children.values():
            kids.sort()

    def node(self, node_id: int) -> CpgNode:
        return self.graph.nodes[node_id]

    def type_of(self, node_id: int) -> str:
        return self.graph.nodes[node_id].node_type

    def attr_of(self, node_id: int) -> Optional[str]:
        return self.parent_attr.get(node_id)

    def child_with(self, node_id: int, attr: str) -> Optional[int]:
        for child in self.children[node_id]:
            if self.parent_attr[child] == attr:
                return child
        return None

    def children_with(self, node_id: int, attr: str) -> list:
        return [child for child in self.children[node_id] if self.parent_attr[child] == attr]

    def children_of_type(self, node_id: int, node_type: str) -> list:
        return [child for child in self.children[node_id] if self.type_of(child) == node_type]

    def is_leaf(self, node_id: int) -> bool:
        return not self.children[node_id]

    def subtree(self, node_id: int) -> list:
        """Node ids of the subtree rooted at node_id, in pre-order"""
        out, stack = [], [node_id]
        while stack:
            current = stack.pop()
            out.append(current)
            stack.extend(reversed(self.children[current]))
        return out
