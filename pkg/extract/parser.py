import builtins
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import tree_sitter_java
import tree_sitter_python
from loguru import logger
from tree_sitter import Language, Parser

from extract.types import SourceUnit
from utils.exceptions import ParseError

GRAMMAR_DIR = Path(__file__).resolve().parent.parent / "config" / "grammars"

_LANGUAGE_FACTORIES = {
    "python": tree_sitter_python.language,
    "java": tree_sitter_java.language,
}

JAVA_BUILTINS = frozenset({
    "System", "String", "Math", "Integer", "Long", "Double", "Float", "Boolean",
    "Character", "Object", "List", "ArrayList", "Map", "HashMap", "Set",
    "HashSet", "Arrays", "Collections", "Exception", "RuntimeException",
    "StringBuilder", "out", "println", "print", "length", "size",
})


@dataclass(frozen=True)
class GrammarProfile:
    """Per-language mapping tables loaded from config/grammars/<language>.json"""
    language: str
    root_kind: str
    node_kinds: dict
    roles: dict
    dropped_kinds: frozenset
    identifier_kinds: frozenset
    import_kinds: frozenset
    function_kinds: frozenset
    parameter_container_kinds: frozenset
    builtins: frozenset

    def taxonomy_type(self, kind: str):
        return self.node_kinds.get(kind)

    def role(self, parent_kind: str, field_name) -> str:
        if field_name is None:
            return "contains"
        return self.roles.get(
            f"{parent_kind}.{field_name}",
            self.roles.get(f"*.{field_name}", "contains"),
        )


@lru_cache(maxsize=None)
def load_profile(language: str) -> GrammarProfile:
    path = GRAMMAR_DIR / f"{language}.json"
    if language not in _LANGUAGE_FACTORIES or not path.exists():
        raise ValueError(f"no registered grammar for '{language}'")
    table = json.loads(path.read_text(encoding="utf-8"))
    names = frozenset(dir(builtins)) if table["builtins"] == "python" else JAVA_BUILTINS
    return GrammarProfile(
        language=table["language"],
        root_kind=table["root_kind"],
        node_kinds=dict(table["node_kinds"]),
        roles=dict(table["roles"]),
        dropped_kinds=frozenset(table["dropped_kinds"]),
        identifier_kinds=frozenset(table["identifier_kinds"]),
        import_kinds=frozenset(table["import_kinds"]),
        function_kinds=frozenset(table["function_kinds"]),
        parameter_container_kinds=frozenset(table["parameter_container_kinds"]),
        builtins=names,
    )


@lru_cache(maxsize=None)
def _language(language: str) -> Language:
    return Language(_LANGUAGE_FACTORIES[language]())


@dataclass(frozen=True)
class SyntaxTree:
    """An error-free tree-sitter tree with the source bytes it was parsed from"""
    tree: object
    source: bytes
    profile: GrammarProfile

    @property
    def root(self):
        return self.tree.root_node


def first_error_offset(root, source_length: int):
    """Byte offset of the earliest syntax problem, or None for a clean tree"""
    if not root.has_error:
        return None
    offsets = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_missing:
            offsets.append(node.start_byte)
        elif node.type == "ERROR":
            offsets.append(source_length if node.end_byte >= source_length else node.start_byte)
        if node.has_error:
            stack.extend(node.children)
    return min(offsets) if offsets else root.start_byte


def parse_source(unit: SourceUnit) -> SyntaxTree:
    profile = load_profile(unit.language)
    source = unit.code.encode("utf-8")
    # parsers are cheap and not shared between threads
    parser = Parser(_language(unit.language))
    tree = parser.parse(source)

    offset = first_error_offset(tree.root_node, len(source))
    if offset is not None:
        logger.debug(f"{unit.id}: syntax error at byte {offset}")
        raise ParseError(offset)
    return SyntaxTree(tree=tree, source=source, profile=profile)


def iter_named_children(node, profile: GrammarProfile):
    """Yield (child, field_name) for named, non-dropped children in source order"""
    cursor = node.walk()
    if not cursor.goto_first_child():
        return
    while True:
        child = cursor.node
        if child.is_named and child.type not in profile.dropped_kinds:
            yield child, cursor.field_name
        if not cursor.goto_next_sibling():
            break
