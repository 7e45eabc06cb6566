import random
from typing import NamedTuple, Optional

from loguru import logger

from extract.parser import GrammarProfile, iter_named_children, parse_source
from extract.types import SourceUnit

TARGET_GROUP_TAXONOMY = frozenset({"pattern_list", "expression_list", "parenthesized_expression", "default_parameter"})
# opened in addition to the grammar's function kinds
SCOPE_KINDS = frozenset({
    "lambda", "lambda_expression",
    "list_comprehension", "set_comprehension", "dictionary_comprehension", "generator_expression",
})
# names bound directly in these are reached as members and stay as written
CLASS_KINDS = frozenset({"class_definition"})
KEYWORD_ARGUMENT_KINDS = frozenset({"keyword_argument"})
SPLAT_PARAMETER_KINDS = frozenset({"list_splat_pattern", "dictionary_splat_pattern"})
# (parent kind, field) of an identifier that names a member of some object
MEMBER_FIELDS = frozenset({("attribute", "attribute"), ("field_access", "field"), ("method_invocation", "name")})
MODULE_SCOPE = "module"


class Occurrence(NamedTuple):
    start: int
    end: int
    name: str
    renamable: bool
    scopes: tuple
    member: bool = False
    # callee of a keyword-argument name, when it resolves to a plain name
    callee: Optional[str] = None


class _Renamer:
    """Collects locally defined names and the identifier occurrences to rewrite"""

    def __init__(self, profile: GrammarProfile, source: bytes):
        self.profile = profile
        self.source = source
        self.defined = set()
        self.functions = set()
        self.imported = set()
        self.parameters = {}
        self.bindings = {MODULE_SCOPE: set()}
        self.scope_stack = [MODULE_SCOPE]
        self.class_scopes = set()
        self.occurrences = []

    def text(self, node) -> str:
        return self.source[node.start_byte:node.end_byte].decode("utf-8")

    def is_identifier(self, node) -> bool:
        return node.type in self.profile.identifier_kinds

    def bind(self, name: str):
        self.defined.add(name)
        self.bindings.setdefault(self.scope_stack[-1], set()).add(name)

    def bind_target(self, node):
        if self.is_identifier(node):
            self.bind(self.text(node))
            return
        if self.profile.taxonomy_type(node.type) in TARGET_GROUP_TAXONOMY:
            for child, _ in iter_named_children(node, self.profile):
                self.bind_target(child)

    def parameter_name(self, node):
        if self.is_identifier(node):
            return self.text(node)
        named = node.child_by_field_name("name")
        if named is not None and self.is_identifier(named):
            return self.text(named)
        stack = [node]
        while stack:
            current = stack.pop()
            if self.is_identifier(current):
                return self.text(current)
            stack.extend(reversed([child for child, _ in iter_named_children(current, self.profile)]))
        return None

    def bind_parameter(self, node, function=None):
        name = self.parameter_name(node)
        if name is None:
            return
        self.bind(name)
        if function is not None and node.type not in SPLAT_PARAMETER_KINDS:
            self.parameters.setdefault(function, set()).add(name)

    def function_name(self, node):
        if node is None or node.type not in self.profile.function_kinds:
            return None
        named = node.child_by_field_name("name")
        return self.text(named) if named is not None else None

    def callee_name(self, node):
        target = node.child_by_field_name("function")
        if target is None:
            return None
        if self.is_identifier(target):
            return self.text(target)
        member = target.child_by_field_name("attribute")
        if member is not None and self.is_identifier(member):
            return self.text(member)
        return None

    def shadows_builtin(self, name: str) -> bool:
        """True when every use of a builtin's name sits in a scope that binds it"""
        uses = [occ for occ in self.occurrences if occ.name == name]
        if any(occ.member for occ in uses):
            return False
        return all(any(name in self.bindings.get(scope, ()) for scope in occ.scopes) for occ in uses)

    def visit(self, node, parent=None, field_name=None, in_import=False, in_parameters=False, callee=None):
        profile = self.profile
        in_import = in_import or node.type in profile.import_kinds

        if self.is_identifier(node):
            name = self.text(node)
            if in_import:
                self.imported.add(name)
            role = profile.role(parent.type, field_name) if parent is not None else "contains"
            keyword = parent is not None and parent.type in KEYWORD_ARGUMENT_KINDS and field_name == "name"
            renamable = not keyword and (
                role != "has_name"
                or parent.type in profile.function_kinds
                or in_parameters
                or profile.taxonomy_type(parent.type) == "call"
            )
            self.occurrences.append(Occurrence(
                node.start_byte, node.end_byte, name, renamable, tuple(self.scope_stack),
                member=parent is not None and (parent.type, field_name) in MEMBER_FIELDS,
                callee=callee if keyword else None,
            ))

        function = self.function_name(node)
        if function is not None:
            self.bind(function)
            self.functions.add(function)
        opens_scope = node.type in profile.function_kinds or node.type in SCOPE_KINDS or node.type in CLASS_KINDS
        if opens_scope:
            self.scope_stack.append((node.start_byte, node.end_byte))
            if node.type in CLASS_KINDS:
                self.class_scopes.add(self.scope_stack[-1])

        call_target = self.callee_name(node) if profile.taxonomy_type(node.type) == "call" else None
        passes_callee = node.type in KEYWORD_ARGUMENT_KINDS or profile.taxonomy_type(node.type) == "argument_list"
        for child, child_field in iter_named_children(node, profile):
            role = profile.role(node.type, child_field)
            if node.type in profile.parameter_container_kinds:
                self.bind_parameter(child, function=self.function_name(parent))
            if role == "has_target" or (node.type == "for_in_clause" and child_field == "left"):
                self.bind_target(child)
            if node.type == "as_pattern_target":
                self.bind_target(child)
            self.visit(
                child,
                parent=node,
                field_name=child_field,
                in_import=in_import,
                in_parameters=in_parameters or node.type in profile.parameter_container_kinds,
                callee=call_target if call_target is not None else (callee if passes_callee else None),
            )

        if opens_scope:
            self.scope_stack.pop()

    def member_names(self) -> set:
        return set().union(*(self.bindings.get(scope, set()) for scope in self.class_scopes))

    def rewrites(self, occurrence: Occurrence) -> bool:
        if occurrence.renamable:
            return True
        return occurrence.callee is not None and occurrence.name in self.parameters.get(occurrence.callee, ())


def fresh_names(names, functions, taken, seed: int) -> dict:
    """Deterministic fn_/v_ replacements, in the order names are given"""
    rng = random.Random(seed)
    used = set(taken)
    mapping = {}
    for name in names:
        prefix = "fn_" if name in functions else "v_"
        while True:
            candidate = f"{prefix}{rng.getrandbits(24):06x}"
            if candidate not in used:
                break
        used.add(candidate)
        mapping[name] = candidate
    return mapping


def obfuscate_identifiers(unit: SourceUnit, seed: int) -> SourceUnit:
    """
    Consistently rename local functions, parameters and variables. Imported
    names are kept, as are class attributes and methods; a builtin's name is
    renamed only where a local binding shadows it everywhere it is used.
    Keyword arguments follow the parameters of the local function they are
    passed to.
    """
    tree = parse_source(unit)
    renamer = _Renamer(tree.profile, tree.source)
    renamer.visit(tree.root)

    targets = {
        name for name in renamer.defined - renamer.imported - renamer.member_names()
        if name not in tree.profile.builtins or renamer.shadows_builtin(name)
    }
    order = []
    for occurrence in sorted(renamer.occurrences):
        if occurrence.name in targets and occurrence.name not in order:
            order.append(occurrence.name)
    taken = {occurrence.name for occurrence in renamer.occurrences}
    mapping = fresh_names(order, renamer.functions, taken, seed)

    rewritten = bytearray(tree.source)
    for occurrence in sorted(renamer.occurrences, reverse=True):
        if occurrence.name in mapping and renamer.rewrites(occurrence):
            rewritten[occurrence.start:occurrence.end] = mapping[occurrence.name].encode("utf-8")

    logger.debug(f"{unit.id}: renamed {len(mapping)} identifiers")
    return SourceUnit(id=unit.id, language=unit.language, code=rewritten.decode("utf-8"))
