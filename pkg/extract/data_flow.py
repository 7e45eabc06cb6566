"""
Intraprocedural reaching definitions over the structured AST

Every function body (and the module's own statements) is analyzed in its own
scope. Branches merge their outgoing facts; loops are iterated until the fact
at the loop head stops changing.
"""
from dataclasses import dataclass, field
from typing import Optional

from config.taxonomy import CLAUSE_TYPES, STATEMENT_TYPES
from extract.types import AstIndex, CodePropertyGraph, CpgEdge

ASSIGNMENT_TYPES = frozenset({"assignment", "augmented_assignment"})
TARGET_GROUP_TYPES = frozenset({"pattern_list", "expression_list", "parenthesized_expression", "default_parameter"})


class ReachingDefs:
    """Immutable map from variable name to the ids of definitions reaching a point"""

    def __init__(self, defs=None):
        self.defs = dict(defs or {})

    def lookup(self, name: str) -> frozenset:
        return self.defs.get(name, frozenset())

    def define(self, name: str, node_id: int) -> "ReachingDefs":
        updated = dict(self.defs)
        updated[name] = frozenset({node_id})
        return ReachingDefs(updated)

    def merge(self, other: "ReachingDefs") -> "ReachingDefs":
        merged = dict(self.defs)
        for name, ids in other.defs.items():
            merged[name] = merged.get(name, frozenset()) | ids
        return ReachingDefs(merged)

    def __eq__(self, other):
        return isinstance(other, ReachingDefs) and self.defs == other.defs


def merge_all(states) -> Optional[ReachingDefs]:
    """Merge facts from several paths; None marks a path that never falls through"""
    live = [state for state in states if state is not None]
    if not live:
        return None
    result = live[0]
    for state in live[1:]:
        result = result.merge(state)
    return result


@dataclass
class LoopFrame:
    breaks: list = field(default_factory=list)
    continues: list = field(default_factory=list)


class DataFlowBuilder:
    def __init__(self, graph: CodePropertyGraph):
        self.graph = graph
        self.index = AstIndex(graph)
        self.flows = set()
        self.contributions = set()
        self.frames = []

    def text(self, node_id: int) -> str:
        return self.index.node(node_id).text

    def is_variable(self, node_id: int) -> bool:
        return (
            self.index.type_of(node_id) == "identifier"
            and self.index.is_leaf(node_id)
            and self.index.attr_of(node_id) != "has_name"
        )

    # expressions

    def use(self, node_id: int, state: ReachingDefs):
        for definition in state.lookup(self.text(node_id)):
            self.flows.add((definition, node_id))

    def expression(self, node_id: int, state: ReachingDefs):
        """Walk an expression in evaluation order; returns (state, variable uses)"""
        node_type = self.index.type_of(node_id)
        if node_type == "function_definition":
            return state, []
        if node_type in ASSIGNMENT_TYPES:
            return self.assignment(node_id, state)
        if self.index.child_with(node_id, "has_target") is not None:
            return self.alias(node_id, state)
        if self.is_variable(node_id):
            self.use(node_id, state)
            return state, [node_id]

        uses = []
        children = self.index.children[node_id]
        for position, child in enumerate(children):
            if self.index.attr_of(child) == "has_name":
                continue
            state, child_uses = self.expression(child, state)
            # the called name is not an operand of the expression
            if node_type == "call" and position == 0 and child_uses == [child]:
                continue
            uses.extend(child_uses)
        return state, uses

    def targets(self, node_id: Optional[int]) -> list:
        """Identifiers bound by an assignment target"""
        if node_id is None:
            return []
        if self.index.type_of(node_id) == "identifier" and self.index.is_leaf(node_id):
            return [node_id]
        if self.index.type_of(node_id) in TARGET_GROUP_TYPES:
            found = []
            for child in self.index.children[node_id]:
                found.extend(self.targets(child))
            return found
        return []

    def target_uses(self, target: Optional[int], bound: list, state: ReachingDefs):
        """Subscript and attribute targets read the names inside them"""
        if target is None:
            return state
        for node_id in self.index.subtree(target):
            if node_id not in bound and self.is_variable(node_id):
                self.use(node_id, state)
        return state

    def assignment(self, node_id: int, state: ReachingDefs):
        idx = self.index
        value = idx.child_with(node_id, "has_value")
        target = idx.child_with(node_id, "has_target")
        augmented = idx.type_of(node_id) == "augmented_assignment"
        if target is None and augmented:
            target = next((child for child in idx.children[node_id] if self.is_variable(child)), None)

        uses = []
        if value is not None:
            state, uses = self.expression(value, state)
        bound = self.targets(target)
        state = self.target_uses(target, bound, state)
        if augmented:
            for node in bound:
                self.use(node, state)
            uses = uses + bound

        for source in uses:
            for node in bound:
                if source != node:
                    self.contributions.add((source, node))
        for node in bound:
            state = state.define(self.text(node), node)
        return state, uses

    def unwrap(self, node_id: int) -> int:
        """Descend through single-child wrappers such as `as` targets"""
        while self.index.type_of(node_id) == "identifier" and len(self.index.children[node_id]) == 1:
            node_id = self.index.children[node_id][0]
        return node_id

    def bind_names(self, target: int, uses: list, state: ReachingDefs) -> ReachingDefs:
        target = self.unwrap(target)
        bound = self.targets(target)
        state = self.target_uses(target, bound, state)
        for source in uses:
            for node in bound:
                if source != node:
                    self.contributions.add((source, node))
        for node in bound:
            state = state.define(self.text(node), node)
        return state

    def alias(self, node_id: int, state: ReachingDefs):
        """`value as name` binds the name to the value"""
        uses, target = [], None
        for child in self.index.children[node_id]:
            if self.index.attr_of(child) == "has_target":
                target = child
                continue
            state, child_uses = self.expression(child, state)
            uses.extend(child_uses)
        if target is not None:
            state = self.bind_names(target, uses, state)
        return state, uses

    # statements

    def statements(self, container: int) -> list:
        return [
            child for child in self.index.children[container]
            if self.index.type_of(child) in STATEMENT_TYPES or self.index.type_of(child) == "block"
        ]

    def body(self, node_id: Optional[int], state: Optional[ReachingDefs]) -> Optional[ReachingDefs]:
        if node_id is None or state is None:
            return state
        node_type = self.index.type_of(node_id)
        if node_type in ("block", "module"):
            for stmt in self.statements(node_id):
                if state is None:
                    # statements after a jump are unreachable
                    break
                state = self.statement(stmt, state)
            return state
        if node_type in CLAUSE_TYPES:
            uses = []
            for child in self.index.children[node_id]:
                if self.index.type_of(child) == "block" or self.index.type_of(child) in STATEMENT_TYPES:
                    state = self.body(child, state)
                elif state is None:
                    continue
                elif self.index.attr_of(child) == "has_target":
                    # `except E as err`
                    state = self.bind_names(child, uses, state)
                else:
                    state, child_uses = self.expression(child, state)
                    uses.extend(child_uses)
            return state
        return self.statement(node_id, state)

    def statement(self, node_id: int, state: ReachingDefs) -> Optional[ReachingDefs]:
        node_type = self.index.type_of(node_id)
        if node_type == "function_definition":
            return state
        if node_type == "block":
            return self.body(node_id, state)
        if node_type == "break_statement":
            if self.frames:
                self.frames[-1].breaks.append(state)
            return None
        if node_type == "continue_statement":
            if self.frames:
                self.frames[-1].continues.append(state)
            return None
        handler = getattr(self, f"_{node_type}", None)
        if handler is not None:
            return handler(node_id, state)

        for child in self.index.children[node_id]:
            state, _ = self.expression(child, state)
        if node_type == "return_statement":
            return None
        return state

    def _if_statement(self, node_id: int, state: ReachingDefs):
        idx = self.index
        condition = idx.child_with(node_id, "has_condition")
        if condition is not None:
            state, _ = self.expression(condition, state)
        outs = [self.body(idx.child_with(node_id, "has_then_body"), state)]

        fallthrough = state
        for branch in idx.children_with(node_id, "has_elif_branch"):
            if idx.type_of(branch) == "if_statement":
                outs.append(self.statement(branch, fallthrough))
                fallthrough = None
                break
            branch_condition = idx.child_with(branch, "has_condition")
            if branch_condition is not None:
                fallthrough, _ = self.expression(branch_condition, fallthrough)
            outs.append(self.body(idx.child_with(branch, "has_then_body"), fallthrough))

        else_body = idx.child_with(node_id, "has_else_body")
        if else_body is not None:
            outs.append(self.body(else_body, fallthrough))
        else:
            outs.append(fallthrough)
        return merge_all(outs)

    def _loop(self, node_id: int, state: ReachingDefs, bound: list, per_iteration: list):
        body = self.index.child_with(node_id, "has_body")
        head = state
        while True:
            frame = LoopFrame()
            self.frames.append(frame)
            checked = head
            for child in per_iteration:
                checked, _ = self.expression(child, checked)
            entered = checked
            for node in bound:
                entered = entered.define(self.text(node), node)
            body_out = self.body(body, entered)
            self.frames.pop()

            new_head = merge_all([state, body_out] + frame.continues)
            if new_head == head:
                break
            head = new_head

        else_body = self.index.child_with(node_id, "has_else_body")
        exit_state = self.body(else_body, checked) if else_body is not None else checked
        return merge_all([exit_state] + frame.breaks)

    def _for_statement(self, node_id: int, state: ReachingDefs):
        idx = self.index
        iterated = idx.child_with(node_id, "has_value")
        target = idx.child_with(node_id, "has_target")
        header = [
            child for child in idx.children[node_id]
            if idx.attr_of(child) not in ("has_body", "has_else_body", "has_target")
        ]

        if iterated is not None:
            state, uses = self.expression(iterated, state)
            per_iteration = []
        else:
            # C-style header: initializer once, condition and update every pass
            condition = idx.child_with(node_id, "has_condition")
            split = header.index(condition) if condition in header else len(header)
            uses = []
            for child in header[:split]:
                state, child_uses = self.expression(child, state)
                uses.extend(child_uses)
            per_iteration = header[split:]

        bound = self.targets(target)
        for source in uses:
            for node in bound:
                if source != node:
                    self.contributions.add((source, node))
        return self._loop(node_id, state, bound, per_iteration)

    def _while_statement(self, node_id: int, state: ReachingDefs):
        condition = self.index.child_with(node_id, "has_condition")
        return self._loop(node_id, state, [], [condition] if condition is not None else [])

    def _try_statement(self, node_id: int, state: ReachingDefs):
        idx = self.index
        body = idx.child_with(node_id, "has_body")
        handlers = idx.children_of_type(node_id, "except_clause")
        else_clauses = idx.children_of_type(node_id, "else_clause")
        finally_clauses = idx.children_of_type(node_id, "finally_clause")

        for child in idx.children[node_id]:
            if child != body and idx.type_of(child) not in CLAUSE_TYPES:
                state, _ = self.expression(child, state)

        body_out = self.body(body, state)
        handler_in = merge_all([state, body_out])
        outs = [self.body(handler, handler_in) for handler in handlers]
        if else_clauses:
            body_out = self.body(else_clauses[0], body_out)
        after = merge_all([body_out] + outs)
        if finally_clauses:
            finished = self.body(finally_clauses[0], after if after is not None else handler_in)
            return finished if after is not None else None
        return after

    def parameters(self, function: int) -> ReachingDefs:
        state = ReachingDefs()
        params = self.index.child_with(function, "has_parameters")
        if params is None:
            return state
        for child in self.index.children[params]:
            node = None
            if self.index.type_of(child) == "identifier" and self.index.is_leaf(child):
                node = child
            elif self.index.type_of(child) == "default_parameter":
                node = self.index.child_with(child, "has_name")
                if node is None:
                    node = next(
                        (n for n in self.index.subtree(child)
                         if self.index.type_of(n) == "identifier" and self.index.is_leaf(n)),
                        None,
                    )
            if node is not None:
                state = state.define(self.text(node), node)
        return state

    def build(self) -> CodePropertyGraph:
        root = self.graph.nodes[0].id
        self.body(root, ReachingDefs())
        for node in self.graph.nodes:
            if node.node_type == "function_definition":
                self.frames = []
                self.body(self.index.child_with(node.id, "has_body"), self.parameters(node.id))

        edges = [CpgEdge(src, dst, "DFG", "flows_to") for src, dst in self.flows]
        edges += [CpgEdge(src, dst, "DFG", "contributes_to") for src, dst in self.contributions]
        edges.sort(key=lambda edge: edge.sort_key)
        return self.graph.with_edges(edges)


def attach_dfg_edges(graph: CodePropertyGraph) -> CodePropertyGraph:
    return DataFlowBuilder(graph).build()
