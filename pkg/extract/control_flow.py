"""
Statement-level control-flow edges over the AST of a code property graph

Endpoints follow one contract: branch and body edges target the first
statement of the block they enter; exits target the statement that runs next
(`follow`), which climbs out of clauses and blocks until a sibling exists.
"""
from typing import Optional

from config.taxonomy import CLAUSE_TYPES, LOOP_TYPES, STATEMENT_TYPES
from extract.types import AstIndex, CodePropertyGraph, CpgEdge

CONTAINER_TYPES = frozenset({"module", "block"})


class ControlFlowBuilder:
    def __init__(self, graph: CodePropertyGraph):
        self.graph = graph
        self.index = AstIndex(graph)
        self.edges = set()

    def statements(self, container: int) -> list:
        return [
            child for child in self.index.children[container]
            if self.index.type_of(child) in STATEMENT_TYPES or self.index.type_of(child) == "block"
        ]

    def entry(self, node: Optional[int]) -> Optional[int]:
        """First statement executed when control enters `node`"""
        if node is None:
            return None
        node_type = self.index.type_of(node)
        if node_type in CONTAINER_TYPES:
            stmts = self.statements(node)
            return self.entry(stmts[0]) if stmts else None
        if node_type in CLAUSE_TYPES:
            return self.entry(self._clause_block(node))
        return node

    def last(self, node: Optional[int]) -> Optional[int]:
        """Last statement of a body (block, clause or single statement)"""
        if node is None:
            return None
        node_type = self.index.type_of(node)
        if node_type in CONTAINER_TYPES:
            stmts = self.statements(node)
            return self.last(stmts[-1]) if stmts else None
        if node_type in CLAUSE_TYPES:
            return self.last(self._clause_block(node))
        return node

    def _clause_block(self, clause: int) -> Optional[int]:
        blocks = self.index.children_of_type(clause, "block")
        if blocks:
            return blocks[-1]
        # Java clauses may hold a bare statement
        for child in self.index.children[clause]:
            if self.index.type_of(child) in STATEMENT_TYPES:
                return child
        return None

    def follow(self, stmt: int) -> Optional[int]:
        """Statement that runs after `stmt` completes normally"""
        node = stmt
        while True:
            parent = self.index.parent.get(node)
            if parent is None:
                return None
            parent_type = self.index.type_of(parent)
            if parent_type in CONTAINER_TYPES:
                siblings = self.statements(parent)
                if node in siblings:
                    position = siblings.index(node)
                    if position + 1 < len(siblings):
                        return self.entry(siblings[position + 1]) or siblings[position + 1]
                if parent_type == "module":
                    return None
            elif parent_type == "function_definition":
                return None
            elif parent_type in LOOP_TYPES and self.index.attr_of(node) == "has_body":
                return parent
            node = parent

    def enclosing_loop(self, node: int) -> Optional[int]:
        while True:
            parent = self.index.parent.get(node)
            if parent is None:
                return None
            parent_type = self.index.type_of(parent)
            if parent_type == "function_definition":
                return None
            if parent_type in LOOP_TYPES and self.index.attr_of(node) == "has_body":
                return parent
            node = parent

    def add(self, src, dst, attr):
        if src is not None and dst is not None:
            self.edges.add(CpgEdge(src, dst, "CFG", attr))

    def build(self) -> CodePropertyGraph:
        functions = {}
        for node in self.graph.nodes:
            if node.node_type == "function_definition":
                name = self.index.child_with(node.id, "has_name")
                if name is not None:
                    functions[self.index.node(name).text] = node.id

        for node in self.graph.nodes:
            handler = getattr(self, f"_visit_{node.node_type}", None)
            if handler is not None:
                handler(node.id)
            if node.node_type == "call":
                self._resolve_call(node.id, functions)

        ordered = sorted(self.edges, key=lambda edge: edge.sort_key)
        return self.graph.with_edges(ordered)

    def _sequence(self, container):
        stmts = self.statements(container)
        for current, following in zip(stmts, stmts[1:]):
            self.add(current, self.entry(following) or following, "sequential_execution")

    _visit_module = _sequence
    _visit_block = _sequence

    def _visit_if_statement(self, stmt):
        idx = self.index
        self.add(stmt, idx.child_with(stmt, "has_condition"), "condition_evaluation")
        self.add(stmt, self.entry(idx.child_with(stmt, "has_then_body")), "true_branch")

        holder = stmt
        for branch in idx.children_with(stmt, "has_elif_branch"):
            self.add(holder, branch, "alternate_condition_branch")
            if idx.type_of(branch) == "if_statement":
                # a nested if handles its own false edges
                return
            holder = branch

        else_body = idx.child_with(stmt, "has_else_body")
        if else_body is not None:
            self.add(holder, self.entry(else_body), "false_branch")
        else:
            self.add(holder, self.follow(stmt), "condition_false_jump")

    def _visit_elif_clause(self, clause):
        self.add(clause, self.index.child_with(clause, "has_condition"), "condition_evaluation")
        self.add(clause, self.entry(self.index.child_with(clause, "has_then_body")), "true_branch")

    def _loop_exit(self, loop):
        else_body = self.index.child_with(loop, "has_else_body")
        return self.entry(else_body) if else_body is not None else self.follow(loop)

    def _visit_for_statement(self, loop):
        idx = self.index
        iterated = idx.child_with(loop, "has_value")
        if iterated is None:
            iterated = idx.child_with(loop, "has_condition")
        body = idx.child_with(loop, "has_body")
        self.add(loop, iterated, "for_loop_iteration_range")
        self.add(loop, self.entry(body), "for_loop_body")
        self.add(self.last(body), loop, "loop_back")
        self.add(loop, self._loop_exit(loop), "loop_exit")

    def _visit_while_statement(self, loop):
        body = self.index.child_with(loop, "has_body")
        self.add(loop, self.index.child_with(loop, "has_condition"), "while_loop_condition")
        self.add(loop, self.entry(body), "while_loop_body")
        self.add(self.last(body), loop, "loop_back")
        self.add(loop, self._loop_exit(loop), "loop_exit")

    def _visit_break_statement(self, stmt):
        loop = self.enclosing_loop(stmt)
        if loop is not None:
            self.add(stmt, self.follow(loop), "break_jump")

    def _visit_continue_statement(self, stmt):
        self.add(stmt, self.enclosing_loop(stmt), "loop_back")

    def _visit_try_statement(self, stmt):
        idx = self.index
        body = idx.child_with(stmt, "has_body")
        handlers = idx.children_of_type(stmt, "except_clause")
        else_clauses = idx.children_of_type(stmt, "else_clause")
        finally_clauses = idx.children_of_type(stmt, "finally_clause")

        self.add(stmt, self.entry(body), "try_block")
        for handler in handlers:
            self.add(stmt, self.entry(handler), "exception_handler")
        if finally_clauses:
            self.add(stmt, self.entry(finally_clauses[0]), "finally_block")

        after = self.entry(finally_clauses[0]) if finally_clauses else self.follow(stmt)
        if else_clauses:
            self.add(self.last(body), self.entry(else_clauses[0]), "block_exit")
            self.add(self.last(else_clauses[0]), after, "block_exit")
        else:
            self.add(self.last(body), after, "block_exit")
        for handler in handlers:
            self.add(self.last(handler), after, "block_exit")

    def _resolve_call(self, call, functions):
        callee = self.index.child_with(call, "has_name")
        if callee is None:
            children = self.index.children[call]
            callee = children[0] if children else None
        if callee is None or self.index.type_of(callee) != "identifier" or not self.index.is_leaf(callee):
            return
        target = functions.get(self.index.node(callee).text)
        self.add(call, target, "function_call")


def attach_cfg_edges(graph: CodePropertyGraph) -> CodePropertyGraph:
    return ControlFlowBuilder(graph).build()
