"""
Node and edge taxonomies of the code property graph
"""

NODE_TYPES = (
    "module", "function_definition", "identifier", "parameters",
    "default_parameter", "none", "block", "try_statement",
    "if_statement", "comparison_operator", "expression_statement",
    "assignment", "call", "argument_list", "for_statement", "integer",
    "binary_operator", "subscript", "pattern_list", "expression_list",
    "while_statement", "parenthesized_expression", "string",
    "string_start", "string_content", "string_end", "elif_clause",
    "else_clause", "augmented_assignment", "break_statement",
    "continue_statement", "return_statement", "except_clause",
    "finally_clause",
)

AST_ATTRS = (
    "has_name", "has_parameters", "has_body", "has_condition",
    "has_then_body", "has_else_body", "has_elif_branch", "has_target",
    "has_value", "contains",
)

CFG_ATTRS = (
    "sequential_execution", "true_branch", "false_branch",
    "alternate_condition_branch", "condition_evaluation", "for_loop_body",
    "for_loop_iteration_range", "while_loop_body", "while_loop_condition",
    "try_block", "exception_handler", "finally_block", "block_exit",
    "loop_exit", "loop_back", "break_jump", "condition_false_jump",
    "function_call",
)

DFG_ATTRS = ("contributes_to", "flows_to")

EDGE_CLASSES = {"AST": AST_ATTRS, "CFG": CFG_ATTRS, "DFG": DFG_ATTRS}

# Classifier label space for edge-type prediction: every attr, then NO_EDGE
EDGE_ATTRS = AST_ATTRS + CFG_ATTRS + DFG_ATTRS
EDGE_LABELS = {attr: index for index, attr in enumerate(EDGE_ATTRS)}
NO_EDGE = len(EDGE_ATTRS)
NUM_EDGE_LABELS = NO_EDGE + 1

# Statement-level types the control-flow builder sequences
STATEMENT_TYPES = frozenset({
    "expression_statement", "return_statement", "break_statement",
    "continue_statement", "if_statement", "for_statement",
    "while_statement", "try_statement", "function_definition",
})

CLAUSE_TYPES = frozenset({"elif_clause", "else_clause", "except_clause", "finally_clause"})

LOOP_TYPES = frozenset({"for_statement", "while_statement"})

# Node types whose text keeps only the first source line
FIRST_LINE_TYPES = frozenset({
    "if_statement", "for_statement", "while_statement", "try_statement",
    "function_definition", "elif_clause", "else_clause", "except_clause",
    "finally_clause",
})


def edge_class_of(attr: str) -> str:
    for edge_class, attrs in EDGE_CLASSES.items():
        if attr in attrs:
            return edge_class
    raise KeyError(attr)
