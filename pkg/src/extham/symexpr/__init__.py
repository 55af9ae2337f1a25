"""Small symbolic engine for real functions on (extended) phase space."""
from .calculus import (
    diff,
    expand_momenta,
    from_polynomial,
    gradient,
    is_constant,
    momentum_degree,
    to_polynomial,
)
from .nodes import (
    ONE,
    ZERO,
    Add,
    C,
    CT,
    Const,
    DomainError,
    Expr,
    ExpressionError,
    Func,
    Mul,
    NonPolynomialError,
    Pow,
    S,
    T,
    UnboundVariableError,
    Var,
    Variable,
    VarKind,
    add,
    as_expr,
    const,
    cos,
    cosh,
    count_nodes,
    exp,
    func,
    iter_nodes,
    mul,
    power,
    sin,
    sinh,
    sqrt,
    substitute,
    symbols,
    tan,
    tanh,
    var,
)
from .numeric import (
    Box,
    Program,
    ZeroTestResult,
    central_difference,
    compile_exprs,
    evaluate,
    evaluate_many,
    numeric_zero_test,
    sample_valid,
)
from .textfmt import ParseError, format_expr, parse_expr

# short alias used throughout the package
eval_expr = evaluate

__all__ = [
    "Add",
    "Box",
    "C",
    "CT",
    "Const",
    "DomainError",
    "Expr",
    "ExpressionError",
    "Func",
    "Mul",
    "NonPolynomialError",
    "ONE",
    "ParseError",
    "Pow",
    "Program",
    "S",
    "T",
    "UnboundVariableError",
    "Var",
    "VarKind",
    "Variable",
    "ZERO",
    "ZeroTestResult",
    "add",
    "as_expr",
    "central_difference",
    "compile_exprs",
    "const",
    "cos",
    "cosh",
    "count_nodes",
    "diff",
    "evaluate",
    "evaluate_many",
    "exp",
    "expand_momenta",
    "format_expr",
    "from_polynomial",
    "func",
    "gradient",
    "is_constant",
    "iter_nodes",
    "momentum_degree",
    "mul",
    "numeric_zero_test",
    "parse_expr",
    "power",
    "sample_valid",
    "sin",
    "sinh",
    "sqrt",
    "substitute",
    "symbols",
    "tan",
    "tanh",
    "to_polynomial",
    "var",
]
