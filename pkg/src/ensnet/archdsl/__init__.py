"""Architecture notation: parsing, graph expansion, shape inference, parameter counts."""

from .ast import FC, LRN, ArchSpec, Conv, ElementDecl, Inception, InputDecl, Pool, Residual
from .graph import (
    LayerGraph,
    Node,
    ParamReport,
    ShapeError,
    ShapeTrace,
    compile_arch,
    count_params,
    expand,
    infer_shapes,
    param_shapes,
)
from .parser import ArchError, ArchSemanticError, ArchSyntaxError, parse_arch

__all__ = [
    "FC", "LRN", "ArchSpec", "Conv", "ElementDecl", "Inception", "InputDecl", "Pool", "Residual",
    "LayerGraph", "Node", "ParamReport", "ShapeError", "ShapeTrace", "compile_arch", "count_params",
    "expand", "infer_shapes", "param_shapes", "ArchError", "ArchSemanticError", "ArchSyntaxError",
    "parse_arch",
]
