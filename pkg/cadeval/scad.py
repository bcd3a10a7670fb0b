"""Parser and evaluator for the OpenSCAD subset used by the bundled models.

Supported: ``module NAME() { ... }``, ``NAME();``, ``cube([x, y, z]);``,
``translate([x, y, z]) CHILD``, ``union() CHILD``, ``difference() CHILD``,
``{ ... }`` groups and ``//`` or ``/* */`` comments.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Set, Tuple, Union

import numpy as np
from lark import Lark, Token, Transformer
from lark.exceptions import (
    UnexpectedCharacters,
    UnexpectedInput,
    UnexpectedToken,
    VisitError,
)

from cadeval.csg import CsgBox, CsgDifference, CsgNode, CsgSolid, CsgUnion
from cadeval.errors import (
    RecursiveModule,
    ScadError,
    ScadSyntaxError,
    UndefinedModule,
    UnsupportedConstruct,
)
from cadeval.geometry import Aabb

logger = logging.getLogger(__name__)

FIXTURES_DIR = Path(__file__).parent / "fixtures"
FIXTURE_NAMES = ("model_a", "model_b", "model_c", "model_d")
GROUND_TRUTH_FIXTURE = "model_d"

# Builtins and keywords outside the subset, reported as unsupported rather
# than as calls to undefined modules.
UNSUPPORTED_NAMES = frozenset(
    {
        "circle",
        "color",
        "cylinder",
        "echo",
        "for",
        "function",
        "hull",
        "if",
        "import",
        "include",
        "intersection",
        "intersection_for",
        "let",
        "linear_extrude",
        "minkowski",
        "mirror",
        "multmatrix",
        "offset",
        "polygon",
        "polyhedron",
        "projection",
        "render",
        "resize",
        "rotate",
        "rotate_extrude",
        "scale",
        "sphere",
        "square",
        "surface",
        "text",
        "use",
    }
)

Vec3 = Tuple[float, float, float]
Location = Tuple[int, int]


# AST


@dataclass(frozen=True)
class Cube:
    size: Vec3


@dataclass(frozen=True)
class Translate:
    offset: Vec3
    children: Tuple["Statement", ...]


@dataclass(frozen=True)
class Union_:
    children: Tuple["Statement", ...]


@dataclass(frozen=True)
class Difference:
    children: Tuple["Statement", ...]


@dataclass(frozen=True)
class ModuleCall:
    name: str
    location: Location = field(default=(0, 0), compare=False)


Statement = Union[Cube, Translate, Union_, Difference, ModuleCall]


@dataclass(frozen=True)
class ModuleDef:
    name: str
    body: Tuple[Statement, ...]
    location: Location = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class ScadAst:
    modules: Mapping[str, ModuleDef]
    statements: Tuple[Statement, ...]


# Grammar

# General OpenSCAD statement and expression syntax; what falls outside the
# subset is rejected with its location while building the AST.
_GRAMMAR = r"""
start: _item*

_item: module_def
     | function_def
     | include
     | _statement

_statement: empty
          | block
          | assignment
          | instance

include: INCLUDE
empty: ";"
block: "{" _inner* "}"
_inner: _statement | module_def | function_def
assignment: NAME "=" expr ";"
instance: NAME "(" arguments? ")" _statement
module_def: MODULE NAME "(" params? ")" _statement
function_def: FUNCTION NAME "(" params? ")" "=" expr ";"

params: param ("," param)*
param: NAME ("=" expr)?
arguments: _argument ("," _argument)*
_argument: expr | named
named: NAME "=" expr

?expr: and_test
     | expr "||" and_test -> computed
?and_test: comparison
         | and_test "&&" comparison -> computed
?comparison: sum
           | sum COMPARE sum -> computed
?sum: product
    | sum "+" product -> computed
    | sum "-" product -> computed
?product: unary
        | product "*" unary -> computed
        | product "/" unary -> computed
?unary: postfix
      | "-" unary -> neg
      | "+" unary -> pos
      | "!" unary -> computed
?postfix: atom
        | postfix "[" expr "]" -> computed
        | NAME "(" arguments? ")" -> computed
?atom: NUMBER -> number
     | NAME -> variable
     | STRING -> computed
     | "(" expr ")"
     | vector
     | "[" expr ":" expr (":" expr)? "]" -> computed
vector: "[" "]"
      | "[" expr ("," expr)* "]"

MODULE: "module"
FUNCTION: "function"
INCLUDE.2: /(include|use)[ \t]*<[^>\n]*>/
COMPARE: "==" | "!=" | "<=" | ">=" | "<" | ">"
NAME: /[A-Za-z_$][A-Za-z0-9_]*/
NUMBER: /(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?/

%import common.ESCAPED_STRING -> STRING
%import common.C_COMMENT
%import common.CPP_COMMENT
%import common.WS
%ignore WS
%ignore C_COMMENT
%ignore CPP_COMMENT
"""

_PARSER = Lark(_GRAMMAR, parser="lalr")


# Intermediate values of the AST builder


@dataclass(frozen=True)
class _Number:
    value: float
    location: Location


@dataclass(frozen=True)
class _Computed:
    text: str
    location: Location


@dataclass(frozen=True)
class _Vector:
    items: Tuple[Union[_Number, _Computed, "_Vector"], ...]
    location: Location


@dataclass(frozen=True)
class _Named:
    name: str
    location: Location


@dataclass(frozen=True)
class _Block:
    children: Tuple[Statement, ...]


Value = Union[_Number, _Computed, _Vector]
Argument = Union[Value, _Named]
Child = Union[None, _Block, Statement]


def _at(token: Token) -> Location:
    return (token.line, token.column)


def _first_location(children: List[object]) -> Location:
    for child in children:
        if isinstance(child, Token):
            return _at(child)
        location = getattr(child, "location", None)
        if location is not None:
            return location
    return (0, 0)


def _children(child: Child) -> Tuple[Statement, ...]:
    if child is None:
        return ()
    if isinstance(child, _Block):
        return child.children
    return (child,)


def _as_statement(child: Child) -> Optional[Statement]:
    return Union_(child.children) if isinstance(child, _Block) else child


class _AstBuilder(Transformer):
    """Builds the subset AST bottom-up from a lark parse tree."""

    # Expressions

    def number(self, children):
        (token,) = children
        value = float(token)
        if not np.isfinite(value):
            raise ScadSyntaxError(f"Number out of range: {token}", *_at(token))
        return _Number(value, _at(token))

    def variable(self, children):
        (token,) = children
        return _Computed(str(token), _at(token))

    def computed(self, children):
        return _Computed("expression", _first_location(children))

    def neg(self, children):
        (operand,) = children
        if isinstance(operand, _Number):
            return _Number(-operand.value, operand.location)
        return _Computed("expression", _first_location(children))

    def pos(self, children):
        (operand,) = children
        if isinstance(operand, _Number):
            return operand
        return _Computed("expression", _first_location(children))

    def vector(self, children):
        return _Vector(tuple(children), _first_location(children))

    def named(self, children):
        name = children[0]
        return _Named(str(name), _at(name))

    def arguments(self, children):
        return tuple(children)

    def param(self, children):
        return children[0]

    def params(self, children):
        return list(children)

    # Statements

    def empty(self, children):
        return None

    def block(self, children):
        statements: List[Statement] = []
        for child in children:
            if isinstance(child, ModuleDef):
                raise UnsupportedConstruct(
                    "Nested module definitions are not supported", *child.location
                )
            statement = _as_statement(child)
            if statement is not None:
                statements.append(statement)
        return _Block(tuple(statements))

    def assignment(self, children):
        name = children[0]
        raise UnsupportedConstruct(
            f"Variable assignment to '{name}' is not supported", *_at(name)
        )

    def include(self, children):
        (token,) = children
        raise UnsupportedConstruct(f"'{token}' is not supported", *_at(token))

    def function_def(self, children):
        keyword = children[0]
        raise UnsupportedConstruct(
            f"Function definition '{children[1]}' is not supported", *_at(keyword)
        )

    def module_def(self, children):
        keyword, name = children[0], children[1]
        if len(children) == 4:
            raise UnsupportedConstruct(
                f"Module parameters are not supported in '{name}'",
                *_at(children[2][0]),
            )
        return ModuleDef(str(name), _children(children[-1]), location=_at(keyword))

    def instance(self, children):
        name = children[0]
        arguments: Tuple[Argument, ...] = children[1] if len(children) == 3 else ()
        child: Child = children[-1]
        where = _at(name)

        if name in UNSUPPORTED_NAMES:
            raise UnsupportedConstruct(f"'{name}' is not supported", *where)
        if name == "cube":
            size = _vector_argument(str(name), arguments, where)
            if child is not None:
                raise UnsupportedConstruct(
                    "Children of 'cube' are not supported", *where
                )
            if min(size) <= 0:
                raise ScadSyntaxError(
                    f"Cube size must be positive, got {list(size)}", *where
                )
            return Cube(size)
        if name == "translate":
            offset = _vector_argument(str(name), arguments, where)
            return Translate(offset, _children(child))
        if arguments:
            what = "Operator" if name in ("union", "difference") else "Module"
            raise UnsupportedConstruct(
                f"{what} arguments are not supported in call to '{name}'",
                *arguments[0].location,
            )
        if name == "union":
            return Union_(_children(child))
        if name == "difference":
            return Difference(_children(child))
        if child is not None:
            raise UnsupportedConstruct(
                f"Children of module call '{name}' are not supported", *where
            )
        return ModuleCall(str(name), location=where)

    def start(self, children):
        modules: Dict[str, ModuleDef] = {}
        statements: List[Statement] = []
        for child in children:
            if isinstance(child, ModuleDef):
                if child.name in modules:
                    logger.warning(
                        "Module %s redefined at line %d; last definition wins",
                        child.name,
                        child.location[0],
                    )
                modules[child.name] = child
                continue
            statement = _as_statement(child)
            if statement is not None:
                statements.append(statement)
        return ScadAst(modules=modules, statements=tuple(statements))


def _vector_argument(
    name: str, arguments: Tuple[Argument, ...], where: Location
) -> Vec3:
    """The single literal ``[x, y, z]`` argument of ``cube`` or ``translate``."""
    if not arguments:
        raise ScadSyntaxError(f"'{name}' expects a vector '[x, y, z]'", *where)
    if len(arguments) > 1:
        raise UnsupportedConstruct(
            "Extra arguments are not supported", *arguments[1].location
        )
    (vector,) = arguments
    if not isinstance(vector, _Vector):
        raise UnsupportedConstruct(
            "Scalar, named or computed arguments are not supported",
            *vector.location,
        )
    values = []
    for item in vector.items:
        if not isinstance(item, _Number):
            text = item.text if isinstance(item, _Computed) else "vector"
            raise UnsupportedConstruct(
                f"Expressions are not supported, found '{text}'", *item.location
            )
        values.append(item.value)
    if len(values) != 3:
        raise ScadSyntaxError(f"Expected 3 components, got {len(values)}", *where)
    return (values[0], values[1], values[2])


def _position(error: UnexpectedInput) -> Tuple[Optional[int], Optional[int]]:
    line = getattr(error, "line", None)
    column = getattr(error, "column", None)
    if not isinstance(line, int) or line < 1:
        return None, None
    return line, column if isinstance(column, int) and column > 0 else None


def _build_ast(text: str) -> ScadAst:
    try:
        tree = _PARSER.parse(text)
    except UnexpectedCharacters as e:
        raise ScadSyntaxError(
            f"Unexpected character {e.char!r}", *_position(e)
        ) from e
    except UnexpectedToken as e:
        found = "end of input" if e.token.type == "$END" else str(e.token)
        raise ScadSyntaxError(f"Unexpected '{found}'", *_position(e)) from e
    except UnexpectedInput as e:
        raise ScadSyntaxError("Unexpected end of input", *_position(e)) from e
    try:
        return _AstBuilder().transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, ScadError):
            raise e.orig_exc from None
        raise


def _calls(statements: Tuple[Statement, ...]) -> Iterator[ModuleCall]:
    for statement in statements:
        if isinstance(statement, ModuleCall):
            yield statement
        elif not isinstance(statement, Cube):
            yield from _calls(statement.children)


def _validate(ast: ScadAst) -> None:
    bodies = [ast.statements, *(m.body for m in ast.modules.values())]
    for body in bodies:
        for call in _calls(body):
            if call.name not in ast.modules:
                raise UndefinedModule(
                    f"Module '{call.name}' is not defined", *call.location
                )

    done: Set[str] = set()

    def visit(name: str, stack: List[str]) -> None:
        if name in done:
            return
        for call in _calls(ast.modules[name].body):
            if call.name in stack or call.name == name:
                cycle = " -> ".join([*stack, name, call.name])
                raise RecursiveModule(
                    f"Recursive module call: {cycle}", *call.location
                )
            visit(call.name, [*stack, name])
        done.add(name)

    for name in ast.modules:
        visit(name, [])


def parse_scad(text: str) -> ScadAst:
    """Parse subset source into an AST with every module call resolvable.

    :raises ScadSyntaxError: for malformed input.
    :raises UnsupportedConstruct: for valid OpenSCAD outside the subset.
    :raises UndefinedModule: when a called module has no definition.
    :raises RecursiveModule: when a module calls itself, directly or not.
    """
    ast = _build_ast(text)
    _validate(ast)
    logger.debug(
        "Parsed %d modules and %d top-level statements",
        len(ast.modules),
        len(ast.statements),
    )
    return ast


def _group(nodes: List[CsgNode]) -> CsgNode:
    return nodes[0] if len(nodes) == 1 else CsgUnion(tuple(nodes))


def evaluate(ast: ScadAst) -> CsgSolid:
    """Resolve modules and translations into a tree of absolute boxes.

    The top level and every module body act as implicit unions.
    """

    def node(statement: Statement, offset: np.ndarray) -> CsgNode:
        if isinstance(statement, Cube):
            return CsgBox(Aabb(offset, offset + np.array(statement.size)))
        if isinstance(statement, Translate):
            shifted = offset + np.array(statement.offset)
            return _group([node(child, shifted) for child in statement.children])
        if isinstance(statement, Union_):
            children = statement.children
            return CsgUnion(tuple(node(child, offset) for child in children))
        if isinstance(statement, Difference):
            return CsgDifference(
                tuple(node(child, offset) for child in statement.children)
            )
        body = ast.modules[statement.name].body
        return _group([node(child, offset) for child in body])

    origin = np.zeros(3)
    return CsgSolid(_group([node(s, origin) for s in ast.statements]))


def parse_scad_file(path: Union[str, Path]) -> CsgSolid:
    return evaluate(parse_scad(Path(path).read_text(encoding="utf-8")))


def fixture_path(name: str) -> Path:
    """Path of a bundled model; accepts ``model_d`` or just ``d``."""
    key = name if name.startswith("model_") else f"model_{name}"
    if key not in FIXTURE_NAMES:
        raise ValueError(
            f"Unknown fixture '{name}', expected one of {FIXTURE_NAMES}"
        )
    return FIXTURES_DIR / f"{key}.scad"


def load_fixture(name: str) -> CsgSolid:
    return parse_scad_file(fixture_path(name))
