"""Study configuration: schema, validation and the INI/JSON encodings.

Function-valued entries are small text specs such as ``constant(2)``, ``bump(0.125, 1)``,
``affine(0.1, 0.01)`` or ``expression(2 + sin(x))``; see the README for the full schema.
"""

from __future__ import annotations

import ast
import configparser
import io
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "ConfigError",
    "FunctionSpec",
    "BlendChoice",
    "SolverConfig",
    "StudyConfig",
    "parse_config",
    "load_config",
    "dump_config",
    "example_config",
]


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists every violated constraint."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


# --- safe expressions ---------------------------------------------------------

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh,
    "arctan": np.arctan, "minimum": np.minimum, "maximum": np.maximum,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}
_UNOPS = {ast.USub: np.negative, ast.UAdd: np.positive}


def _check_expression(node, variable: str) -> None:
    if isinstance(node, ast.Expression):
        return _check_expression(node.body, variable)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return None
    if isinstance(node, ast.Name) and (node.id == variable or node.id in _CONSTS):
        return None
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        _check_expression(node.left, variable)
        return _check_expression(node.right, variable)
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _check_expression(node.operand, variable)
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCS and not node.keywords):
        for arg in node.args:
            _check_expression(arg, variable)
        return None
    raise ValueError(f"unsupported element {ast.dump(node)[:40]!r} in expression")


def _evaluate(node, env):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id] if node.id in env else _CONSTS[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_evaluate(node.left, env), _evaluate(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_evaluate(node.operand, env))
    return _FUNCS[node.func.id](*[_evaluate(a, env) for a in node.args])


def compile_expression(text: str, variable: str = "x"):
    """Vectorized callable for an arithmetic expression in ``variable``."""
    tree = ast.parse(text, mode="eval")
    _check_expression(tree, variable)

    def func(values):
        values = np.asarray(values, dtype=float)
        return np.broadcast_to(_evaluate(tree, {variable: values}), values.shape).astype(float)

    return func


# --- function specs -----------------------------------------------------------

_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$", re.S)
_ARITY = {"zero": (0, 0), "constant": (1, 1), "bump": (1, 2), "affine": (2, 2)}


def _bump_mass(radius: float) -> float:
    from scipy.integrate import quad

    return quad(lambda t: math.exp(1.0 / (t * t - 1.0)), -1.0, 1.0)[0] * radius


@dataclass(frozen=True)
class FunctionSpec:
    """A named function of one variable: x for coefficients and sources, mu for boundary data."""

    kind: str
    params: tuple = ()
    expression: str | None = None

    @classmethod
    def parse(cls, text, allowed, variable: str = "x") -> "FunctionSpec":
        if isinstance(text, (int, float)) and not isinstance(text, bool):
            return cls("constant", (float(text),))
        text = str(text).strip()
        try:
            return cls("constant", (float(text),))
        except ValueError:
            pass
        m = _SPEC_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse function spec {text!r}")
        kind, body = m.group(1), m.group(2)
        if kind not in allowed:
            raise ValueError(f"function kind {kind!r} not allowed here (choose from {', '.join(allowed)})")
        if kind == "expression":
            if not body or not body.strip():
                raise ValueError("expression() needs a body")
            compile_expression(body.strip(), variable)
            return cls("expression", (), body.strip())
        args = [a for a in (body or "").split(",") if a.strip()]
        lo, hi = _ARITY[kind]
        if not lo <= len(args) <= hi:
            raise ValueError(f"{kind}() takes {lo}..{hi} arguments, got {len(args)}")
        params = tuple(float(a) for a in args)
        if kind == "bump" and not params[0] > 0:
            raise ValueError("bump radius must be positive")
        return cls(kind, params)

    def to_text(self) -> str:
        if self.kind == "expression":
            return f"expression({self.expression})"
        if self.kind == "zero":
            return "zero"
        return f"{self.kind}({', '.join(repr(p) for p in self.params)})"

    def build(self, variable: str = "x"):
        """Vectorized callable; ``bump(r, m)`` is rescaled to total mass m."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "expression":
            return compile_expression(self.expression, variable)
        if self.kind == "affine":
            c0, c1 = self.params

            def affine(mu):
                return c0 + c1 * np.asarray(mu, dtype=float)

            return affine
        radius = self.params[0]
        scale = 1.0 if len(self.params) == 1 else self.params[1] / _bump_mass(radius)

        def bump(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            inside = np.abs(x) < radius
            out[inside] = scale * np.exp(1.0 / ((x[inside] / radius) ** 2 - 1.0))
            return out

        return bump


COEFFICIENT_KINDS = ("constant", "expression")
SOURCE_KINDS = ("zero", "constant", "bump", "expression")
BOUNDARY_KINDS = ("zero", "constant", "affine", "expression")


def _parse_boundary(text) -> FunctionSpec:
    return FunctionSpec.parse(text, BOUNDARY_KINDS, variable="mu")


# --- blend --------------------------------------------------------------------


@dataclass(frozen=True)
class BlendChoice:
    """none | fixed(lambda) | lambda_star | sweep(default) | sweep(l1, l2, ...)."""

    kind: str = "none"
    values: tuple = ()

    @classmethod
    def parse(cls, text) -> "BlendChoice":
        text = str(text).strip()
        m = _SPEC_RE.match(text)
        if not m:
            raise ValueError(f"cannot parse blend {text!r}")
        kind, body = m.group(1), (m.group(2) or "").strip()
        if kind in ("none", "lambda_star", "exponential"):
            if body:
                raise ValueError(f"blend {kind} takes no arguments")
            return cls(kind)
        if kind == "fixed":
            lam = float(body)
            if not 0.0 <= lam <= 1.0:
                raise ValueError(f"blend lambda must lie in [0,1], got {lam}")
            return cls("fixed", (lam,))
        if kind == "sweep":
            if body in ("", "default"):
                return cls("sweep")
            vals = tuple(float(v) for v in body.split(","))
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ValueError("sweep lambda values must lie in [0,1]")
            return cls("sweep", vals)
        raise ValueError(f"unknown blend kind {kind!r}")

    def to_text(self) -> str:
        if self.kind == "fixed":
            return f"fixed({self.values[0]!r})"
        if self.kind == "sweep":
            return "sweep(" + (", ".join(repr(v) for v in self.values) if self.values else "default") + ")"
        return self.kind


# --- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-12
    max_iterations: int = 10000
    acceleration: str = "dsa"
    krylov_wrap: bool = True
    restart: int = 30

    def options(self):
        from .solver import SolveOptions

        return SolveOptions(self.tolerance, self.max_iterations, self.acceleration, self.krylov_wrap, self.restart)


@dataclass(frozen=True)
class StudyConfig:
    a: float = -1.0
    b: float = 1.0
    base_cells: int = 8
    levels: tuple = (0, 1, 2, 3, 4, 5)
    reference_level: int | None = None
    k: int = 1
    quadrature_size: int = 32
    epsilon_list: tuple = (1.0,)
    sigma_t: FunctionSpec = FunctionSpec("constant", (2.0,))
    sigma_a: FunctionSpec = FunctionSpec("constant", (1.0,))
    source: FunctionSpec = FunctionSpec("bump", (0.125, 1.0))
    boundary_left: FunctionSpec = FunctionSpec("constant", (0.1,))
    boundary_right: FunctionSpec = FunctionSpec("zero")
    blend: BlendChoice = BlendChoice()
    q: int | None = None
    norm: str = "l2"
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str = "report.csv"

    @property
    def effective_reference_level(self) -> int:
        return max(self.levels) + 5 if self.reference_level is None else self.reference_level

    def problem(self, epsilon: float):
        from .operators import ProblemSpec

        return ProblemSpec(
            self.sigma_t.build("x"), self.sigma_a.build("x"), epsilon, self.source.build("x"),
            self.boundary_left.build("mu"), self.boundary_right.build("mu"),
        )

    def validate(self) -> "StudyConfig":
        problems = []
        if not self.a < self.b:
            problems.append(f"domain must satisfy a < b, got ({self.a}, {self.b})")
        if self.base_cells < 1:
            problems.append("base_cells must be >= 1")
        if not self.levels:
            problems.append("levels must not be empty")
        else:
            if list(self.levels) != sorted(set(self.levels)):
                problems.append("levels must be strictly ascending")
            if min(self.levels) < 0:
                problems.append("levels must be >= 0")
            if self.effective_reference_level <= max(self.levels):
                problems.append("reference_level must exceed every study level")
        if self.k < 0:
            problems.append("k must be >= 0")
        if self.quadrature_size < 2 or self.quadrature_size % 2:
            problems.append(f"quadrature_size must be even and >= 2, got {self.quadrature_size}")
        if not self.epsilon_list:
            problems.append("epsilon_list must not be empty")
        for eps in self.epsilon_list:
            if not 0.0 < eps <= 1.0:
                problems.append(f"epsilon must lie in (0,1], got {eps}")
        if self.q is not None and self.q < 1:
            problems.append("q must be >= 1")
        if self.norm not in ("l2", "q", "triple"):
            problems.append(f"norm must be l2, q or triple, got {self.norm!r}")
        s = self.solver
        if not s.tolerance > 0:
            problems.append("solver tolerance must be positive")
        if s.max_iterations < 1:
            problems.append("solver max_iterations must be >= 1")
        if s.acceleration not in ("none", "dsa"):
            problems.append(f"solver acceleration must be none or dsa, got {s.acceleration!r}")
        if s.restart < 1:
            problems.append("solver restart must be >= 1")
        if self.a < self.b:
            from .operators import as_function

            x = np.linspace(self.a, self.b, 1001)
            st = np.broadcast_to(as_function(self.sigma_t.build("x"))(x), x.shape)
            sa = np.broadcast_to(as_function(self.sigma_a.build("x"))(x), x.shape)
            if np.any(~np.isfinite(st)) or np.any(~np.isfinite(sa)):
                problems.append("cross sections must be finite on the domain")
            elif np.any(sa <= 0):
                problems.append("sigma_a must be strictly positive on the domain")
            else:
                for eps in self.epsilon_list:
                    if 0.0 < eps <= 1.0 and np.any(st - eps**2 * sa <= 0):
                        problems.append(f"sigma_t - eps^2 sigma_a must be positive (eps={eps})")
        if problems:
            raise ConfigError(problems)
        return self


def example_config(**overrides) -> StudyConfig:
    return replace(StudyConfig(), **overrides)


# --- encodings ----------------------------------------------------------------

_SCHEMA = {
    "mesh": ("a", "b", "base_cells", "levels", "reference_level"),
    "problem": ("epsilon_list", "sigma_t", "sigma_a", "source", "boundary_left", "boundary_right"),
    "discretization": ("k", "quadrature_size", "q"),
    "study": ("norm", "blend"),
    "solver": ("tolerance", "max_iterations", "acceleration", "krylov_wrap", "restart"),
    "output": ("path",),
}


def _as_list(value, conv):
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = [v for v in str(value).replace(";", ",").split(",") if v.strip()]
    return tuple(conv(v) for v in items)


def _as_int(value) -> int:
    if isinstance(value, bool):
        raise ValueError("expected an integer")
    f = float(value)
    if f != int(f):
        raise ValueError(f"expected an integer, got {value}")
    return int(f)


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _optional_int(value):
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "auto")):
        return None
    return _as_int(value)


def _from_sections(data: dict) -> StudyConfig:
    problems = []
    for section, entries in data.items():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key in entries:
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {key!r} in [{section}]")
    values = {}
    solver = {}

    def take(section, key, conv, target, name=None):
        entries = data.get(section, {})
        if key not in entries:
            return
        try:
            target[name or key] = conv(entries[key])
        except (TypeError, ValueError, SyntaxError) as exc:
            problems.append(f"[{section}] {key}: {exc}")

    take("mesh", "a", float, values)
    take("mesh", "b", float, values)
    take("mesh", "base_cells", _as_int, values)
    take("mesh", "levels", lambda v: _as_list(v, _as_int), values)
    take("mesh", "reference_level", _optional_int, values)
    take("problem", "epsilon_list", lambda v: _as_list(v, float), values)
    take("problem", "sigma_t", lambda v: FunctionSpec.parse(v, COEFFICIENT_KINDS), values)
    take("problem", "sigma_a", lambda v: FunctionSpec.parse(v, COEFFICIENT_KINDS), values)
    take("problem", "source", lambda v: FunctionSpec.parse(v, SOURCE_KINDS), values)
    take("problem", "boundary_left", _parse_boundary, values)
    take("problem", "boundary_right", _parse_boundary, values)
    take("discretization", "k", _as_int, values)
    take("discretization", "quadrature_size", _as_int, values)
    take("discretization", "q", _optional_int, values)
    take("study", "norm", lambda v: str(v).strip(), values)
    take("study", "blend", BlendChoice.parse, values)
    take("solver", "tolerance", float, solver)
    take("solver", "max_iterations", _as_int, solver)
    take("solver", "acceleration", lambda v: str(v).strip(), solver)
    take("solver", "krylov_wrap", _as_bool, solver)
    take("solver", "restart", _as_int, solver)
    take("output", "path", str, values, "output")
    config = StudyConfig(**values, solver=SolverConfig(**solver))
    try:
        config.validate()
    except ConfigError as exc:
        problems.extend(exc.problems)
    if problems:
        raise ConfigError(problems)
    return config


def _to_sections(config: StudyConfig, native: bool) -> dict:
    def seq(items):
        return list(items) if native else ", ".join(repr(i) for i in items)

    def opt(v):
        return v if native or v is not None else "none"

    s = config.solver
    return {
        "mesh": {"a": config.a, "b": config.b, "base_cells": config.base_cells,
                 "levels": seq(config.levels), "reference_level": opt(config.reference_level)},
        "problem": {"epsilon_list": seq(config.epsilon_list), "sigma_t": config.sigma_t.to_text(),
                    "sigma_a": config.sigma_a.to_text(), "source": config.source.to_text(),
                    "boundary_left": config.boundary_left.to_text(),
                    "boundary_right": config.boundary_right.to_text()},
        "discretization": {"k": config.k, "quadrature_size": config.quadrature_size, "q": opt(config.q)},
        "study": {"norm": config.norm, "blend": config.blend.to_text()},
        "solver": {"tolerance": s.tolerance, "max_iterations": s.max_iterations,
                   "acceleration": s.acceleration, "krylov_wrap": s.krylov_wrap, "restart": s.restart},
        "output": {"path": config.output},
    }


def parse_config(text: str) -> StudyConfig:
    """Parse the INI form, or JSON when the document starts with ``{``."""
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON: {exc}"]) from exc
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(["JSON config must map section names to objects"])
        return _from_sections(data)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"invalid config syntax: {exc}"]) from exc
    return _from_sections({s: dict(parser[s]) for s in parser.sections()})


def load_config(path) -> StudyConfig:
    return parse_config(Path(path).read_text())


def dump_config(config: StudyConfig, fmt: str = "ini") -> str:
    if fmt == "json":
        return json.dumps(_to_sections(config, native=True), indent=2) + "\n"
    if fmt != "ini":
        raise ValueError("fmt must be 'ini' or 'json'")
    parser = configparser.ConfigParser(interpolation=None)
    for section, entries in _to_sections(config, native=False).items():
        parser[section] = {k: str(v) for k, v in entries.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
