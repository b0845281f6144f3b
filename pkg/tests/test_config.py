import json
from dataclasses import replace

import numpy as np
import pytest

from slabdg.config import (
    BlendChoice, ConfigError, FunctionSpec, StudyConfig, compile_expression, dump_config, example_config,
    load_config, parse_config,
)

CONFIG_DIR = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def problems_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.problems


@pytest.mark.parametrize("name", ["example1.ini", "example2.ini", "smoke.ini"])
def test_shipped_configs_load(name):
    cfg = load_config(CONFIG_DIR / name)
    assert cfg.quadrature_size % 2 == 0


def test_example1_contents():
    cfg = load_config(CONFIG_DIR / "example1.ini")
    assert cfg.levels == (0, 1, 2, 3, 4, 5)
    assert cfg.epsilon_list == (1.0, 1e-3, 1e-5)
    assert cfg.source == FunctionSpec("bump", (0.125, 1.0))
    assert cfg.effective_reference_level == 10


@pytest.mark.parametrize("name", ["example1.ini", "example2.ini", "smoke.ini"])
@pytest.mark.parametrize("fmt", ["ini", "json"])
def test_round_trip_is_identity(name, fmt):
    cfg = load_config(CONFIG_DIR / name)
    text = dump_config(cfg, fmt)
    again = parse_config(text)
    assert again == cfg
    assert dump_config(again, fmt) == text


def test_round_trip_with_expressions_and_blends():
    cfg = example_config(
        sigma_t=FunctionSpec.parse("expression(2 + 0.5*sin(pi*x))", ("constant", "expression")),
        boundary_left=FunctionSpec.parse("affine(0.1, 0.01)", ("zero", "constant", "affine", "expression"), "mu"),
        blend=BlendChoice.parse("sweep(0.2, 0.5, 1)"), q=1, reference_level=9,
    )
    for fmt in ("ini", "json"):
        assert parse_config(dump_config(cfg, fmt)) == cfg


def test_defaults_when_sections_missing():
    cfg = parse_config("[mesh]\nlevels = 0, 1\n")
    assert cfg == replace(StudyConfig(), levels=(0, 1))


def test_epsilon_zero_rejected():
    problems = problems_of("[problem]\nepsilon_list = 0\n")
    assert any("epsilon must lie in (0,1]" in p for p in problems)


def test_odd_quadrature_rejected():
    problems = problems_of("[discretization]\nquadrature_size = 7\n")
    assert any("quadrature_size" in p for p in problems)


def test_empty_epsilon_list_rejected():
    assert any("epsilon_list must not be empty" in p for p in problems_of("[problem]\nepsilon_list =\n"))


def test_reference_level_must_exceed_levels():
    problems = problems_of("[mesh]\nlevels = 0, 3\nreference_level = 3\n")
    assert any("reference_level" in p for p in problems)


def test_every_problem_is_listed():
    text = "[mesh]\nlevels = 2, 1\nbogus = 1\n[problem]\nepsilon_list = 2\n[discretization]\nquadrature_size = 3\n[extra]\n"
    problems = problems_of(text)
    joined = "\n".join(problems)
    for needle in ("ascending", "bogus", "epsilon must lie", "quadrature_size", "[extra]"):
        assert needle in joined
    assert len(problems) >= 5


def test_cross_section_positivity_checked():
    problems = problems_of("[problem]\nsigma_t = constant(0.5)\nsigma_a = constant(1)\nepsilon_list = 1\n")
    assert any("sigma_t - eps^2 sigma_a" in p for p in problems)


def test_bad_function_specs():
    assert problems_of("[problem]\nsource = affine(1, 2)\n")
    assert problems_of("[problem]\nsigma_t = expression(__import__('os'))\n")
    assert problems_of("[problem]\nboundary_left = constant(1, 2)\n")
    assert problems_of("[study]\nblend = fixed(2)\n")


def test_json_encoding():
    cfg = parse_config(json.dumps({"mesh": {"levels": [0, 2]}, "problem": {"epsilon_list": [0.5]}}))
    assert cfg.levels == (0, 2) and cfg.epsilon_list == (0.5,)
    assert problems_of('{"mesh": 3}')
    assert problems_of("{not json")


def test_function_specs_build():
    x = np.array([-0.2, 0.0, 0.05, 0.3])
    bump = FunctionSpec("bump", (0.125,)).build()
    np.testing.assert_allclose(bump(x), [0.0, np.exp(-1.0), np.exp(1 / (0.4**2 - 1)), 0.0], rtol=1e-14)
    unit = FunctionSpec("bump", (0.125, 1.0)).build()
    assert unit(np.array([0.0]))[0] == pytest.approx(18.01826896834868 * np.exp(-1.0), rel=1e-10)
    aff = FunctionSpec("affine", (0.1, 0.01)).build("mu")
    np.testing.assert_allclose(aff(np.array([0.5])), [0.105])
    assert FunctionSpec.parse("3.5", ("constant",)).build() == 3.5


def test_expression_evaluator():
    f = compile_expression("2 + 0.5*sin(pi*x)**2 - abs(x)/3", "x")
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(f(x), 2 + 0.5 * np.sin(np.pi * x) ** 2 - np.abs(x) / 3)
    for bad in ("x.real", "open('f')", "[1][0]", "y + 1", "lambda: 1"):
        with pytest.raises((ValueError, SyntaxError)):
            compile_expression(bad, "x")


def test_blend_choices():
    assert BlendChoice.parse("none") == BlendChoice()
    assert BlendChoice.parse("fixed(0.4)").values == (0.4,)
    assert BlendChoice.parse("sweep(default)") == BlendChoice("sweep")
    assert BlendChoice.parse("lambda_star").to_text() == "lambda_star"
    with pytest.raises(ValueError):
        BlendChoice.parse("magic")
