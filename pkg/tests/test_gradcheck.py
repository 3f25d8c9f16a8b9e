# -*- coding: utf-8 -*-
import pytest

from src.attention import AttentionKind
from src.gradcheck import (DEFAULT_THRESHOLD, GRAD_FLOOR, GradCheckResult, model_cases, run_model_checks,
                           run_op_checks, run_suite, smallest_gradient)

KINDS = [k.value for k in AttentionKind]


def test_op_checks_pass():
    results = run_op_checks(seed=1234)
    failed = [(r.name, r.error) for r in results if not r.passed]
    assert failed == []


@pytest.mark.parametrize("seed", [1234, 1, 3, 7])
@pytest.mark.parametrize("kind", KINDS)
def test_toy_gradients_clear_noise_floor(kind, seed):
    cases = model_cases(kind, seed)
    values = next(iter(cases.values()))[1]
    builders = [builder for builder, _ in cases.values()]
    assert smallest_gradient(builders, values) >= GRAD_FLOOR


@pytest.mark.parametrize("seed", [1234, 1, 7])
@pytest.mark.parametrize("kind", KINDS)
def test_full_model_checks_pass(kind, seed):
    results = run_model_checks(kind, seed=seed)
    assert len(results) == 2
    for r in results:
        assert r.error < DEFAULT_THRESHOLD, r.name


def test_model_cases_cover_every_parameter():
    builder, inputs = model_cases("double", seed=3)["double:decode_step"]
    assert {"W_p", "v_p", "L_cg", "L_cs"} <= set(inputs)


def test_result_threshold():
    assert GradCheckResult("x", 5e-5, 1e-4).passed
    assert not GradCheckResult("x", 2e-4, 1e-4).passed


def test_suite_names():
    results = run_suite(["global"], seed=7)
    names = [r.name for r in results]
    assert "op:gru_step" in names
    assert names[-2:] == ["model:global:decode_step", "model:global:sentence_loss"]
    assert all(r.passed for r in results)
