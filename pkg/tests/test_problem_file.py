import json

import pytest

from conftest import kappa_half_document, problem_document
from modules.errors import ProblemFileError, ValidationError
from modules.problem_file import DEFAULT_SETTINGS, load_problem, parse_problem, probe_lipschitz, problem_echo


def test_parse_derived_document(derived_spec):
    problem = parse_problem(problem_document())
    assert problem.spec.f == derived_spec.f
    assert problem.spec.x_terms == derived_spec.x_terms
    assert problem.spec.n == 200
    assert problem.settings == dict(DEFAULT_SETTINGS, N=200)
    assert problem.growth.M2 == 0.1
    assert problem.lipschitz.L1cal == 0.1
    assert problem.lipschitz.source == "user"
    assert problem.sampled_zeros == ()


def test_grid_size_override():
    problem = parse_problem(problem_document(), n=50)
    assert problem.spec.n == 50
    assert problem.solver_block["N"] == 50


def test_optional_blocks_default():
    document = problem_document()
    for key in ("schema_version", "x_terms", "y_terms", "solver", "growth", "lipschitz"):
        del document[key]
    problem = parse_problem(document)
    assert problem.spec.x_terms == ()
    assert problem.spec.n == DEFAULT_SETTINGS["N"]
    assert problem.growth is None
    assert problem.lipschitz is None


def test_missing_zero_constants_are_sampled():
    problem = parse_problem(problem_document(lipschitz={"L1cal": 0.1, "L2cal": 0.1}))
    assert problem.sampled_zeros == ("L1zero", "L2zero")
    assert problem.lipschitz.L1zero == pytest.approx(1.0)
    assert problem.lipschitz.L2zero == pytest.approx(1.0)


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"lambda1": True}, "lambda1"),
        ({"a": "0"}, "a"),
        ({"f": 1.0}, "f"),
        ({"schema_version": 2}, "schema_version"),
        ({"alhpa1": 0.75}, "alhpa1"),
        ({"solver": {"N": 200.0}}, "solver.N"),
        ({"solver": {"grid": 10}}, "solver.grid"),
        ({"x_terms": [{"coeff": 1.0, "order": 0.5}]}, "x_terms[0].point"),
        ({"y_terms": {"coeff": 1.0}}, "y_terms"),
        ({"growth": {"M1": 1.0}}, "growth.M2"),
        ({"lipschitz": {"L1cal": 0.1}}, "lipschitz.L2cal"),
    ],
)
def test_schema_violations_name_the_field(overrides, field):
    with pytest.raises(ProblemFileError) as info:
        parse_problem(problem_document(**overrides))
    assert info.value.field == field


def test_missing_required_field():
    document = problem_document()
    del document["alpha2"]
    with pytest.raises(ProblemFileError, match="missing required field") as info:
        parse_problem(document)
    assert info.value.field == "alpha2"


def test_unsupported_version_message():
    with pytest.raises(ProblemFileError, match="unsupported version 2"):
        parse_problem(problem_document(schema_version=2))


def test_expression_syntax_error_names_field():
    with pytest.raises(ProblemFileError) as info:
        parse_problem(problem_document(f="1 + "))
    assert info.value.field == "f"
    assert "at offset" in str(info.value)


def test_constraint_violations_are_collected():
    with pytest.raises(ValidationError) as info:
        parse_problem(problem_document(alpha1=1.5, beta2=0.0))
    assert len(info.value.diagnostics) >= 2


def test_load_rejects_duplicate_keys(tmp_path):
    path = tmp_path / "dup.json"
    path.write_text('{"a": 0.0, "a": 1.0}', encoding="utf-8")
    with pytest.raises(ProblemFileError, match="duplicate key") as info:
        load_problem(path)
    assert info.value.field == "a"


def test_load_reports_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"a": 0.0,\n  "b": }', encoding="utf-8")
    with pytest.raises(ProblemFileError, match="invalid JSON at line 2"):
        load_problem(path)


def test_load_reports_missing_file(tmp_path):
    with pytest.raises(ProblemFileError, match="cannot read problem file"):
        load_problem(tmp_path / "absent.json")


def test_load_problem_from_disk(write_problem):
    problem = load_problem(write_problem(kappa_half_document()), n=100)
    assert problem.spec.n == 100
    assert problem.spec.x_terms == ()


def test_echo_rebuilds_specification(write_problem):
    problem = load_problem(write_problem(problem_document()))
    echo = problem_echo(problem)
    assert parse_problem(echo).spec == problem.spec
    assert parse_problem(json.loads(json.dumps(echo))).spec == problem.spec


def test_echo_uses_canonical_expressions():
    echo = problem_echo(parse_problem(problem_document(f="((1))+0.1*sin(x+y)")))
    assert echo["f"] == "1.0 + 0.1 * sin(x + y)"
    assert echo["solver"] == {"N": 200}


def test_echo_keeps_user_blocks_only():
    problem = parse_problem(problem_document(lipschitz={"L1cal": 0.1, "L2cal": 0.1}))
    assert problem_echo(problem)["lipschitz"] == {"L1cal": 0.1, "L2cal": 0.1}


def test_probe_lipschitz_is_empirical():
    document = kappa_half_document()
    del document["lipschitz"]
    problem = parse_problem(document)
    hyp = probe_lipschitz(problem, radius=2.0, samples=500)
    assert hyp.source == "empirical"
    assert 0.0 < hyp.L1cal <= 0.166 * (1.0 + 1e-9)
    assert hyp.L2zero == pytest.approx(1.166)
