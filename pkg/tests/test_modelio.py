import numpy as np
import pytest

from twistlab.modelio import SpecFileError, load_chain_spec, load_circle_model, load_levy_model

GOOD_CHAIN = """\
states: 3
q: [1.0, 1.0, 1.0]
pi:
  - [0.0, 1.0, 0.0]
  - [0.0, 0.0, 1.0]
  - [0.0, 0.0, 0.0]
mu: [1.0, 0.0, 0.0]
"""


def write(tmp_path, text, name="model.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_chain_spec(tmp_path):
    spec = load_chain_spec(write(tmp_path, GOOD_CHAIN))
    assert spec.n == 3
    assert np.allclose(spec.pi[0], [0.0, 1.0, 0.0])


def test_chain_spec_json_also_parses(tmp_path):
    text = '{"states": 2, "q": [1, 1], "pi": [[0, 0.5], [0, 0]], "mu": [1, 0]}'
    spec = load_chain_spec(write(tmp_path, text, "chain.json"))
    assert spec.n == 2


def test_wrong_row_length_is_line_anchored(tmp_path):
    bad = GOOD_CHAIN.replace("  - [0.0, 0.0, 1.0]", "  - [0.0, 0.0]")
    with pytest.raises(SpecFileError) as err:
        load_chain_spec(write(tmp_path, bad))
    assert err.value.line == 5
    assert "pi row 1" in str(err.value)


def test_wrong_vector_length_and_missing_field(tmp_path):
    bad = GOOD_CHAIN.replace("q: [1.0, 1.0, 1.0]", "q: [1.0, 1.0]")
    with pytest.raises(SpecFileError) as err:
        load_chain_spec(write(tmp_path, bad))
    assert err.value.line == 2
    with pytest.raises(SpecFileError, match="missing field 'mu'"):
        load_chain_spec(write(tmp_path, GOOD_CHAIN.replace("mu: [1.0, 0.0, 0.0]\n", "")))
    with pytest.raises(SpecFileError, match="unknown field"):
        load_chain_spec(write(tmp_path, GOOD_CHAIN + "extra: 1\n"))


def test_yaml_syntax_error_carries_line(tmp_path):
    with pytest.raises(SpecFileError) as err:
        load_chain_spec(write(tmp_path, "states: 3\nq: [1.0, 1.0\n"))
    assert err.value.line is not None


def test_semantically_invalid_chain_rejected(tmp_path):
    bad = GOOD_CHAIN.replace("q: [1.0, 1.0, 1.0]", "q: [1.0, -1.0, 1.0]")
    with pytest.raises(SpecFileError, match="positive"):
        load_chain_spec(write(tmp_path, bad))


def test_load_circle_model(tmp_path):
    text = "epsilon: 1.0\nb_hat:\n  - [1, 0.5, 0.0]\n"
    model = load_circle_model(write(tmp_path, text))
    assert model.bandwidth == 1
    assert model.coeff(1) == 0.5 and model.coeff(-1) == 0.5
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    assert np.allclose(model.drift(theta), np.cos(theta), atol=1e-12)


def test_circle_model_conjugate_conflict(tmp_path):
    text = "epsilon: 1.0\nb_hat:\n  - [1, 0.5, 0.2]\n  - [-1, 0.5, 0.2]\n"
    with pytest.raises(SpecFileError, match="conjugate"):
        load_circle_model(write(tmp_path, text))
    with pytest.raises(SpecFileError, match="epsilon"):
        load_circle_model(write(tmp_path, "epsilon: -1\nb_hat: []\n"))


def test_load_levy_model(tmp_path):
    model = load_levy_model(write(tmp_path, "a: [1.0, 4.0]\nb: [1.0, 2.0]\n"))
    assert model.a.size == 2
    with pytest.raises(SpecFileError):
        load_levy_model(write(tmp_path, "a: [1.0, 4.0]\nb: [1.0]\n"))
    with pytest.raises(SpecFileError, match="positive"):
        load_levy_model(write(tmp_path, "a: [0.0, 4.0]\nb: [1.0, 2.0]\n"))
