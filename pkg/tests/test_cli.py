import io
import json

import pytest

from ring_telescope.cli import CliConfig, main

ALT_INV_LHS = "Sum(k,1,b,(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i)))"
ALT_INV_RHS = ("(-1)^b*(b+1)/((n+2)*Binomial(n,b))*Sum(i,0,b,Binomial(n,i))"
           " + (-1)^b*(-2*b-3)/(4*(n+2)) - 1/(4*(n+2))")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_telescope_text_output():
    code, out, _ = run("telescope", "Sum(i,0,k-1,Binomial(n,i))", "--param", "n")
    assert code == 0
    assert "G(k) = -(n - 2*k + 2)*Sum(i,0,k - 1,Binomial(n,i))/2 + k*Binomial(n,k)/2" in out
    assert "s : sigma : s + b : s(0) = 0" in out
    assert "check: verified" in out


def test_telescope_json_output():
    code, out, _ = run("telescope", "(-1)^k*Binomial(n,k)^(-1)*Sum(i,0,k-1,Binomial(n,i))",
                       "--param", "n", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "ok"
    assert doc["constant"] == "-1/(4*(n + 2))"
    assert doc["check"]["verified"] is True


def test_telescope_without_solution_exits_2():
    code, _, err = run("telescope", "1/k", "--lower", "1")
    assert code == 2


def test_leading_minus_is_an_expression():
    code, out, _ = run("telescope", "-k+1")
    assert code == 0 and "G(k) = -k*(k - 3)/2" in out


def test_zeilberger_with_closed_form():
    code, out, _ = run("zeilberger", "Binomial(n,k)*Sum(i,1,k,(-1)^i/i)", "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["coefficients"] == ["-2", "1"]
    assert doc["recurrence"] == "-2*S(n) + S(n + 1) = -1/(n + 1)"
    assert doc["closed_form"] == "-2^n*Sum(j,1,n,1/(j*2^j))"


def test_zeilberger_order_cap_exits_2():
    code, _, err = run("zeilberger", "Binomial(n,k)*Sum(i,1,k,(-1)^i/i)", "--max-order", "1")
    assert code == 2 and "NoRecurrenceFound" in err


def test_verify_pass_and_mismatch():
    code, out, _ = run("verify", ALT_INV_LHS, ALT_INV_RHS, "--grid", "n=2..12,b=0..n")
    assert code == 0 and out.startswith("verified")
    code, out, _ = run("verify", ALT_INV_LHS, ALT_INV_RHS + "+1", "--grid", "n=2..5,b=0..n")
    assert code == 3 and "mismatch" in out


def test_verify_with_fixed_parameter():
    code, out, _ = run("verify", "Sum(k,0,b,Binomial(n,k))", "2^n", "--grid", "b=0..0",
                       "--param", "n=0")
    assert code == 0


def test_represent():
    code, out, _ = run("represent", "(-1)^k*Binomial(n,k)", "--param", "n")
    assert code == 0 and "element: b*x" in out
    code, out, _ = run("represent", "Binomial(n,k)", "--param", "n", "--no-merge", "--format", "json")
    assert code == 0 and json.loads(out)["check"]["verified"] is True


@pytest.mark.parametrize("argv", [
    ("telescope", "Sum(i,0,k"),
    ("telescope", "k + m", "--param", "n"),
    ("verify", "k", "k", "--grid", "k=0"),
    ("telescope", "k", "--max-support", "0"),
    ("nonsense",),
])
def test_input_errors_exit_1(argv):
    code, _, _ = run(*argv)
    assert code == 1


def test_config_validation():
    assert CliConfig(params=("n",)).options().merge is True
    with pytest.raises(ValueError):
        CliConfig(max_order=0)
