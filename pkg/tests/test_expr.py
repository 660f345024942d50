import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from isoflow.errors import ValidationError
from isoflow.expr import BinOp, Call, ExpressionDiffusion, Neg, Num, Var, _kernel, compile_numpy, parse


def ev(text, x):
    return float(compile_numpy(parse(text))(np.array([x]))[0])


@pytest.mark.parametrize("text, x, expect", [
    ("x/4", 2.0, 0.5),
    ("1 + 2 * 3", 0.0, 7.0),
    ("(1 + 2) * 3", 0.0, 9.0),
    ("2 ^ 3 ^ 2", 0.0, 512.0),
    ("-x^2", 3.0, -9.0),
    ("2*-x", 3.0, -6.0),
    ("8 / 4 / 2", 0.0, 1.0),
    ("10 - 4 - 3", 0.0, 3.0),
    ("sqrt(x) * exp(-x)", 4.0, 2 * math.exp(-4)),
    ("sin(pi/2) + cos(0)", 0.0, 2.0),
    ("expm1(1e-10)", 0.0, 1.00000000005e-10),
    ("1.5e2 + .5", 0.0, 150.5),
    ("x^-1", 4.0, 0.25),
])
def test_evaluation(text, x, expect):
    assert ev(text, x) == pytest.approx(expect, rel=1e-14)


def test_tree_shape():
    assert parse("-x^2") == Neg(BinOp("^", Var(), Num(2.0)))
    assert parse("exp(x)") == Call("exp", Var())


@pytest.mark.parametrize("text", ["", "   ", "x+", "y", "(x", "x)", "x $ 2", "exp x", "3x", "log(x)", "x**2", "1..2"])
def test_rejects(text):
    with pytest.raises(ValidationError):
        parse(text)


def render(node):
    """Fully parenthesized grammar text for a tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        return f"(-{render(node.arg)})"
    if isinstance(node, Call):
        return f"{node.fn}({render(node.arg)})"
    return f"({render(node.left)} {node.op} {render(node.right)})"


leaves = st.one_of(st.just(Var()), st.floats(0.0, 100.0).map(Num))
trees = st.recursive(
    leaves,
    lambda sub: st.one_of(
        st.builds(BinOp, st.sampled_from("+-*/"), sub, sub),
        st.builds(Neg, sub),
        st.builds(Call, st.sampled_from(["sin", "cos"]), sub),
    ),
    max_leaves=8,
)


@given(trees)
def test_round_trip(tree):
    assert parse(render(tree)) == tree


@given(trees, st.floats(0.01, 10.0))
def test_numpy_and_compiled_agree(tree, x):
    text = render(tree)
    spec_like = ExpressionDiffusion(text, "x")
    b, _ = spec_like.parsed()
    with np.errstate(all="ignore"):
        want = compile_numpy(b)(np.array([x]))[0]
    coef, _ = _kernel(b, parse("x"))
    try:
        got = coef(x, np.zeros(1))[0]
    except ZeroDivisionError:
        # math-style division raises where numpy returns inf or nan
        assert not np.isfinite(want)
        return
    if np.isfinite(want):
        assert got == pytest.approx(want, rel=1e-12, abs=1e-300)
    else:
        assert not np.isfinite(got)


def test_spec_from_expressions():
    spec = ExpressionDiffusion("x/4", "x").spec()
    assert spec.R == np.inf and spec.reference == 1.0
    k = spec.kernel
    assert k.coef(2.0, k.params) == pytest.approx((0.5, 2.0))
    assert k.logcoef(0.3, k.params) == pytest.approx((-0.25, 1.0))
    finite = ExpressionDiffusion("0", "sin(x)", math.pi).spec()
    assert finite.reference == pytest.approx(math.pi / 2)


def test_spec_validation_propagates():
    with pytest.raises(ValidationError, match="does not vanish"):
        ExpressionDiffusion("0", "1").spec()
