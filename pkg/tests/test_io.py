import io

import numpy as np
import pytest

from nfisac import io as mio
from nfisac.channel import build_channel_set
from nfisac.config import load_bundled
from nfisac.sdp import SdpConstraint, SdpProblem, solve
from nfisac.transmit import DESIGN_SDP_SETTINGS, DesignInputs, formulate

from helpers import crandn, random_psd


def test_matrix_roundtrip_exact(rng, tmp_path):
    items = [("a", crandn(rng, 3, 4)), ("v", crandn(rng, 5)), ("tiny", np.array([[1e-300 + 1e300j]])),
             ("empty", np.zeros((0, 2)))]
    path = tmp_path / "m.txt"
    mio.save_matrices(path, items, header="two lines\nof header")
    assert path.read_text().startswith("# two lines\n# of header\n")
    back = mio.load_matrices(path)
    assert list(back) == [n for n, _ in items]
    for name, a in items:
        want = a[:, None] if a.ndim == 1 else a
        assert back[name].shape == want.shape
        np.testing.assert_array_equal(back[name], want)


def test_matrix_format_layout():
    buf = io.StringIO()
    mio.write_matrix(buf, "x", np.array([[1 + 2j, -0.5]]))
    assert buf.getvalue() == "x 1 2\n1 2 -0.5 0\n"


@pytest.mark.parametrize("text, msg", [
    ("x 2 1\n1 0\n", "expected 2 rows"),
    ("x 1 2\n1 0 2\n", "has 3 numbers"),
    ("x one 2\n", "bad dimensions"),
    ("x 1\n", "expected '<name>"),
    ("x 1 1\n1 0\nx 1 1\n2 0\n", "duplicate"),
    ("x 1 1\n1 z\n", "line 2"),
])
def test_matrix_format_errors(text, msg):
    with pytest.raises(mio.MatrixFormatError, match=msg):
        mio.read_matrices(io.StringIO(text))


def test_bad_matrix_name():
    with pytest.raises(ValueError):
        mio.write_matrix(io.StringIO(), "a b", np.eye(2))


def test_sdp_roundtrip_small(rng):
    c = random_psd(rng, 3) + np.eye(3)
    prob = SdpProblem([3, 1], [c, np.ones((1, 1))], [
        SdpConstraint([random_psd(rng, 3, 1), None], 1.0, "first row"),
        SdpConstraint([None, np.eye(1)], -2.5),
    ])
    text = mio.dump_sdp(prob)
    back = mio.load_sdp(text)
    assert back.block_dims == prob.block_dims
    assert [k.label for k in back.constraints] == ["first row", ""]
    assert [k.b for k in back.constraints] == [1.0, -2.5]
    for j in range(2):
        np.testing.assert_array_equal(back.objective[j], prob.objective[j])
    np.testing.assert_array_equal(back.constraints[0].coeffs[0], prob.constraints[0].coeffs[0])
    assert back.constraints[0].coeffs[1] is None


def test_real_sdp_stays_real(tmp_path):
    prob = SdpProblem([2], [np.eye(2)], [SdpConstraint([np.diag([1.0, 2.0])], 1.0)])
    path = tmp_path / "p.sdp"
    mio.dump_sdp(prob, path)
    back = mio.load_sdp(path)
    assert not np.iscomplexobj(back.objective[0])


def test_transmit_sdp_roundtrip_solves_identically(tmp_path):
    sc = load_bundled("single_user").scenario
    ch = build_channel_set(sc)
    inputs = DesignInputs.from_scenario(sc, ch)
    prob = formulate(inputs, [], []).problem
    path = tmp_path / "t.sdp"
    mio.dump_sdp(prob, path)
    a = solve(prob, DESIGN_SDP_SETTINGS)
    b = solve(mio.load_sdp(path), DESIGN_SDP_SETTINGS)
    assert a.objective_value == b.objective_value


def test_sdp_format_errors():
    with pytest.raises(mio.MatrixFormatError, match="empty"):
        mio.read_sdp(io.StringIO(""))
    with pytest.raises(mio.MatrixFormatError, match="expected 'sdp"):
        mio.read_sdp(io.StringIO("C[0] 1 1\n1 0\n"))
    with pytest.raises(mio.MatrixFormatError, match="objective blocks missing"):
        mio.read_sdp(io.StringIO("sdp 1 0\n"))
    with pytest.raises(mio.MatrixFormatError, match="no 'constraint' line"):
        mio.read_sdp(io.StringIO("sdp 1 1\nC[0] 1 1\n1 0\n"))
    with pytest.raises(mio.MatrixFormatError, match="out of range"):
        mio.read_sdp(io.StringIO("sdp 1 1\nC[0] 1 1\n1 0\nconstraint 3 1.0\n"))
