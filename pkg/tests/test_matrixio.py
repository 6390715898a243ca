import json

import numpy as np
import pytest

from bmme.matrixio import (
    ConvergenceTrace,
    MatrixFormatError,
    NegativeEntryError,
    SyntheticSpec,
    TraceRecord,
    TRACE_FIELDS,
    as_nonneg,
    read_matrix,
    read_trace,
    synth_lowrank,
    write_matrix,
    write_trace,
)

HEADER = "iter,wall_seconds,objective,rel_objective,alpha_W,alpha_H,kkt_residual"


@pytest.fixture
def M():
    rng = np.random.default_rng(5)
    A = rng.random((4, 3)) * 10.0 ** rng.integers(-5, 5, (4, 3))
    A[0, 0] = 0.0
    return A


def test_binary_round_trip_is_bit_exact(tmp_path, M):
    p = tmp_path / "m.bin"
    write_matrix(M, p, "bin")
    back = read_matrix(p, "dense-binary")
    assert back.tobytes() == M.tobytes()


def test_csv_round_trip(tmp_path, M):
    p = tmp_path / "m.csv"
    write_matrix(M, p, "csv")
    back = read_matrix(p, "csv")
    np.testing.assert_allclose(back, M, rtol=1e-12, atol=0)


def test_matrix_market_round_trip(tmp_path, M):
    p = tmp_path / "m.mtx"
    write_matrix(M, p, "mm")
    back = read_matrix(p, "matrix-market")
    np.testing.assert_allclose(back, M, rtol=1e-12, atol=0)


def test_sparse_matrix_market_is_densified(tmp_path):
    p = tmp_path / "s.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n3 2 2\n1 1 1.5\n3 2 4\n")
    X = read_matrix(p, "mm")
    np.testing.assert_array_equal(X, [[1.5, 0], [0, 0], [0, 4]])


def test_result_is_read_only(tmp_path, M):
    p = tmp_path / "m.csv"
    write_matrix(M, p)
    X = read_matrix(p)
    with pytest.raises(ValueError):
        X[0, 0] = 1.0


def test_negative_entry_rejected(tmp_path):
    p = tmp_path / "neg.csv"
    p.write_text("1,2\n3,-0.5\n")
    with pytest.raises(NegativeEntryError, match=r"\[1,1\]"):
        read_matrix(p)


@pytest.mark.parametrize("text", ["1,2\n3\n", "1,a\n", "", "1,nan\n", "1,inf\n"])
def test_malformed_csv(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(MatrixFormatError):
        read_matrix(p)


def test_bad_binary(tmp_path, M):
    p = tmp_path / "m.bin"
    write_matrix(M, p, "bin")
    raw = p.read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    (tmp_path / "magic.bin").write_bytes(b"XXXX" + raw[4:])
    for name in ("short.bin", "magic.bin"):
        with pytest.raises(MatrixFormatError):
            read_matrix(tmp_path / name, "bin")


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError, match="unknown matrix format"):
        read_matrix(tmp_path / "x", "xlsx")


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_matrix(tmp_path / "nope.csv")


def test_as_nonneg_shape_checks():
    with pytest.raises(MatrixFormatError):
        as_nonneg(np.ones(3))
    with pytest.raises(MatrixFormatError):
        as_nonneg(np.ones((0, 3)))


def test_synth_deterministic_and_bounded():
    spec = SyntheticSpec(12, 9, 3, noise="none", scale=2.0, seed=4)
    X1, W1, H1 = synth_lowrank(spec)
    X2, W2, H2 = synth_lowrank(spec)
    assert X1.tobytes() == X2.tobytes()
    for F in (W1, H1):
        assert F.min() > 0.1 * 2.0 and F.max() <= 2.0
    np.testing.assert_allclose(X1, W1 @ H1)


def test_synth_noise_free_rank():
    X, _, _ = synth_lowrank(SyntheticSpec(15, 11, 3, noise="none", seed=1))
    s = np.linalg.svd(X, compute_uv=False)
    assert np.all(s[3:] < 1e-8 * s[0])


def test_synth_poisson_integer_valued():
    X, _, _ = synth_lowrank(SyntheticSpec(10, 10, 2, noise="poisson", scale=3.0, seed=2))
    np.testing.assert_array_equal(X, np.round(X))


def test_synth_gaussian_clipped_nonnegative():
    X, W, H = synth_lowrank(SyntheticSpec(30, 30, 2, noise="gaussian-clipped", sigma=2.0, seed=3))
    assert X.min() == 0.0
    assert not np.allclose(X, W @ H)


@pytest.mark.parametrize(
    "kwargs",
    [dict(m=0, n=3, r_true=1), dict(m=3, n=3, r_true=4), dict(m=3, n=3, r_true=1, noise="laplace"),
     dict(m=3, n=3, r_true=1, scale=0.0), dict(m=3, n=3, r_true=1, seed=-1)],
)
def test_synth_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SyntheticSpec(**kwargs)


def _rec(i, res=None):
    return TraceRecord(iter=i, wall_seconds=0.5 * i, objective=10.0 / (i + 1), rel_objective=1.0 / (i + 3),
                       alpha_W=0.25, alpha_H=1 / 3, kkt_residual=res)


def test_empty_trace_is_header_only(tmp_path):
    p = tmp_path / "t.csv"
    write_trace(ConvergenceTrace(), p)
    assert p.read_text() == HEADER + "\n"
    assert ",".join(TRACE_FIELDS) == HEADER


def test_one_record_round_trip(tmp_path):
    tr = ConvergenceTrace()
    tr.append(_rec(0, 1e-3))
    p = tmp_path / "t.csv"
    write_trace(tr, p)
    assert len(p.read_text().splitlines()) == 2
    assert read_trace(p).records == tr.records


def test_absent_residual_is_trailing_empty_field(tmp_path):
    tr = ConvergenceTrace()
    tr.append(_rec(3))
    p = tmp_path / "t.csv"
    write_trace(tr, p)
    assert p.read_text().splitlines()[1].endswith(",")
    assert read_trace(p)[0].kkt_residual is None


def test_json_round_trip(tmp_path):
    tr = ConvergenceTrace()
    tr.append(_rec(0, 0.1))
    tr.append(_rec(5))
    p = tmp_path / "t.json"
    write_trace(tr, p, "json")
    assert json.loads(p.read_text())[1]["kkt_residual"] is None
    assert read_trace(p, "json").records == tr.records


def test_trace_invariants():
    tr = ConvergenceTrace()
    tr.append(_rec(2))
    with pytest.raises(ValueError):
        tr.append(_rec(2))
    with pytest.raises(ValueError):
        tr.append(TraceRecord(iter=3, wall_seconds=0.0, objective=1.0, rel_objective=1.0))
    assert np.isnan(tr.column("kkt_residual")[0])


def test_bad_trace_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("iter,objective\n")
    with pytest.raises(MatrixFormatError):
        read_trace(p)
