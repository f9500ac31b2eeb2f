import itertools
import math

import numpy as np
import pytest

from friendlyfec import bp, codes, gf2


def map_bitwise_llr(code, llr):
    """Brute-force bitwise MAP LLRs by enumerating all 2^k codewords."""
    msgs = np.array(list(itertools.product([0, 1], repeat=code.k)), dtype=np.uint8)
    words = gf2.encode(msgs, code.G)
    metric = 0.5 * ((1.0 - 2.0 * words.astype(float)) @ llr)

    def lse(v):
        m = v.max()
        return m + math.log(np.exp(v - m).sum())

    return np.array([lse(metric[words[:, i] == 0]) - lse(metric[words[:, i] == 1])
                     for i in range(code.n)])


def ml_codeword(code, llr):
    msgs = np.array(list(itertools.product([0, 1], repeat=code.k)), dtype=np.uint8)
    words = gf2.encode(msgs, code.G)
    metric = (1.0 - 2.0 * words.astype(float)) @ llr
    return words[int(np.argmax(metric))]


def test_graph_matches_parity_matrix():
    code = codes.hamming_7_4()
    g = bp.TannerGraph(code.H)
    assert g.n_edges == int(code.H.sum())
    assert np.array_equal(code.H[g.edge_check, g.edge_var], np.ones(g.n_edges, dtype=np.uint8))
    assert len(set(zip(g.edge_check.tolist(), g.edge_var.tolist()))) == g.n_edges


def test_forward_zero_input_is_fixed_point():
    g = bp.TannerGraph(codes.repetition_code(3).H)
    out = bp.bp_forward(np.zeros(3), g, iters=4)
    assert not out.soft.any()
    assert np.array_equal(out.hard, [0, 0, 0])


def test_forward_repetition_map_decision():
    g = bp.TannerGraph(codes.repetition_code(3).H)
    out = bp.bp_forward(np.array([2.0, 2.0, -1.0]), g, iters=2)
    # brute-force MAP over {000, 111}: sum of LLRs is +3, favors all-zero
    assert np.array_equal(out.hard, [0, 0, 0])
    assert out.syndrome_ok


def test_tree_exactness_vs_enumeration():
    code = codes.repetition_code(5)
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(0)
    for _ in range(10):
        llr = rng.normal(0, 2, 5)
        out = bp.bp_forward(llr, g, iters=6)
        assert np.max(np.abs(out.soft[-1] - map_bitwise_llr(code, llr))) < 1e-9


def test_hamming_one_flip_recovers():
    code = codes.hamming_7_4()
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = rng.integers(0, 2, 4).astype(np.uint8)
        x = gf2.encode(m, code.G)
        llr = 4.0 * (1.0 - 2.0 * x.astype(float))
        flip = rng.integers(0, 7)
        llr[flip] = -0.5 * llr[flip]  # one wrong-sign coordinate at magnitude 2
        out = bp.bp_forward(llr, g, iters=8)
        ml = ml_codeword(code, llr)
        assert np.array_equal(ml, x)  # exhaustive ML also picks the true word
        assert np.array_equal(out.hard, x)


def test_forward_validation():
    g = bp.TannerGraph(codes.repetition_code(3).H)
    with pytest.raises(ValueError, match="finite"):
        bp.bp_forward(np.array([np.inf, 0.0, 0.0]), g, 2)
    with pytest.raises(ValueError):
        bp.bp_forward(np.zeros(3), g, 0)
    with pytest.raises(ValueError):
        bp.bp_forward(np.zeros(3), g, 2, clamp=0.0)
    with pytest.raises(ValueError, match="tape"):
        bp.bp_forward(np.zeros(3), g, 2, early_stop=True, record_tape=True)


def test_loss_values():
    g = bp.TannerGraph(codes.repetition_code(3).H)
    out = bp.bp_forward(np.zeros(3), g, iters=2)
    assert bp.bp_loss(out, np.zeros(3)) == pytest.approx(3 * math.log(2), abs=1e-12)

    unc = bp.TannerGraph(codes.uncoded(1).H)
    out = bp.bp_forward(np.array([2.0]), unc, iters=1)
    assert bp.bp_loss(out, np.array([1])) == pytest.approx(2.1269280110429727, abs=1e-12)

    out = bp.bp_forward(np.full(3, 40.0), g, iters=2)
    assert bp.bp_loss(out, np.zeros(3)) < 1e-10


def test_multiloss_averages_iterations():
    g = bp.TannerGraph(codes.hamming_7_4().H)
    rng = np.random.default_rng(2)
    llr = rng.normal(0, 2, 7)
    out = bp.bp_forward(llr, g, iters=3)
    target = np.zeros(7)
    per_iter = [bp.bp_loss(bp.BpOutput(out.soft[: t + 1], out.hard, out.syndrome_ok, None, t + 1),
                           target) for t in range(3)]
    assert bp.bp_loss(out, target, "multiloss") == pytest.approx(np.mean(per_iter), rel=1e-12)


def test_backward_saturated_gradient_vanishes():
    g = bp.TannerGraph(codes.repetition_code(3).H)
    out = bp.bp_forward(np.full(3, 40.0), g, iters=2)
    grad = bp.bp_backward(out.tape, np.zeros(3))
    assert np.max(np.abs(grad)) < 1e-8


@pytest.mark.parametrize("mode", ["final", "multiloss"])
def test_backward_matches_finite_differences_repetition(mode):
    code = codes.repetition_code(3)
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(3)
    target = np.zeros(3)
    for _ in range(5):
        llr = rng.normal(0, 2, 3)
        out = bp.bp_forward(llr, g, iters=3)
        grad = bp.bp_backward(out.tape, target, mode)
        fd = bp.finite_difference(
            lambda v: bp.bp_loss(bp.bp_forward(v, g, 3), target, mode), llr, h=1e-4)
        rel = np.abs(grad - fd) / np.maximum(np.maximum(np.abs(grad), np.abs(fd)), 1e-12)
        assert rel.max() < 1e-4


def test_backward_matches_finite_differences_ldpc():
    code = codes.ldpc_64_32()
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(4)
    sigma = 0.8
    llr = (2.0 / sigma**2) * (1.0 + sigma * rng.standard_normal(64))
    out = bp.bp_forward(llr, g, iters=5)
    target = np.zeros(64)
    grad = bp.bp_backward(out.tape, target)
    coords = rng.choice(64, size=10, replace=False)
    fd = bp.finite_difference(
        lambda v: bp.bp_loss(bp.bp_forward(v, g, 5), target), llr, h=1e-4, coords=coords)
    rel = np.abs(grad[coords] - fd) / np.maximum(np.maximum(np.abs(grad[coords]), np.abs(fd)), 1e-12)
    assert rel.max() < 1e-3


def test_backward_shape_validation():
    g = bp.TannerGraph(codes.repetition_code(3).H)
    out = bp.bp_forward(np.zeros(3), g, 2)
    with pytest.raises(ValueError):
        bp.bp_backward(out.tape, np.zeros(4))
    out_nt = bp.bp_forward(np.zeros(3), g, 2, record_tape=False)
    with pytest.raises(ValueError):
        bp.bp_backward(out_nt.tape, np.zeros(3))


def test_sign_equivariance_bit_exact():
    code = codes.hamming_7_4()
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = gf2.encode(rng.integers(0, 2, 4).astype(np.uint8), code.G)
        t = 1.0 - 2.0 * x.astype(float)
        llr = rng.normal(0, 2, 7)
        base = bp.bp_forward(llr, g, iters=5)
        flipped = bp.bp_forward(t * llr, g, iters=5)
        assert np.array_equal(flipped.soft[-1], t * base.soft[-1])
        assert np.array_equal(flipped.hard, base.hard ^ x)


def test_correct_signs_satisfy_syndrome_after_one_iteration():
    code = codes.ldpc_64_32()
    g = bp.TannerGraph(code.H)
    out = bp.bp_forward(np.full(64, 6.0), g, iters=1)
    assert out.syndrome_ok


def test_batch_matches_single_lane_bit_exact():
    code = codes.hamming_7_4()
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(6)
    L = rng.normal(0, 2, (5, 7))
    batch = bp.bp_forward(L, g, iters=4)
    grads = bp.bp_backward(batch.tape, np.zeros(7))
    for i in range(5):
        single = bp.bp_forward(L[i], g, iters=4)
        assert np.array_equal(single.soft[-1], batch.soft[-1][i])
        assert np.array_equal(bp.bp_backward(single.tape, np.zeros(7)), grads[i])


def test_early_stop_matches_standalone_decode():
    code = codes.ldpc_64_32()
    g = bp.TannerGraph(code.H)
    rng = np.random.default_rng(7)
    L = (2.0 / 0.64) * (1.0 + 0.8 * rng.standard_normal((16, 64)))
    batch = bp.bp_forward(L, g, iters=10, early_stop=True, record_tape=False)
    for i in range(16):
        alone = bp.bp_forward(L[i], g, iters=10, early_stop=True, record_tape=False)
        assert np.array_equal(alone.hard, batch.hard[i])


def test_zero_iteration_graphs_and_degree_one_checks():
    # a degree-1 check pins its variable; infinite pre-clamp message is clamped
    H = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    g = bp.TannerGraph(H)
    out = bp.bp_forward(np.array([-1.0, 0.5]), g, iters=2, clamp=10.0)
    assert np.isfinite(out.soft).all()
    grad = bp.bp_backward(out.tape, np.zeros(2))
    assert np.isfinite(grad).all()
