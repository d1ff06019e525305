import copy

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import dense_objective_oracle, random_ppmi_sequence
from tvembed.ppmi import PpmiMatrix, PpmiSequence
from tvembed.solver import (
    EmbeddingSequence,
    SolverConfig,
    final_embedding,
    init_embeddings,
    load_checkpoint,
    objective,
    read_embeddings_binary,
    residual_gradient,
    ridge_update_block,
    save_checkpoint,
    train,
    write_embeddings_binary,
    write_embeddings_text,
)


def zero_sequence(V, T):
    mats = [
        PpmiMatrix(values=sp.csr_matrix((V, V)), slice_label=t) for t in range(T)
    ]
    return PpmiSequence(matrices=mats, vocab_size=V)


class TestInit:
    def test_deterministic(self):
        cfg = SolverConfig(dim=10, seed=7)
        a = init_embeddings(100, 3, cfg)
        b = init_embeddings(100, 3, cfg)
        for x, y in zip(a.U + a.W, b.U + b.W):
            assert np.array_equal(x, y)

    def test_zero_scale(self):
        cfg = SolverConfig(dim=4, init_scale=0.0)
        seq = init_embeddings(5, 2, cfg)
        assert all(np.all(m == 0) for m in seq.U + seq.W)

    def test_range_bound(self):
        cfg = SolverConfig(dim=10, seed=7)
        seq = init_embeddings(100, 3, cfg)
        bound = 1.0 / np.sqrt(10)
        for m in seq.U + seq.W:
            assert np.max(np.abs(m)) <= bound

    def test_u_w_independent(self):
        cfg = SolverConfig(dim=3, seed=1)
        seq = init_embeddings(20, 1, cfg)
        assert not np.array_equal(seq.U[0], seq.W[0])


class TestObjective:
    def test_zero_factors(self):
        Y = random_ppmi_sequence(6, 3, seed=1)
        cfg = SolverConfig(dim=2, init_scale=0.0)
        seq = init_embeddings(6, 3, cfg)
        seq.labels = list(Y.labels)
        expected = 0.5 * sum(
            float(m.values.power(2).sum()) for m in Y.matrices
        )
        assert objective(seq, Y) == pytest.approx(expected, rel=1e-12)

    def test_exact_factorization_is_zero(self):
        rng = np.random.default_rng(0)
        V, d = 5, 2
        U = rng.standard_normal((V, d))
        W = rng.standard_normal((V, d))
        prod = U @ W.T
        Y = PpmiSequence(
            matrices=[PpmiMatrix(values=sp.csr_matrix(prod), slice_label=0)],
            vocab_size=V,
        )
        cfg = SolverConfig(dim=d, ridge=0.0, smoothing=0.0, coupling=0.0)
        seq = EmbeddingSequence(U=[U], W=[W], config=cfg, labels=[0])
        assert objective(seq, Y) == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        V, T, d = 6, 3, 2
        Y = random_ppmi_sequence(V, T, seed=seed)
        cfg = SolverConfig(dim=d, ridge=2.5, smoothing=1.5, coupling=0.7, seed=seed)
        seq = init_embeddings(V, T, cfg)
        for m in seq.U + seq.W:
            m += rng.standard_normal(m.shape)
        got = objective(seq, Y)
        want = dense_objective_oracle(seq, Y)
        assert got == pytest.approx(want, rel=1e-10)

    def test_shape_mismatch(self):
        Y = random_ppmi_sequence(6, 2, seed=0)
        seq = init_embeddings(5, 2, SolverConfig(dim=2))
        with pytest.raises(ValueError):
            objective(seq, Y)


class TestResidualGradient:
    def test_zero_input(self):
        Y = random_ppmi_sequence(4, 1, seed=3).matrices[0]
        grad = residual_gradient(np.zeros((4, 2)), Y)
        assert np.all(grad == 0)

    def test_stationary_at_exact_factorization(self):
        rng = np.random.default_rng(1)
        U = rng.standard_normal((4, 2))
        Y = PpmiMatrix(values=sp.csr_matrix(U @ U.T), slice_label=0)
        grad = residual_gradient(U, Y)
        assert np.max(np.abs(grad)) <= 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        V, d = 4, 2
        Y = random_ppmi_sequence(V, 1, density=0.6, seed=seed).matrices[0]
        U = rng.standard_normal((V, d))

        def f(M):
            return 0.5 * np.sum((Y.values.toarray() - M @ M.T) ** 2)

        grad = residual_gradient(U, Y)
        eps = 1e-6
        fd = np.zeros_like(U)
        for i in range(V):
            for j in range(d):
                up, dn = U.copy(), U.copy()
                up[i, j] += eps
                dn[i, j] -= eps
                fd[i, j] = (f(up) - f(dn)) / (2 * eps)
        assert np.max(np.abs(grad - fd)) / max(np.max(np.abs(fd)), 1) <= 1e-5


class TestRidgeUpdateBlock:
    def test_zero_data_shrinks_to_zero(self):
        V, T, d = 6, 3, 2
        Y = zero_sequence(V, T)
        cfg = SolverConfig(dim=d, ridge=5.0, smoothing=0.0, coupling=0.0, seed=2)
        state = init_embeddings(V, T, cfg)
        rows = ridge_update_block((0, V), "U", 1, state, Y, cfg)
        assert np.max(np.abs(rows)) <= 1e-14

    def test_large_smoothing_averages_neighbors(self):
        V, T, d = 5, 3, 2
        Y = zero_sequence(V, T)
        cfg = SolverConfig(
            dim=d, ridge=0.0, smoothing=1e12, coupling=0.0, seed=4, init_scale=1.0
        )
        state = init_embeddings(V, T, cfg)
        rows = ridge_update_block((0, V), "U", 1, state, Y, cfg)
        target = (state.U[0] + state.U[2]) / 2.0
        assert np.max(np.abs(rows - target)) <= 1e-8

    @pytest.mark.parametrize("factor", ["U", "W"])
    @pytest.mark.parametrize("t", [0, 1, 2])
    def test_block_update_never_increases_objective(self, factor, t):
        V, T, d = 8, 3, 3
        Y = random_ppmi_sequence(V, T, seed=5)
        cfg = SolverConfig(dim=d, ridge=1.0, smoothing=2.0, coupling=0.5, seed=5)
        state = init_embeddings(V, T, cfg)
        state.labels = list(Y.labels)
        before = objective(state, Y)
        rows = ridge_update_block((0, V), factor, t, state, Y, cfg)
        (state.U if factor == "U" else state.W)[t][:] = rows
        after = objective(state, Y)
        assert after <= before * (1 + 1e-12)

    def test_normal_equation_residual(self):
        from tvembed.solver import _form_system

        V, T, d = 8, 3, 3
        Y = random_ppmi_sequence(V, T, seed=6)
        cfg = SolverConfig(dim=d, ridge=1.0, smoothing=2.0, coupling=0.5, seed=6)
        state = init_embeddings(V, T, cfg)
        for t in range(T):
            A, B = _form_system((0, V), "U", t, state, Y, cfg)
            rows = ridge_update_block((0, V), "U", t, state, Y, cfg)
            assert (
                np.linalg.norm(rows @ A - B) / np.linalg.norm(B) <= 1e-10
            )

    def test_partial_block_matches_full(self):
        V, T, d = 7, 2, 2
        Y = random_ppmi_sequence(V, T, seed=8)
        cfg = SolverConfig(dim=d, ridge=1.0, smoothing=1.0, coupling=1.0, seed=8)
        state = init_embeddings(V, T, cfg)
        full = ridge_update_block((0, V), "W", 1, state, Y, cfg)
        part = ridge_update_block((2, 5), "W", 1, state, Y, cfg)
        assert np.allclose(full[2:5], part, atol=1e-13)


class TestTrain:
    def test_monotone_descent_every_block(self):
        V, T, d = 20, 4, 3
        Y = random_ppmi_sequence(V, T, density=0.4, seed=9)
        cfg = SolverConfig(
            dim=d, ridge=1.0, smoothing=3.0, coupling=2.0, epochs=3,
            block_rows=7, seed=9,
        )
        residuals = []
        objs = [objective(init_embeddings_with_labels(V, T, cfg, Y), Y)]

        def sink(event):
            residuals.append(event.normal_residual)
            objs.append(objective(event.state, Y))

        seq = train(Y, cfg, progress_sink=sink)
        assert max(residuals) <= 1e-10
        for before, after in zip(objs, objs[1:]):
            assert after <= before * (1 + 1e-8)
        assert objs[-1] == pytest.approx(objective(seq, Y), rel=1e-12)
        assert objs[-1] < objs[0]

    def test_t1_smoothing_is_inert(self):
        V, d = 10, 3
        Y = random_ppmi_sequence(V, 1, seed=10)
        base = SolverConfig(dim=d, ridge=1.0, smoothing=0.0, coupling=1.0,
                            epochs=3, seed=10)
        smooth = SolverConfig(dim=d, ridge=1.0, smoothing=123.0, coupling=1.0,
                              epochs=3, seed=10)
        a = train(Y, base)
        b = train(Y, smooth)
        assert np.array_equal(a.U[0], b.U[0])
        assert np.array_equal(a.W[0], b.W[0])

    def test_deterministic(self):
        Y = random_ppmi_sequence(12, 3, seed=11)
        cfg = SolverConfig(dim=3, epochs=2, seed=11)
        a = train(Y, cfg)
        b = train(Y, cfg)
        for x, y in zip(a.U + a.W, b.U + b.W):
            assert np.array_equal(x, y)

    def test_rotation_increases_objective(self):
        # With smoothing > 0, rotating one interior slice breaks alignment.
        V, T, d = 10, 3, 3
        Y = random_ppmi_sequence(V, T, seed=12)
        cfg = SolverConfig(dim=d, ridge=1.0, smoothing=5.0, coupling=0.0,
                           epochs=4, seed=12)
        seq = train(Y, cfg)
        base = objective(seq, Y)
        theta = 0.7
        R = np.eye(d)
        R[:2, :2] = [[np.cos(theta), -np.sin(theta)],
                     [np.sin(theta), np.cos(theta)]]
        rotated = copy.deepcopy(seq)
        rotated.U[1] = rotated.U[1] @ R
        rotated.W[1] = rotated.W[1] @ R
        assert objective(rotated, Y) > base

    def test_nan_detection(self):
        Y = random_ppmi_sequence(4, 1, seed=13)
        Y.matrices[0].values.data[:] = np.nan
        cfg = SolverConfig(dim=2, epochs=1, seed=13)
        with pytest.raises(FloatingPointError):
            train(Y, cfg)


def init_embeddings_with_labels(V, T, cfg, Y):
    seq = init_embeddings(V, T, cfg)
    seq.labels = list(Y.labels)
    return seq


class TestFinalEmbedding:
    def make_seq(self):
        cfg = SolverConfig(dim=2)
        U = [np.full((3, 2), 2.0)]
        W = [np.zeros((3, 2))]
        return EmbeddingSequence(U=U, W=W, config=cfg, labels=[0])

    def test_average(self):
        out = final_embedding(self.make_seq(), "average")
        assert np.array_equal(out[0], np.ones((3, 2)))

    def test_u_only(self):
        seq = self.make_seq()
        out = final_embedding(seq, "U")
        assert np.array_equal(out[0], seq.U[0])

    def test_equal_factors(self):
        seq = self.make_seq()
        seq.W = [seq.U[0].copy()]
        out = final_embedding(seq, "average")
        assert np.array_equal(out[0], seq.U[0])

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            final_embedding(self.make_seq(), "median")


class TestEmbeddingIO:
    def test_binary_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(14)
        mats = [rng.standard_normal((6, 3)) for _ in range(2)]
        p = tmp_path / "e.tvem"
        write_embeddings_binary(mats, [1990, 1991], p)
        back, labels = read_embeddings_binary(p)
        assert labels == [1990, 1991]
        for a, b in zip(mats, back):
            assert np.array_equal(a, b)
        write_embeddings_binary(back, labels, tmp_path / "e2.tvem")
        assert (tmp_path / "e.tvem").read_bytes() == (
            tmp_path / "e2.tvem"
        ).read_bytes()

    def test_text_format(self, tmp_path):
        mats = [np.array([[1.0, 2.0], [3.0, 0.123456789123]])]
        p = tmp_path / "e.txt"
        write_embeddings_text(mats, [2000], ["cat", "dog"], p)
        lines = p.read_text().splitlines()
        assert lines[0] == "2 1 2"
        assert lines[1].startswith("cat 2000 1 2")
        assert "0.123456789" in lines[2]

    def test_checkpoint_round_trip(self, tmp_path):
        Y = random_ppmi_sequence(5, 2, seed=15)
        cfg = SolverConfig(dim=2, epochs=1, seed=15)
        seq = train(Y, cfg)
        p = tmp_path / "ckpt.npz"
        save_checkpoint(seq, epoch=3, path=p)
        back, epoch = load_checkpoint(p)
        assert epoch == 3
        assert back.config == cfg
        assert back.labels == seq.labels
        for a, b in zip(seq.U + seq.W, back.U + back.W):
            assert np.array_equal(a, b)
