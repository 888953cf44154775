import itertools

import numpy as np
import pytest

from codedconv import (
    ConvParams,
    DecodeInfeasibleError,
    ParameterError,
    ShapeError,
    build_codebook,
    build_recovery,
    build_vandermonde_code,
    condition_number,
    conv3d_ref,
    decode_blocks,
    encode_list,
    joint_generator,
    merge_output,
    mse,
    partition_filters,
    partition_input,
    rotation_matrix,
    vandermonde_decode,
    vandermonde_recovery,
)


class TestRotationMatrix:
    def test_zero_angle_is_identity(self):
        assert np.array_equal(rotation_matrix(0.0), np.eye(2))

    def test_full_turn(self):
        q = 7
        r = rotation_matrix(2 * np.pi / q)
        assert np.max(np.abs(np.linalg.matrix_power(r, q) - np.eye(2))) < 1e-12

    def test_cosine_entry(self):
        r = rotation_matrix(2 * np.pi / 5)
        assert abs(r[0, 0] - 0.3090169943749474) < 1e-12

    def test_orthogonal_unit_determinant(self):
        r = rotation_matrix(1.234)
        assert np.max(np.abs(r @ r.T - np.eye(2))) < 1e-15
        assert abs(np.linalg.det(r) - 1.0) < 1e-15


class TestCodebook:
    def test_k_a_two_gives_identity_blocks(self):
        book = build_codebook(4, 2, 8)
        for j in range(4):
            assert np.allclose(book.a[:, 2 * j : 2 * j + 2], np.eye(2), atol=1e-15)

    def test_rotation_powers_column_blocks(self):
        book = build_codebook(3, 4, 2)
        assert book.q == 3
        theta = 2 * np.pi / 3
        for j in range(3):
            block = book.a[:, 2 * j : 2 * j + 2]
            assert np.allclose(block[:2], np.eye(2), atol=1e-15)
            assert np.allclose(block[2:], rotation_matrix(j * theta), atol=1e-12)

    def test_single_block_row_b(self):
        book = build_codebook(3, 4, 2)
        assert book.b.shape == (2, 6)
        for j in range(3):
            assert np.allclose(book.b[:, 2 * j : 2 * j + 2], np.eye(2), atol=1e-15)

    def test_next_odd_q(self):
        assert build_codebook(6, 4, 4).q == 7
        assert build_codebook(5, 4, 4).q == 5

    def test_blocks_orthogonal(self):
        book = build_codebook(16, 8, 8)
        for mat, rows in ((book.a, 4), (book.b, 4)):
            for i in range(rows):
                for j in range(16):
                    blk = mat[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                    assert np.max(np.abs(blk @ blk.T - np.eye(2))) < 1e-12

    def test_rejects_odd_counts(self):
        with pytest.raises(ParameterError):
            build_codebook(6, 3, 4)
        with pytest.raises(ParameterError):
            build_codebook(6, 4, 1)

    def test_rejects_threshold_above_workers(self):
        with pytest.raises(ParameterError):
            build_codebook(3, 4, 4)  # delta=4 > n=3

    def test_zeroth_block_row_is_identity(self):
        # worker subtasks therefore always include an uncoded combination row
        book = build_codebook(10, 6, 4)
        for j in range(book.n):
            assert np.allclose(book.a[0:2, 2 * j : 2 * j + 2], np.eye(2), atol=1e-15)
            assert np.allclose(book.b[0:2, 2 * j : 2 * j + 2], np.eye(2), atol=1e-15)


class TestEncodeList:
    def test_identity_matrix(self):
        rng = np.random.default_rng(0)
        parts = [rng.standard_normal((2, 3, 3)) for _ in range(4)]
        out = encode_list(parts, np.eye(4))
        for a, b in zip(parts, out):
            assert np.array_equal(a, b)

    def test_replication_row(self):
        p = np.arange(6.0).reshape(1, 2, 3)
        out = encode_list([p], np.ones((1, 5)))
        assert len(out) == 5
        for o in out:
            assert np.array_equal(o, p)

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(1)
        book = build_codebook(3, 4, 2)
        parts = [rng.standard_normal((2, 4, 4)) for _ in range(4)]
        got = encode_list(parts, book.a)
        for j in range(book.a.shape[1]):
            want = np.zeros((2, 4, 4))
            for i in range(4):
                want += book.a[i, j] * parts[i]
            assert np.max(np.abs(got[j] - want)) < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            encode_list([np.ones((1, 2, 2)), np.ones((1, 2, 3))], np.eye(2))


class TestJointGenerator:
    def test_two_by_two_blocks_are_identity(self):
        g = joint_generator(build_codebook(3, 2, 2))
        for i in range(3):
            assert np.allclose(g[:, 4 * i : 4 * i + 4], np.eye(4), atol=1e-15)

    def test_matches_kron_oracle(self):
        book = build_codebook(3, 4, 2)
        g = joint_generator(book)
        for i in range(3):
            want = np.kron(book.a[:, 2 * i : 2 * i + 2], book.b[:, 2 * i : 2 * i + 2])
            assert np.array_equal(g[:, 4 * i : 4 * i + 4], want)

    def test_shape(self):
        g = joint_generator(build_codebook(6, 4, 4))
        assert g.shape == (16, 24)


class TestRecovery:
    def test_trivial_identity(self):
        g = joint_generator(build_codebook(1, 2, 2))
        rec = build_recovery(g, [0])
        assert np.allclose(rec.matrix, np.eye(4), atol=1e-15)
        assert np.allclose(rec.inverse, np.eye(4), atol=1e-15)
        assert abs(rec.kappa - 1.0) < 1e-12

    def test_inversion_residual(self):
        g = joint_generator(build_codebook(6, 4, 4))
        rec = build_recovery(g, [0, 1, 2, 3])
        assert np.max(np.abs(rec.matrix @ rec.inverse - np.eye(16))) < 1e-10

    def test_duplicate_ids_rejected(self):
        g = joint_generator(build_codebook(6, 4, 4))
        with pytest.raises(ParameterError):
            build_recovery(g, [0, 0, 1, 2])

    def test_wrong_subset_size(self):
        g = joint_generator(build_codebook(6, 4, 4))
        with pytest.raises(ParameterError):
            build_recovery(g, [0, 1, 2])

    def test_singular_matrix_reports_kappa(self):
        # duplicated column blocks cannot be inverted
        block = np.vstack([np.eye(4), np.eye(4)])  # 8 x 4
        g = np.hstack([block, block])
        with pytest.raises(DecodeInfeasibleError) as err:
            build_recovery(g, [0, 1])
        assert err.value.kappa > 1e13


class TestDecode:
    def test_identity_recovery_returns_blocks_verbatim(self):
        rng = np.random.default_rng(2)
        g = joint_generator(build_codebook(1, 2, 2))
        rec = build_recovery(g, [0])
        blocks = [rng.standard_normal((2, 3, 4)) for _ in range(4)]
        out = decode_blocks([blocks], rec, 2, 2, (2, 3, 4))
        # column r -> (u_a, u_b) = divmod(r, k_b)
        assert np.allclose(out[(0, 0)], blocks[0], atol=1e-12)
        assert np.allclose(out[(0, 1)], blocks[1], atol=1e-12)
        assert np.allclose(out[(1, 0)], blocks[2], atol=1e-12)
        assert np.allclose(out[(1, 1)], blocks[3], atol=1e-12)

    def test_pipeline_matches_uncoded_blocks(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 9, 7))
        filt = rng.standard_normal((8, 2, 2, 2))
        params = ConvParams()
        k_a, k_b, n = 4, 4, 6
        plan, slices = partition_input(x, k_a, params, 2)
        _, parts = partition_filters(filt, k_b)
        book = build_codebook(n, k_a, k_b)
        coded_x = encode_list(slices, book.a)
        coded_k = encode_list(parts, book.b)
        worker_blocks = {
            i: [
                conv3d_ref(coded_x[2 * i + b1], coded_k[2 * i + b2], params)
                for b1 in range(2)
                for b2 in range(2)
            ]
            for i in range(n)
        }
        g = joint_generator(book)
        rec = build_recovery(g, [1, 3, 4, 5])
        dims = worker_blocks[0][0].shape
        decoded = decode_blocks([worker_blocks[i] for i in rec.worker_ids], rec, k_a, k_b, dims)
        for ua in range(k_a):
            for ub in range(k_b):
                want = conv3d_ref(slices[ua], parts[ub], params)
                assert mse(decoded[(ua, ub)], want) <= 1e-20

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        book = build_codebook(6, 4, 4)
        g = joint_generator(book)
        blocks = {i: [rng.standard_normal((1, 2, 2)) for _ in range(4)] for i in range(6)}
        ids_a = [0, 2, 4, 5]
        ids_b = [5, 0, 4, 2]
        rec_a = build_recovery(g, ids_a)
        rec_b = build_recovery(g, ids_b)
        out_a = decode_blocks([blocks[i] for i in ids_a], rec_a, 4, 4, (1, 2, 2))
        out_b = decode_blocks([blocks[i] for i in ids_b], rec_b, 4, 4, (1, 2, 2))
        for key in out_a:
            assert np.allclose(out_a[key], out_b[key], atol=1e-10)

    def test_wrong_block_count(self):
        g = joint_generator(build_codebook(1, 2, 2))
        rec = build_recovery(g, [0])
        with pytest.raises(ShapeError):
            decode_blocks([[np.ones((1, 1, 1))] * 3], rec, 2, 2, (1, 1, 1))


class TestKroneckerIdentity:
    def test_worker_outputs_match_generator_columns(self):
        rng = np.random.default_rng(5)
        k_a = k_b = 4
        book = build_codebook(6, k_a, k_b)
        t_a = [rng.standard_normal((2, 6, 6)) for _ in range(k_a)]
        t_b = [rng.standard_normal((2, 2, 2, 2)) for _ in range(k_b)]
        params = ConvParams()
        t_c = [conv3d_ref(a, b, params) for a in t_a for b in t_b]
        coded_a = encode_list(t_a, book.a)
        coded_b = encode_list(t_b, book.b)
        g = joint_generator(book)
        for i in range(book.n):
            gi = g[:, 4 * i : 4 * i + 4]
            got = [
                conv3d_ref(coded_a[2 * i + b1], coded_b[2 * i + b2], params)
                for b1 in range(2)
                for b2 in range(2)
            ]
            for c in range(4):
                want = sum(gi[r, c] * t_c[r] for r in range(k_a * k_b))
                assert np.max(np.abs(got[c] - want)) <= 1e-10


class TestAnySubsetDecodable:
    def test_all_fifteen_subsets(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((2, 9, 7))
        filt = rng.standard_normal((8, 2, 2, 2))
        params = ConvParams()
        plan, slices = partition_input(x, 4, params, 2)
        _, parts = partition_filters(filt, 4)
        book = build_codebook(6, 4, 4)
        coded_x = encode_list(slices, book.a)
        coded_k = encode_list(parts, book.b)
        outs = {
            i: [
                conv3d_ref(coded_x[2 * i + b1], coded_k[2 * i + b2], params)
                for b1 in range(2)
                for b2 in range(2)
            ]
            for i in range(6)
        }
        reference = conv3d_ref(x, filt, params)
        g = joint_generator(book)
        dims = outs[0][0].shape
        for subset in itertools.combinations(range(6), 4):
            rec = build_recovery(g, list(subset))
            assert np.isfinite(rec.kappa)
            decoded = decode_blocks([outs[i] for i in subset], rec, 4, 4, dims)
            merged = merge_output(decoded, 4, 4, plan)
            assert np.max(np.abs(merged - reference)) <= 1e-8


class TestConditionNumber:
    def test_identity(self):
        assert condition_number(np.eye(5)) == 1.0

    def test_diagonal(self):
        assert abs(condition_number(np.diag([2.0, 1.0])) - 2.0) < 1e-12

    def test_rotation_is_perfectly_conditioned(self):
        assert abs(condition_number(rotation_matrix(0.77)) - 1.0) <= 1e-12

    def test_singular_gives_infinity(self):
        assert condition_number(np.zeros((3, 3))) == float("inf")

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError):
            condition_number(np.ones((2, 3)))


class TestVandermondeBaseline:
    def test_trivial_single_block(self):
        code = build_vandermonde_code(1, 1, 1)
        assert np.array_equal(code.generator, np.ones((1, 1)))
        rec = vandermonde_recovery(code, [0])
        assert rec.kappa == 1.0

    def test_equispaced_points_and_determinant(self):
        code = build_vandermonde_code(4, 4, 1)
        assert np.allclose(code.points, [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0], atol=1e-15)
        rec = vandermonde_recovery(code, [0, 1, 2, 3])
        assert abs(np.linalg.det(rec.matrix)) > 1e-6

    def test_kappa_grows_with_threshold(self):
        n = 12
        kappas = []
        for delta in (2, 4, 6, 8):
            code = build_vandermonde_code(n, delta, 1)
            rec = vandermonde_recovery(code, list(range(delta)))
            kappas.append(rec.kappa)
        assert all(a < b for a, b in zip(kappas, kappas[1:]))

    def test_threshold_above_workers_rejected(self):
        with pytest.raises(ParameterError):
            build_vandermonde_code(3, 2, 2)

    def test_decode_round_trip(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1, 5, 4))
        filt = rng.standard_normal((4, 1, 2, 2))
        params = ConvParams()
        k_a, k_b, n = 2, 2, 6
        plan, slices = partition_input(x, k_a, params, 2)
        _, parts = partition_filters(filt, k_b)
        code = build_vandermonde_code(n, k_a, k_b)
        coded_x = encode_list(slices, code.a)
        coded_k = encode_list(parts, code.b)
        outs = [conv3d_ref(coded_x[j], coded_k[j], params) for j in range(n)]
        rec = vandermonde_recovery(code, [0, 2, 3, 5])
        decoded = vandermonde_decode([outs[i] for i in rec.worker_ids], rec, k_a, k_b, outs[0].shape)
        merged = merge_output(decoded, k_a, k_b, plan)
        assert mse(merged, conv3d_ref(x, filt, params)) <= 1e-18


class TestStabilityOrdering:
    def test_rotation_code_better_conditioned_small(self):
        # quick version of the full acceptance sweep
        rng = np.random.default_rng(8)
        n, k_a, k_b = 20, 8, 8
        book = build_codebook(n, k_a, k_b)
        g = joint_generator(book)
        delta = book.delta
        base = build_vandermonde_code(n, k_a, k_b // 4)
        worst_rot, worst_vand = 0.0, 0.0
        for _ in range(30):
            subset = sorted(rng.choice(n, size=delta, replace=False).tolist())
            worst_rot = max(worst_rot, build_recovery(g, subset).kappa)
            worst_vand = max(worst_vand, vandermonde_recovery(base, subset).kappa)
        assert worst_rot < worst_vand
