from __future__ import annotations

import io
import json

import numpy as np
import pytest

from dpvqa import autodiff as T
from dpvqa.autodiff import ContractError, backward, tensor
from dpvqa.language import EncodedQuestion
from dpvqa.mac import MacReasoner, write_trace
from dpvqa.params import ParamStore

import oracles


def make_mac(seed=0, d=3, steps=2):
    store = ParamStore(seed=seed, dtype=np.float64)
    return store, MacReasoner(store, d=d, steps=steps)


def rand_encoded(rng, s, d):
    words = tensor(rng.normal(size=(s, d)), dtype=np.float64)
    vector = tensor(rng.normal(size=d), dtype=np.float64)
    return EncodedQuestion(words=words, vector=vector)


class TestProjectQuestion:
    def test_zero_weights_give_bias(self):
        store, mac = make_mac()
        w, b = mac._q_proj[0]
        w.data[:] = 0.0
        b.data[:] = [1.0, 2.0, 3.0]
        q = tensor(np.ones(3), dtype=np.float64)
        np.testing.assert_allclose(mac.project_question(q, 1).data, [1, 2, 3])

    def test_identity_weights_pass_through(self):
        store, mac = make_mac()
        w, b = mac._q_proj[1]
        w.data[:] = np.eye(3)
        b.data[:] = 0.0
        q = tensor(np.array([0.5, -1.0, 2.0]), dtype=np.float64)
        np.testing.assert_allclose(mac.project_question(q, 2).data, q.data)

    def test_matches_matrix_oracle(self):
        store, mac = make_mac(seed=5)
        q = tensor(np.random.default_rng(0).normal(size=3), dtype=np.float64)
        got = mac.project_question(q, 1).data
        w, b = mac._q_proj[0]
        np.testing.assert_allclose(got, w.data @ q.data + b.data, atol=1e-6)

    def test_step_out_of_range(self):
        store, mac = make_mac(steps=2)
        q = tensor(np.zeros(3), dtype=np.float64)
        with pytest.raises(ContractError):
            mac.project_question(q, 0)
        with pytest.raises(ContractError):
            mac.project_question(q, 3)


class TestControlUnit:
    def test_single_word_gets_full_attention(self):
        store, mac = make_mac()
        rng = np.random.default_rng(1)
        words = tensor(rng.normal(size=(1, 3)), dtype=np.float64)
        c, alpha = mac.control(tensor(rng.normal(size=3), dtype=np.float64),
                               words, mac.c0)
        np.testing.assert_allclose(alpha.data, [1.0])
        np.testing.assert_allclose(c.data, words.data[0])

    def test_identical_words_return_that_word(self):
        store, mac = make_mac()
        rng = np.random.default_rng(2)
        row = rng.normal(size=3)
        words = tensor(np.tile(row, (4, 1)), dtype=np.float64)
        c, alpha = mac.control(tensor(rng.normal(size=3), dtype=np.float64),
                               words, mac.c0)
        np.testing.assert_allclose(c.data, row, atol=1e-12)
        np.testing.assert_allclose(alpha.data.sum(), 1.0, atol=1e-12)

    def test_toy_matches_scalar_oracle(self):
        store, mac = make_mac(seed=7, d=2)
        rng = np.random.default_rng(3)
        words_np = rng.normal(size=(2, 2))
        q_np = rng.normal(size=2)
        q_i = mac.project_question(tensor(q_np, dtype=np.float64), 1)
        c, alpha = mac.control(q_i, tensor(words_np, dtype=np.float64), mac.m0)

        p = store.state_arrays()
        joined = p["mac.ctrl.join.w"] @ np.concatenate(
            [p["mac.ctrl.in.w"] @ p["mac.m0"],
             p["mac.q1.w"] @ q_np + p["mac.q1.b"]])
        scores = [float(p["mac.ctrl.att.w"][0] @ (joined * w) + p["mac.ctrl.att.b"][0])
                  for w in words_np]
        want_alpha = oracles.softmax_ref(np.array(scores))
        np.testing.assert_allclose(alpha.data, want_alpha, atol=1e-6)
        np.testing.assert_allclose(
            c.data, want_alpha[0] * words_np[0] + want_alpha[1] * words_np[1],
            atol=1e-6)

    def test_empty_words_rejected(self):
        store, mac = make_mac()
        with pytest.raises(ContractError):
            mac.control(mac.c0, tensor(np.zeros((0, 3)), dtype=np.float64), mac.c0)


class TestReadUnit:
    def test_single_cell_grid_returns_that_cell(self):
        store, mac = make_mac()
        rng = np.random.default_rng(4)
        cell = rng.normal(size=(1, 3))
        r, alpha = mac.read(mac.m0, tensor(cell, dtype=np.float64), mac.c0)
        np.testing.assert_allclose(alpha.data, [1.0])
        np.testing.assert_allclose(r.data, cell[0])

    def test_identical_cells_return_common_value(self):
        store, mac = make_mac()
        rng = np.random.default_rng(5)
        row = rng.normal(size=3)
        grid = tensor(np.tile(row, (6, 1)), dtype=np.float64)
        r, alpha = mac.read(mac.m0, grid, mac.c0)
        np.testing.assert_allclose(r.data, row, atol=1e-12)

    def test_two_cell_toy_matches_scalar_oracle(self):
        store, mac = make_mac(seed=8, d=2)
        rng = np.random.default_rng(6)
        grid_np = rng.normal(size=(2, 2))
        m_np = rng.normal(size=2)
        c_np = rng.normal(size=2)
        r, alpha = mac.read(tensor(m_np, dtype=np.float64),
                            tensor(grid_np, dtype=np.float64),
                            tensor(c_np, dtype=np.float64))
        p = store.state_arrays()
        scores = []
        for cell in grid_np:
            inter = p["mac.read.in.w"] @ np.concatenate([m_np * cell, cell])
            scores.append(float(p["mac.read.att.w"][0] @ (c_np * inter)
                                + p["mac.read.att.b"][0]))
        want_alpha = oracles.softmax_ref(np.array(scores))
        np.testing.assert_allclose(alpha.data, want_alpha, atol=1e-6)
        np.testing.assert_allclose(
            r.data, want_alpha[0] * grid_np[0] + want_alpha[1] * grid_np[1],
            atol=1e-6)

    def test_empty_grid_rejected(self):
        store, mac = make_mac()
        with pytest.raises(ContractError):
            mac.read(mac.m0, tensor(np.zeros((0, 3)), dtype=np.float64), mac.c0)

    def test_dominant_cell_keeps_argmax_under_positive_scaling(self):
        # Construct weights so one cell dominates the read attention, then
        # check that scaling the grid by a positive constant preserves the
        # argmax location.
        store, mac = make_mac(seed=21, d=2)
        rng = np.random.default_rng(9)
        grid_np = np.ones((4, 2)) * 0.01
        grid_np[2] = [3.0, 3.0]
        m_np = np.abs(rng.normal(size=2)) + 0.5
        c_np = np.abs(rng.normal(size=2)) + 0.5
        mac.read_in_w.data[:] = np.abs(mac.read_in_w.data)
        mac.read_att_w.data[:] = np.abs(mac.read_att_w.data)
        _, alpha = mac.read(tensor(m_np, dtype=np.float64),
                            tensor(grid_np, dtype=np.float64),
                            tensor(c_np, dtype=np.float64))
        assert int(np.argmax(alpha.data)) == 2
        for lam in (0.5, 2.0, 7.5):
            _, alpha_scaled = mac.read(tensor(m_np, dtype=np.float64),
                                       tensor(lam * grid_np, dtype=np.float64),
                                       tensor(c_np, dtype=np.float64))
            assert int(np.argmax(alpha_scaled.data)) == 2


class TestWriteUnit:
    def test_selector_matrices(self):
        store, mac = make_mac()
        d = 3
        rng = np.random.default_rng(7)
        m_prev = tensor(rng.normal(size=d), dtype=np.float64)
        r = tensor(rng.normal(size=d), dtype=np.float64)
        mac.write_b.data[:] = 0.0
        mac.write_w.data[:] = np.hstack([np.zeros((d, d)), np.eye(d)])
        np.testing.assert_allclose(mac.write(m_prev, r).data, r.data)
        mac.write_w.data[:] = np.hstack([np.eye(d), np.zeros((d, d))])
        np.testing.assert_allclose(mac.write(m_prev, r).data, m_prev.data)

    def test_matches_matrix_oracle(self):
        store, mac = make_mac(seed=9)
        rng = np.random.default_rng(8)
        m_prev = rng.normal(size=3)
        r = rng.normal(size=3)
        got = mac.write(tensor(m_prev, dtype=np.float64),
                        tensor(r, dtype=np.float64)).data
        want = mac.write_w.data @ np.concatenate([m_prev, r]) + mac.write_b.data
        np.testing.assert_allclose(got, want, atol=1e-6)


class TestRun:
    def test_one_step_equals_manual_composition(self):
        store, mac = make_mac(seed=10, d=3, steps=1)
        rng = np.random.default_rng(11)
        enc = rand_encoded(rng, 3, 3)
        grid = tensor(rng.normal(size=(2, 2, 3)), dtype=np.float64)
        m_run, trace = mac.run(enc, grid)

        q1 = mac.project_question(enc.vector, 1)
        c1, _ = mac.control(q1, enc.words, mac.c0)
        r1, _ = mac.read(mac.m0, T.reshape(grid, (4, 3)), c1)
        m_manual = mac.write(mac.m0, r1)
        np.testing.assert_allclose(m_run.data, m_manual.data, atol=1e-12)

    def test_trace_shapes_and_sums(self):
        store, mac = make_mac(seed=12, d=4, steps=3)
        rng = np.random.default_rng(13)
        enc = rand_encoded(rng, 5, 4)
        grid = tensor(rng.normal(size=(2, 3, 4)), dtype=np.float64)
        _, trace = mac.run(enc, grid)
        assert trace.word_weights.shape == (3, 5)
        assert trace.location_weights.shape == (3, 2, 3)
        np.testing.assert_allclose(trace.word_weights.sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(trace.location_weights.sum(axis=(1, 2)), 1.0,
                                   atol=1e-6)

    def test_two_step_toy_matches_scalar_oracle(self):
        store, mac = make_mac(seed=14, d=2, steps=2)
        rng = np.random.default_rng(15)
        enc = rand_encoded(rng, 2, 2)
        grid = tensor(rng.normal(size=(2, 1, 2)), dtype=np.float64)
        m_run, trace = mac.run(enc, grid)

        p = store.state_arrays()
        grid_flat = grid.data.reshape(2, 2)
        c, m = p["mac.c0"], p["mac.m0"]
        for step in (1, 2):
            c, m, alpha_c, alpha_r = oracles.mac_step_scalar(
                enc.words.data, enc.vector.data, grid_flat, c, m, p, step)
            np.testing.assert_allclose(trace.word_weights[step - 1], alpha_c,
                                       atol=1e-6)
        np.testing.assert_allclose(m_run.data, m, atol=1e-6)

    def test_memory_in_convex_hull_of_readable_values(self):
        # The control state mixes word vectors with softmax weights, so it
        # stays inside their componentwise bounds.
        store, mac = make_mac(seed=16, d=3, steps=2)
        rng = np.random.default_rng(17)
        enc = rand_encoded(rng, 4, 3)
        q1 = mac.project_question(enc.vector, 1)
        c, alpha = mac.control(q1, enc.words, mac.c0)
        assert np.all(c.data >= enc.words.data.min(axis=0) - 1e-9)
        assert np.all(c.data <= enc.words.data.max(axis=0) + 1e-9)
        grid = tensor(rng.normal(size=(3, 1, 3)), dtype=np.float64)
        r, _ = mac.read(mac.m0, T.reshape(grid, (3, 3)), c)
        flat = grid.data.reshape(3, 3)
        assert np.all(r.data >= flat.min(axis=0) - 1e-9)
        assert np.all(r.data <= flat.max(axis=0) + 1e-9)

    def test_gradients_through_steps_match_finite_differences(self):
        store, mac = make_mac(seed=18, d=2, steps=3)
        rng = np.random.default_rng(19)
        words_np = rng.normal(size=(2, 2))
        vec_np = rng.normal(size=2)
        grid_np = rng.normal(size=(2, 1, 2))

        def value():
            enc = EncodedQuestion(words=tensor(words_np, dtype=np.float64),
                                  vector=tensor(vec_np, dtype=np.float64))
            m, _ = mac.run(enc, tensor(grid_np, dtype=np.float64))
            return float(T.tsum(T.mul(m, m)).data)

        check = ["mac.write.w", "mac.ctrl.att.w", "mac.read.in.w", "mac.q2.w",
                 "mac.c0", "mac.m0"]
        fd = oracles.central_diff(value, [store[n].data for n in check])

        enc = EncodedQuestion(words=tensor(words_np, dtype=np.float64),
                              vector=tensor(vec_np, dtype=np.float64))
        m, _ = mac.run(enc, tensor(grid_np, dtype=np.float64))
        backward(T.tsum(T.mul(m, m)))
        for name, g in zip(check, fd):
            assert oracles.rel_err(store[name].grad, g) < 1e-4, name


def test_trace_export_format():
    store, mac = make_mac(seed=20, d=2, steps=2)
    rng = np.random.default_rng(21)
    enc = rand_encoded(rng, 3, 2)
    grid = tensor(rng.normal(size=(2, 2, 2)), dtype=np.float64)
    _, trace = mac.run(enc, grid)
    buf = io.StringIO()
    write_trace(trace, buf)
    lines = buf.getvalue().strip().split("\n")
    assert len(lines) == 2
    for i, line in enumerate(lines):
        record = json.loads(line)
        assert record["step"] == i + 1
        assert len(record["word_weights"]) == 3
        assert len(record["location_weights"]) == 2
        assert len(record["location_weights"][0]) == 2
