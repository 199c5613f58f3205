import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_policies, expectimax, single_user_closed_form
from mmcast.errors import CapacityError, ValidationError
from mmcast.exact import (
    all_groups,
    beam_kernels,
    enumerate_states,
    joint_transition,
    receive_pmf,
    shift_matrix,
    solve_exact,
    value_iteration,
)
from mmcast.phy import User
from mmcast.scenario import Scenario

GOLDEN = Path(__file__).parent / "golden"
TAU = np.array([21.392e-6, 11.4636e-6])

probs = st.floats(0.0, 1.0)


def rand_p(draw_list, n_groups):
    return [np.array(draw_list[2 * g : 2 * g + 2]) for g in range(n_groups)]


class TestStates:
    def test_examples(self):
        assert enumerate_states(1, 2) == [(0,), (1,), (2,)]
        assert len(enumerate_states(2, 2)) == 9
        assert enumerate_states(2, 1) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_cap(self):
        with pytest.raises(CapacityError):
            enumerate_states(8, 5)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            enumerate_states(0, 3)


class TestReceive:
    def test_examples(self):
        np.testing.assert_allclose(receive_pmf(2, 0.5), [0.25, 0.5, 0.25])
        np.testing.assert_array_equal(receive_pmf(3, 1.0), [0, 0, 0, 1])
        np.testing.assert_array_equal(receive_pmf(3, 0.0), [1, 0, 0, 0])
        np.testing.assert_array_equal(receive_pmf(0, 0.3), [1.0])

    @given(st.integers(0, 30), probs)
    def test_sums_to_one(self, x, p):
        pmf = receive_pmf(x, p)
        assert abs(pmf.sum() - 1.0) < 1e-12
        assert np.all(pmf >= 0)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            receive_pmf(2, 1.5)

    def test_shift_matrix_example(self):
        # r=2, send 2 at p=.5: r'=2 w.p. .25, 1 w.p. .5, 0 w.p. .25
        mat = shift_matrix(2, receive_pmf(2, 0.5))
        np.testing.assert_allclose(mat[2], [0.25, 0.5, 0.25])
        np.testing.assert_allclose(mat[1], [0.75, 0.25, 0.0])
        np.testing.assert_allclose(mat[0], [1.0, 0.0, 0.0])


class TestJointTransition:
    def test_unicast_pair(self):
        out = joint_transition((1, 1), [((0,), 1, 0.5), ((1,), 1, 0.5)])
        assert out == pytest.approx({(0, 0): 0.25, (0, 1): 0.25, (1, 0): 0.25, (1, 1): 0.25})

    def test_shared_draw(self):
        out = joint_transition((2, 1), [((0, 1), 1, 0.4)])
        assert out == pytest.approx({(1, 0): 0.4, (2, 1): 0.6})

    def test_per_member_draws(self):
        out = joint_transition((1, 1), [((0, 1), 1, [0.5, 1.0])])
        assert out == pytest.approx({(0, 0): 0.5, (1, 0): 0.5})

    def test_silence(self):
        assert joint_transition((2, 0), [((0,), 0, 0.3)]) == {(2, 0): 1.0}

    @given(
        st.tuples(st.integers(0, 2), st.integers(0, 2)),
        st.integers(0, 3),
        st.integers(0, 3),
        probs,
        probs,
    )
    def test_stochastic_and_monotone(self, state, x1, x2, p1, p2):
        out = joint_transition(state, [((0,), x1, p1), ((0, 1), x2, p2)])
        assert sum(out.values()) == pytest.approx(1.0, abs=1e-12)
        for s in out:
            assert all(a <= b for a, b in zip(s, state))

    @pytest.mark.parametrize("mode", ["worst-user", "per-user"])
    @pytest.mark.parametrize("members", [(0,), (1,), (0, 1)])
    def test_kernels_match_direct(self, members, mode):
        m, x_cap = 2, 2
        p = np.array([0.3, 0.8]) if mode == "worst-user" else np.array([[0.3, 0.6][: len(members)], [0.8, 0.1][: len(members)]])
        ker = beam_kernels(2, m, members, x_cap, p, mode)
        states = enumerate_states(2, m)
        opts = [(0, None)] + [(x, k) for x in (1, 2) for k in (0, 1)]
        for o, (x, k) in enumerate(opts):
            for i, s in enumerate(states):
                pk = 0.0 if k is None else (p[k] if mode == "worst-user" else list(p[k]))
                ref = joint_transition(s, [(members, x, pk)])
                row = {states[j]: v for j, v in enumerate(ker[o, i]) if v > 0}
                assert row == pytest.approx(ref, abs=1e-14)


def _two_groups_p(values):
    return [np.array(values[0:2]), np.array(values[2:4]), np.array(values[4:6])]


CASES = [(n, m, r) for n in (1, 2) for m in (1, 2) for r in (0, 1)]


class TestOracle:
    @pytest.mark.parametrize("n,m,r_max", CASES)
    @settings(max_examples=4, deadline=None)
    @given(vals=st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6), eps=st.floats(0.0, 1e-3))
    def test_matches_expectimax(self, n, m, r_max, vals, eps):
        groups = [tuple(g) for g in ([(0,)] if n == 1 else [(0,), (1,), (0, 1)])]
        p = _two_groups_p(vals)[: len(groups)]
        sol = solve_exact(n, m, r_max, eps, groups, p, TAU, 2)
        ref = expectimax(n, m, r_max, eps, groups, p, TAU, 2)
        assert abs(sol.J0 - ref) <= 1e-10

    @pytest.mark.parametrize(
        "n,m,r_max", [(1, 1, 0), (1, 2, 0), (1, 1, 1), (1, 2, 1), (2, 1, 0), (2, 2, 0)]
    )
    def test_matches_policy_enumeration(self, n, m, r_max):
        rng = np.random.default_rng(n * 100 + m * 10 + r_max)
        groups = [(0,)] if n == 1 else [(0,), (1,), (0, 1)]
        p = [rng.uniform(0.2, 0.95, 2) for _ in groups]
        eps = 2e-4
        sol = solve_exact(n, m, r_max, eps, groups, p, TAU, 2)
        assert abs(sol.J0 - enumerate_policies(n, m, r_max, eps, groups, p, TAU, 2)) <= 1e-10

    @given(eps=st.floats(0.0, 1e-2), p=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2), cap=st.integers(1, 6))
    @settings(deadline=None)
    def test_single_packet_closed_form(self, eps, p, cap):
        sol = solve_exact(1, 1, 0, eps, [(0,)], [np.array(p)], TAU, cap)
        assert sol.J0 == pytest.approx(single_user_closed_form(eps, p, TAU, cap), rel=1e-12, abs=1e-18)


def _scn(n, m=2, r_max=1, **kw):
    users = tuple(User(i + 1, 40.0 + 20 * i, math.radians(10.0 * i)) for i in range(n))
    return Scenario(users, m=m, r_max=r_max, **kw)


class TestProperties:
    def test_zero_epsilon(self):
        pol = value_iteration(_scn(2), 0.0)
        assert pol.J0 == 0.0
        assert np.all(pol.solution.actions == 0)

    @given(st.floats(0.0, 1e-2))
    @settings(max_examples=15, deadline=None)
    def test_bounded_by_silence(self, eps):
        pol = value_iteration(_scn(2), eps)
        assert pol.J0 <= eps * 2 + 1e-18

    def test_monotone_in_residuals(self):
        pol = value_iteration(_scn(2, m=3), 5e-4)
        v = pol.solution.values
        for t in range(v.shape[0]):
            for s in itertools.product(range(4), repeat=2):
                for i in range(2):
                    if s[i] < 3:
                        up = list(s)
                        up[i] += 1
                        assert pol.value(t, s) <= pol.value(t, up) + 1e-15

    def test_monotone_in_epsilon(self):
        scn = _scn(2)
        j = [value_iteration(scn, e).J0 for e in np.geomspace(1e-6, 1e-2, 10)]
        assert all(b >= a for a, b in zip(j, j[1:]))

    @given(st.floats(0.05, 0.9), st.floats(0.0, 0.09))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_decode_probability(self, p, dp):
        groups = [(0,), (1,), (0, 1)]
        lo = [np.array([p, p])] * 3
        hi = [np.array([p + dp, p + dp])] * 3
        a = solve_exact(2, 2, 1, 1e-4, groups, lo, TAU, 4).J0
        b = solve_exact(2, 2, 1, 1e-4, groups, hi, TAU, 4).J0
        assert b <= a + 1e-15

    def test_singletons_equal_unicast_sum(self):
        scn = _scn(2)
        joint = value_iteration(scn, 3e-4, groups=[(1,), (2,)])
        singles = [
            solve_exact(1, scn.m, scn.r_max, 3e-4, [(0,)], [scn.p_dec((i,))], scn.tau, scn.cap).J0
            for i in (1, 2)
        ]
        assert joint.J0 == pytest.approx(sum(singles), rel=1e-12)

    def test_more_packets_never_hurt(self):
        scn = _scn(2)
        j = [value_iteration(scn, 4e-4, x_cap=c).J0 for c in (1, 2, 3, 4)]
        assert all(b <= a + 1e-18 for a, b in zip(j, j[1:]))

    def test_zero_state_stays_silent(self):
        pol = value_iteration(_scn(2), 1e-2)
        for t in range(2):
            assert pol.execute((0, 0), t) == []

    def test_groups_order(self):
        assert all_groups(3) == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


class TestLimits:
    def test_refuses_large_n(self, table1):
        with pytest.raises(CapacityError):
            value_iteration(table1, 1e-4)

    def test_action_budget(self):
        with pytest.raises(CapacityError):
            value_iteration(_scn(3, m=2), 1e-4, action_budget=1000)

    def test_negative_epsilon(self):
        with pytest.raises(ValidationError):
            value_iteration(_scn(1), -1.0)


def test_golden_dump():
    scn = _scn(1, m=2, r_max=1, name="golden1")
    text = value_iteration(scn, 2e-4, x_cap=3).dump()
    assert text == (GOLDEN / "exact_n1_m2_r1.txt").read_text(encoding="utf-8")
