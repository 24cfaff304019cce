import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posetctrl import algebra
from posetctrl.algebra import (
    GainFamily,
    complete_from_downstream,
    d_pattern_mask,
    embed,
    is_member,
    local_product,
    mu_local,
    project_d,
    project_uo,
    zeta_local,
)
from posetctrl.errors import ContractError, UnknownElementError
from posetctrl.poset import from_cover_relations, zeta_matrix

from conftest import antichain, random_local, random_poset


def diamond_local_state(rng):
    """The worked local-state matrix on the diamond, with random symbol values.

    Returns (X, symbols) where symbols maps e.g. "x4(2)" to its value.
    """
    vals = dict(zip(
        ["x1", "x2", "x3", "x4", "x2(1)", "x3(1)", "x4(1)", "x4(2)", "x4(3)"],
        rng.standard_normal(9),
    ))
    x = np.array([
        [vals["x1"], vals["x1"], vals["x1"], vals["x1"]],
        [vals["x2(1)"], vals["x2"], vals["x2(1)"], vals["x2"]],
        [vals["x3(1)"], vals["x3(1)"], vals["x3"], vals["x3"]],
        [vals["x4(1)"], vals["x4(2)"], vals["x4(3)"], vals["x4"]],
    ])
    return x, vals


def mu_local_by_recursion(p, x):
    """Entrywise oracle for the differencing operator, straight from its
    recursion: value at (subsystem i, state j) is X^i_j minus the values at
    strictly-upstream subsystems, inside the d-pattern only."""
    s = p.size
    out = np.zeros((s, s))
    for i in range(s):  # subsystems in linear-extension order
        for j in range(s):
            if not p.leq[i, j]:
                continue
            acc = x[j, i]
            for k in range(s):
                if p.leq[k, i] and k != i:
                    acc -= out[j, k]
            out[j, i] = acc
    return out


class TestMembership:
    def test_zeta_of_vee_is_member(self, vee):
        assert is_member(vee, zeta_matrix(vee).astype(float))

    def test_all_ones_on_antichain_is_not(self):
        p = antichain(2)
        assert not is_member(p, np.ones((2, 2)))

    def test_products_of_members_are_members(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            p = random_poset(rng, 7)
            a = random_local(rng, p)
            b = random_local(rng, p)
            assert is_member(p, a @ b)

    def test_shape_checked(self, vee):
        with pytest.raises(ContractError):
            is_member(vee, np.zeros((2, 2)))

    def test_named_predicates_agree_with_mask(self, diamond):
        mask = d_pattern_mask(diamond)
        for r, row_label in enumerate(diamond.elements):
            for c, col_label in enumerate(diamond.elements):
                assert mask[r, c] == algebra.in_incidence_pattern(diamond, row_label, col_label)
                # (subsystem, state) view addresses the same entry transposed
                assert mask[r, c] == algebra.in_d_pattern(diamond, col_label, row_label)


class TestProjections:
    def test_diamond_worked_split(self, diamond):
        x, v = diamond_local_state(np.random.default_rng(1))
        x_d = project_d(diamond, x)
        x_uo = project_uo(diamond, x)
        expected_d = np.array([
            [v["x1"], 0, 0, 0],
            [v["x2(1)"], v["x2"], 0, 0],
            [v["x3(1)"], 0, v["x3"], 0],
            [v["x4(1)"], v["x4(2)"], v["x4(3)"], v["x4"]],
        ])
        expected_uo = np.array([
            [0, v["x1"], v["x1"], v["x1"]],
            [0, 0, v["x2(1)"], v["x2"]],
            [0, v["x3(1)"], 0, v["x3"]],
            [0, 0, 0, 0],
        ])
        assert np.array_equal(x_d, expected_d)
        assert np.array_equal(x_uo, expected_uo)

    def test_complementarity(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = random_poset(rng, 6)
            m = rng.standard_normal((6, 6))
            assert np.array_equal(project_d(p, m) + project_uo(p, m), m)

    def test_idempotence(self):
        rng = np.random.default_rng(3)
        p = random_poset(rng, 6)
        m = rng.standard_normal((6, 6))
        assert np.array_equal(project_d(p, project_d(p, m)), project_d(p, m))

    def test_offstream_only_support(self):
        p = antichain(3)
        m = np.ones((3, 3)) - np.eye(3)
        assert np.array_equal(project_d(p, m), np.zeros((3, 3)))
        assert np.array_equal(project_uo(p, m), m)


class TestLocalOperators:
    def test_diamond_differencing_display(self, diamond):
        x, v = diamond_local_state(np.random.default_rng(4))
        expected = np.array([
            [v["x1"], 0, 0, 0],
            [v["x2(1)"], v["x2"] - v["x2(1)"], 0, 0],
            [v["x3(1)"], 0, v["x3"] - v["x3(1)"], 0],
            [v["x4(1)"], v["x4(2)"] - v["x4(1)"], v["x4(3)"] - v["x4(1)"],
             v["x4"] - v["x4(3)"] - v["x4(2)"] + v["x4(1)"]],
        ])
        assert np.allclose(mu_local(diamond, x), expected, atol=1e-14)

    def test_antichain_fixed_point(self):
        p = antichain(4)
        x = np.diag(np.arange(1.0, 5.0))
        assert np.array_equal(mu_local(p, x), x)
        assert np.array_equal(zeta_local(p, x), x)

    def test_matches_recursion_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            p = random_poset(rng, 7)
            x = rng.standard_normal((7, 7))
            assert np.allclose(mu_local(p, x), mu_local_by_recursion(p, x), atol=1e-12)

    def test_zeta_after_mu_is_projection(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            p = random_poset(rng, 7)
            x = rng.standard_normal((7, 7))
            assert np.allclose(
                zeta_local(p, mu_local(p, x)), project_d(p, x), atol=1e-12
            )

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10_000), st.data())
    def test_operators_invert_on_pattern(self, size, seed, data):
        rng = np.random.default_rng(seed)
        p = random_poset(rng, size)
        x_d = random_local(rng, p)
        assert np.allclose(zeta_local(p, mu_local(p, x_d)), x_d, atol=1e-12)
        assert np.allclose(mu_local(p, zeta_local(p, x_d)), x_d, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 10_000))
    def test_operators_see_only_free_part(self, size, seed):
        rng = np.random.default_rng(seed)
        p = random_poset(rng, size)
        x = rng.standard_normal((size, size))
        assert np.allclose(mu_local(p, x), mu_local(p, project_d(p, x)), atol=1e-12)
        assert np.allclose(zeta_local(p, x), zeta_local(p, project_d(p, x)), atol=1e-12)

    def test_member_products_closure_and_completed_commutation(self):
        # the operator commutes with left-multiplication by an algebra member
        # on completed variables; on the free variables alone only closure
        # of the pattern holds (see the recursion: upstream columns mix in)
        rng = np.random.default_rng(7)
        for _ in range(25):
            p = random_poset(rng, 6)
            a = random_local(rng, p)
            x_d = random_local(rng, p)
            assert is_member(p, a @ mu_local(p, x_d))
            assert is_member(p, a @ zeta_local(p, x_d))
            completed = complete_from_downstream(p, x_d)
            assert np.allclose(
                mu_local(p, a @ completed), a @ mu_local(p, x_d), atol=1e-12
            )


class TestEmbed:
    def test_diamond_down_two(self, diamond):
        k = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = embed(diamond, [2, 4], k)
        expected = np.zeros((4, 4))
        expected[1, 1], expected[1, 3] = 1.0, 2.0
        expected[3, 1], expected[3, 3] = 3.0, 4.0
        assert np.array_equal(out, expected)

    def test_full_subset_is_identity_embedding(self, vee):
        k = np.arange(9.0).reshape(3, 3)
        assert np.array_equal(embed(vee, [1, 2, 3], k), k)

    def test_empty_subset(self, vee):
        assert np.array_equal(embed(vee, [], np.zeros((0, 0))), np.zeros((3, 3)))

    def test_not_a_subset(self, vee):
        with pytest.raises(UnknownElementError):
            embed(vee, [1, 9], np.zeros((2, 2)))

    def test_shape_mismatch(self, vee):
        with pytest.raises(ContractError):
            embed(vee, [1, 2], np.zeros((3, 3)))


class TestLocalProduct:
    def test_diamond_worked_shapes_and_columns(self, diamond):
        rng = np.random.default_rng(8)
        gains = {
            1: rng.standard_normal((4, 4)),
            2: rng.standard_normal((2, 2)),
            3: rng.standard_normal((2, 2)),
            4: rng.standard_normal((1, 1)),
        }
        fams = GainFamily(diamond, gains)
        f2 = fams.embedded(2)
        # support of the embedded gain for element 2 is rows/cols {2, 4}
        support = np.zeros((4, 4), dtype=bool)
        support[np.ix_([1, 3], [1, 3])] = True
        assert np.all(f2[~support] == 0.0)

        x, _ = diamond_local_state(rng)
        x_d = project_d(diamond, x)
        result = local_product(fams, x_d)
        for i, label in enumerate(diamond.elements):
            assert np.allclose(result[:, i], fams.embedded(label) @ x_d[:, i])
        # the second column only sees rows {2, 4} of the prediction vector
        masked = x_d[:, 1].copy()
        masked[[0, 2]] = 99.0
        assert np.allclose(result[:, 1], fams.embedded(2) @ masked)

    def test_identity_gains_restrict(self, diamond):
        gains = {
            label: np.eye(len(diamond.down_positions(diamond.index(label))))
            for label in diamond.elements
        }
        fams = GainFamily(diamond, gains)
        x_d = random_local(np.random.default_rng(9), diamond)
        assert np.allclose(local_product(fams, x_d), x_d)

    def test_single_element_scalar(self):
        p = antichain(1)
        fams = GainFamily(p, {1: np.array([[3.0]])})
        assert np.allclose(local_product(fams, np.array([[2.0]])), [[6.0]])

    def test_preserves_membership(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            p = random_poset(rng, 6)
            gains = {
                label: rng.standard_normal((len(p.down_positions(p.index(label))),) * 2)
                for label in p.elements
            }
            fams = GainFamily(p, gains)
            assert is_member(p, local_product(fams, random_local(rng, p)))

    def test_gain_family_validation(self, vee):
        with pytest.raises(ContractError):
            GainFamily(vee, {1: np.zeros((3, 3)), 2: np.zeros((2, 2)), 3: np.zeros((1, 1))})
        with pytest.raises(ContractError, match="missing"):
            GainFamily(vee, {1: np.zeros((3, 3))})
        with pytest.raises(UnknownElementError):
            GainFamily(vee, {9: np.zeros((1, 1))})

    def test_gain_family_from_embedded_round_trip(self, diamond):
        rng = np.random.default_rng(11)
        gains = {
            1: rng.standard_normal((4, 4)), 2: rng.standard_normal((2, 2)),
            3: rng.standard_normal((2, 2)), 4: rng.standard_normal((1, 1)),
        }
        fams = GainFamily(diamond, gains)
        again = GainFamily.from_embedded(
            diamond, {label: fams.embedded(label) for label in diamond.elements}
        )
        for label in diamond.elements:
            assert np.array_equal(again.local(label), fams.local(label))
        bad = fams.embedded(2)
        bad = bad + np.eye(4)  # support leaks outside the down-set of 2
        with pytest.raises(ContractError, match="support"):
            GainFamily.from_embedded(diamond, {2: bad})


class TestCompletion:
    def test_diamond_worked_example(self, diamond):
        x, v = diamond_local_state(np.random.default_rng(11))
        x_d = project_d(diamond, x)
        completed = complete_from_downstream(diamond, x_d)
        assert np.allclose(completed, x, atol=1e-14)
        # the offstream estimate of state 3 at subsystem 2 is the shared
        # upstream prediction
        assert np.isclose(completed[2, 1], v["x3(1)"])

    def test_antichain_identity(self):
        p = antichain(4)
        x_d = np.diag(np.random.default_rng(12).standard_normal(4))
        assert np.array_equal(complete_from_downstream(p, x_d), x_d)

    def test_chain_full_upstream_knowledge(self, chain3):
        x_d = random_local(np.random.default_rng(13), chain3)
        completed = complete_from_downstream(chain3, x_d)
        # subsystem 3 knows both upstream states exactly
        assert np.isclose(completed[0, 2], x_d[0, 0])
        assert np.isclose(completed[1, 2], x_d[1, 1])

    def test_support_violation_rejected(self, chain3):
        bad = np.ones((3, 3))
        with pytest.raises(ContractError):
            complete_from_downstream(chain3, bad)

    def test_projection_recovers_free_part(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            p = random_poset(rng, 7)
            x_d = random_local(rng, p)
            completed = complete_from_downstream(p, x_d)
            assert np.allclose(project_d(p, completed), x_d, atol=1e-12)
            # the defining identity: free part plus reconstructed remainder
            assert np.allclose(
                x_d + project_uo(p, completed), completed, atol=1e-12
            )

    def test_completed_differences_vanish_off_pattern(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            p = random_poset(rng, 7)
            x_d = random_local(rng, p)
            completed = complete_from_downstream(p, x_d)
            diffs = mu_local(p, completed)
            assert is_member(p, diffs)
            # even before projecting, the transform of a completed variable
            # has no upstream or offstream components: no improvement where
            # the state is already known or carries no shared information
            raw = completed @ np.linalg.inv(zeta_matrix(p)).T
            assert np.abs(project_uo(p, raw)).max() < 1e-10
