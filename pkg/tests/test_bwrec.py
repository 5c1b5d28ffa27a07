import time
from fractions import Fraction

import pytest

from anharmonic import hypalg
from anharmonic.bwrec import (CoeffKey, CoeffTable, build_table, coefficient_stats, compute_order,
                              fix_constant, initial_table, is_valid, master_rhs, verify_order)
from anharmonic.errors import ConstraintViolation, SymmetryViolation
from anharmonic.hypalg import HypExpr

F = Fraction


def first_order_forms():
    """Closed first-order coefficients, multi-angle form (sign included)."""
    ma = HypExpr.multiangle
    return {
        (2, 4): ma([(F(1, 32), 0, "sinh", 4), (F(-1, 4), 0, "sinh", 2), (F(3, 8), 1, "1", 0)],
                   mono=(-1, 0, -1), scale=-1),
        (2, 3): ma([(F(1, 8), 0, "sinh", 3), (F(9, 8), 0, "sinh", 1), (F(-3, 2), 1, "cosh", 1)],
                   m=1, mono=(-1, 0, -1), scale=-1),
        (2, 2): ma([(F(-9, 8), 0, "sinh", 2), (F(3, 2), 1, "1", 0), (F(3, 4), 1, "cosh", 2)],
                   m=2, mono=(-1, 0, -1), scale=-1),
        (2, 1): ma([(F(1, 8), 0, "sinh", 3), (F(9, 8), 0, "sinh", 1), (F(-3, 2), 1, "cosh", 1)],
                   m=3, mono=(-1, 0, -1), scale=-1),
        (2, 0): ma([(F(1, 32), 0, "sinh", 4), (F(-1, 4), 0, "sinh", 2), (F(3, 8), 1, "1", 0)],
                   m=4, mono=(-1, 0, -1), scale=-1),
        (1, 2): ma([(F(3, 16), 0, "sinh", 3), (F(27, 16), 0, "sinh", 1), (F(-9, 4), 1, "cosh", 1)],
                   m=1, mono=(0, -1, -2), scale=-1),
        (1, 1): ma([(F(-9, 4), 0, "sinh", 2), (3, 1, "1", 0), (F(3, 2), 1, "cosh", 2)],
                   m=2, mono=(0, -1, -2), scale=-1),
        (1, 0): ma([(F(3, 16), 0, "sinh", 3), (F(27, 16), 0, "sinh", 1), (F(-9, 4), 1, "cosh", 1)],
                   m=3, mono=(0, -1, -2), scale=-1),
        (0, 0): ma([(F(-9, 16), 0, "sinh", 2), (F(3, 4), 1, "1", 0), (F(3, 8), 1, "cosh", 2)],
                   m=2, mono=(1, -2, -3), scale=-1),
    }


@pytest.fixture(scope="module")
def table2():
    return build_table(2)


class TestIndexRules:
    @pytest.mark.parametrize("key,ok", [((1, 2, 4), True), ((1, 3, 0), False), ((1, 1, 3), False),
                                        ((0, 0, 0), True), ((-1, 0, 0), False), ((2, 0, -1), False)])
    def test_valid(self, key, ok):
        assert is_valid(*key) is ok

    def test_checked(self):
        with pytest.raises(ValueError):
            CoeffKey.checked(1, 3, 0)
        assert CoeffKey.checked(1, 2, 4) == (1, 2, 4)

    def test_invalid_lookup_is_zero(self, table2):
        assert table2.get(1, 3, 6).is_zero()
        assert table2.get(0, 0, 0) == HypExpr.const(1)


class TestFirstOrder:
    def test_nine_entries(self, table2):
        assert len(table2.keys_of_order(1)) == 9

    @pytest.mark.parametrize("kl", list(first_order_forms()))
    def test_closed_forms(self, table2, kl):
        k, l = kl
        assert table2[(1, k, l)] == first_order_forms()[kl]

    def test_closed_forms_satisfy_ode(self, table2):
        for (k, l), form in first_order_forms().items():
            assert hypalg.differentiate(form) == master_rhs(table2, (1, k, l))

    def test_vanish_at_zero(self, table2):
        for n in (1, 2):
            for key in table2.keys_of_order(n):
                reduced = table2[key].times_sinh(-key.l)
                coeffs = hypalg.laurent_expansion(reduced, 0)
                assert not any(coeffs), key

    def test_c44_small_tau(self, table2):
        coeffs = hypalg.laurent_expansion(table2[(1, 2, 4)].times_sinh(-4), 1)
        assert coeffs == [0] * 5 + [F(-1, 5)]


class TestFixConstant:
    def test_c44_needs_no_constant(self, table2):
        raw = hypalg.antiderivative(master_rhs(table2, (1, 2, 4)))
        assert fix_constant(raw, 4) == 0

    def test_c43_constant(self, table2):
        raw = hypalg.antiderivative(master_rhs(table2, (1, 2, 3)))
        d = fix_constant(raw, 3)
        assert d == F(-3, 2)
        assert raw.monomials() == {(-1, 0, -1)}
        assert raw + HypExpr.const(d, mono=(-1, 0, -1)) == table2[(1, 2, 3)]

    def test_l0_constant(self, table2):
        raw = hypalg.antiderivative(master_rhs(table2, (1, 0, 0)))
        d = fix_constant(raw, 0)
        fixed = raw + HypExpr.const(d, mono=next(iter(raw.monomials())))
        assert fixed == table2[(1, 0, 0)]
        assert hypalg.evaluate(fixed, 0.0) == 0.0

    def test_violation(self):
        # x^2 / sinh^4 leaves an x^-2 pole that no constant can remove
        with pytest.raises(ConstraintViolation):
            fix_constant(HypExpr.x(2), 4)


class TestStructure:
    @pytest.mark.parametrize("n,expected", [(0, (1, 1, 1)), (1, (9, 6, 3)), (3, (49, 28, 7))])
    def test_stats(self, n, expected):
        s = coefficient_stats(n)
        assert (s["total"], s["afterSymmetry"], s["integrations"]) == expected

    def test_counts_through_five(self, table5):
        for n in range(1, 6):
            assert len(table5.keys_of_order(n)) == 4 * n * n + 4 * n + 1
            assert table5.integrations[n] == coefficient_stats(n)["integrations"]

    def test_symmetry_log_and_ode(self, table5):
        for n in range(1, 6):
            verify_order(table5, n)
        assert not any(e.has_log for e in table5.entries.values())

    def test_after_symmetry_count(self, table5):
        for n in range(1, 6):
            distinct = {k for k in table5.keys_of_order(n) if k.l <= k.k}
            assert len(distinct) == coefficient_stats(n)["afterSymmetry"]

    def test_initial(self):
        t = initial_table()
        assert t[(0, 0, 0)] == HypExpr.const(1)
        assert t.max_order == 0


class TestBuild:
    def test_order_must_follow(self):
        with pytest.raises(ValueError):
            compute_order(initial_table(), 2)

    def test_rollback_on_failure(self, table2):
        broken = CoeffTable.from_json(table2.to_json())
        broken.max_order = 1
        for key in broken.keys_of_order(2):
            del broken.entries[key]
        broken.entries[CoeffKey(1, 2, 4)] = broken.entries[CoeffKey(1, 2, 4)] + HypExpr.const(1, mono=(-1, 0, -1))
        with pytest.raises((SymmetryViolation, ConstraintViolation)):
            compute_order(broken, 2)
        assert broken.max_order == 1
        assert not broken.keys_of_order(2)

    def test_deterministic(self, table2):
        assert build_table(2).dumps() == table2.dumps()

    def test_json_round_trip(self, table2):
        again = CoeffTable.from_json(table2.to_json())
        assert again.dumps() == table2.dumps()

    def test_max_order(self):
        with pytest.raises(ValueError):
            build_table(8)

    @pytest.mark.slow
    def test_order_five_time(self):
        start = time.perf_counter()
        build_table(5)
        assert time.perf_counter() - start < 300
