#!/usr/bin/env python3
"""
Unit tests for modules/funcalg.py - exact piecewise polynomials and T_g
"""

import math
import os
import sys
import unittest
from fractions import Fraction

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.errors import ContractError, RangeError
from modules.funcalg import (BVFunction, PiecewisePoly, apply_Tg, entropy_flux, exact,
                             kruzhkov_pair, stieltjes_integral)


class TestExact(unittest.TestCase):
    """Number conversion"""

    def test_float_goes_through_repr(self):
        self.assertEqual(exact(0.1), Fraction(1, 10))

    def test_string_fraction(self):
        self.assertEqual(exact('1/2'), Fraction(1, 2))

    def test_non_finite_rejected(self):
        with self.assertRaises(ValueError):
            exact(float('nan'))


class TestPiecewisePoly(unittest.TestCase):
    """Construction, evaluation and algebra"""

    def setUp(self):
        self.u = PiecewisePoly.identity(-1, 1)
        self.burgers = PiecewisePoly.polynomial([0, 0, Fraction(1, 2)], -1, 1)

    def test_continuity_is_checked_exactly(self):
        with self.assertRaises(ContractError):
            PiecewisePoly((-1, 0, 1), ((0,), (1,)))

    def test_discontinuous_when_flagged(self):
        step = PiecewisePoly((-1, 0, 1), ((0,), (1,)), continuous=False)
        # left piece wins at the breakpoint
        self.assertEqual(step.value_at(0), 0)
        self.assertEqual(step.value_at(Fraction(1, 2)), 1)
        np.testing.assert_array_equal(step(np.array([-0.5, 0.0, 0.5])), [0.0, 0.0, 1.0])

    def test_bad_breakpoints(self):
        with self.assertRaises(ValueError):
            PiecewisePoly((1, 0), ((0,),))
        with self.assertRaises(ValueError):
            PiecewisePoly((0, 1, 2), ((0,),))

    def test_degree_limit(self):
        with self.assertRaises(ValueError):
            PiecewisePoly((0, 1), ((0, 0, 0, 0, 1),))

    def test_vectorised_matches_exact(self):
        xs = np.linspace(-1, 1, 17)
        expected = [self.burgers.eval(x) for x in xs]
        np.testing.assert_allclose(self.burgers(xs), expected, rtol=0, atol=1e-15)

    def test_range_error(self):
        with self.assertRaises(RangeError):
            self.u.value_at(2)
        with self.assertRaises(RangeError):
            self.u(np.array([0.0, 1.5]))

    def test_arithmetic(self):
        square = self.u * self.u
        self.assertEqual(square.value_at(Fraction(1, 2)), Fraction(1, 4))
        self.assertEqual((square - self.burgers).value_at(1), Fraction(1, 2))
        self.assertEqual((-self.u).value_at(1), -1)
        self.assertEqual(self.u.scale(3).shift(1).value_at(1), 4)

    def test_mismatched_ranges(self):
        with self.assertRaises(ContractError):
            self.u + PiecewisePoly.identity(0, 1)

    def test_calculus(self):
        self.assertEqual(self.u.integrate(-1, 1), 0)
        self.assertEqual(self.burgers.derivative().value_at(Fraction(1, 3)), Fraction(1, 3))
        prim = self.u.antiderivative(base=0)
        self.assertEqual(prim.value_at(0), 0)
        self.assertEqual(prim.value_at(1), Fraction(1, 2))

    def test_derivative_of_kink_is_discontinuous(self):
        kink = PiecewisePoly.positive_part_identity(-1, 1)
        self.assertFalse(kink.derivative().continuous)
        self.assertTrue(self.burgers.derivative().continuous)

    def test_abs_value_splits_at_root(self):
        shifted = self.u.shift(Fraction(-1, 2)).abs_value()
        self.assertIn(Fraction(1, 2), shifted.breakpoints)
        self.assertEqual(shifted.value_at(-1), Fraction(3, 2))
        self.assertEqual(shifted.value_at(1), Fraction(1, 2))
        self.assertEqual(shifted.value_at(Fraction(1, 2)), 0)

    def test_positive_and_negative_parts(self):
        pos = self.u.positive_part()
        neg = self.u.negative_part()
        ref = PiecewisePoly.positive_part_identity(-1, 1)
        for x in (-1, Fraction(-1, 3), 0, Fraction(2, 5), 1):
            self.assertEqual(pos.value_at(x), ref.value_at(x))
            self.assertEqual(pos.value_at(x) + neg.value_at(x), x)

    def test_abs_value_of_irrational_roots(self):
        p = PiecewisePoly.polynomial([-2, 0, 1], -2, 2)
        for part in (p.abs_value(), p.positive_part(), p.negative_part()):
            self.assertTrue(part.continuous)
        a = p.abs_value()
        self.assertAlmostEqual(a.eval(0), 2.0, places=12)
        self.assertAlmostEqual(a.eval(1.5), 0.25, places=12)
        self.assertAlmostEqual(p.positive_part().eval(-1.5), 0.25, places=12)
        self.assertAlmostEqual(p.negative_part().eval(1), -1.0, places=12)

    def test_rational_roots_are_exact(self):
        p = PiecewisePoly.polynomial([Fraction(-1, 4), 0, 1], -1, 1)
        self.assertIn(Fraction(1, 2), p.split_at_roots().breakpoints)
        self.assertIn(Fraction(-1, 2), p.split_at_roots().breakpoints)
        self.assertEqual(p.abs_value().value_at(0), Fraction(1, 4))

    def test_triple_root_is_exact(self):
        A = PiecewisePoly.polynomial([Fraction(-1, 27), Fraction(1, 3), -1, 1], -1, 1)
        Q = kruzhkov_pair(PiecewisePoly.constant(0, -1, 1), A, Fraction(1, 3)).Q
        self.assertTrue(Q.continuous)
        self.assertIn(Fraction(1, 3), Q.breakpoints)
        self.assertEqual(Q.value_at(0), Fraction(1, 27))
        self.assertEqual(Q.value_at(Fraction(2, 3)), Fraction(1, 27))
        self.assertEqual(Q.value_at(Fraction(1, 3)), 0)

    def test_extreme_values(self):
        f = PiecewisePoly.polynomial([0, -1, 1], 0, 2)
        vmin, vmax = f.extreme_values()
        self.assertAlmostEqual(vmin, -0.25)
        self.assertAlmostEqual(vmax, 2.0)
        self.assertAlmostEqual(f.max_abs(0, 1), 0.25)

    def test_refine_keeps_function(self):
        refined = self.burgers.refine([Fraction(1, 3), 5])
        self.assertEqual(len(refined.breakpoints), 3)
        self.assertEqual(refined.value_at(Fraction(1, 2)), Fraction(1, 8))

    def test_records_and_yaml(self):
        kink = PiecewisePoly.positive_part_identity(-1, 1)
        records = kink.to_records()
        self.assertEqual(records[1], {'start': '0', 'end': '1', 'coefficients': ['0', '1']})
        self.assertEqual(PiecewisePoly.loads(kink.dumps()), kink)

    def test_from_records_gap(self):
        with self.assertRaises(ValueError):
            PiecewisePoly.from_records([
                {'start': -1, 'end': 0, 'coefficients': [0]},
                {'start': '1/2', 'end': 1, 'coefficients': [0]},
            ])


class TestBVFunction(unittest.TestCase):
    """Jump functions"""

    def test_sign_limits(self):
        g = BVFunction.sign(0, -1, 1)
        self.assertEqual(g.left_limit(0), -1)
        self.assertEqual(g.right_limit(0), 1)
        self.assertEqual(g.total_variation(), 2.0)

    def test_smooth_variation(self):
        g = BVFunction.from_smooth(PiecewisePoly.polynomial([0, 0, 1], -1, 1))
        self.assertAlmostEqual(g.total_variation(), 2.0)

    def test_jump_outside_range(self):
        with self.assertRaises(RangeError):
            BVFunction.heaviside(2, -1, 1)

    def test_smooth_part_must_be_continuous(self):
        step = PiecewisePoly((-1, 0, 1), ((0,), (1,)), continuous=False)
        with self.assertRaises(ContractError):
            BVFunction(step)


class TestStieltjes(unittest.TestCase):
    """Integrals against BV functions and T_g"""

    def setUp(self):
        self.u = PiecewisePoly.identity(-1, 1)
        self.phi = PiecewisePoly.polynomial([0, 0, Fraction(1, 2)], -1, 1)

    def test_smooth_integrator(self):
        one = PiecewisePoly.constant(1, -1, 1)
        g = BVFunction.from_smooth(self.u)
        self.assertAlmostEqual(stieltjes_integral(one, g, Fraction(1, 2)), 0.5)
        self.assertAlmostEqual(stieltjes_integral(one, g, Fraction(-1, 2)), -0.5)

    def test_jump_integrator(self):
        self.assertAlmostEqual(stieltjes_integral(self.u, BVFunction.heaviside(Fraction(1, 4), -1, 1), '1/2'), 0.25)
        self.assertAlmostEqual(stieltjes_integral(self.u, BVFunction.heaviside(Fraction(-1, 4), -1, 1), '-1/2'),
                               0.25)
        self.assertEqual(stieltjes_integral(self.u, BVFunction.heaviside(0, -1, 1), 0), 0.0)

    def test_tg_with_constant_multiplier(self):
        g = BVFunction.from_smooth(PiecewisePoly.constant(1, -1, 1))
        t = apply_Tg(g, self.phi)
        for x in (-1, Fraction(-1, 3), 0, 1):
            self.assertEqual(t.value_at(x), self.phi.value_at(x))

    def test_tg_result_is_continuous(self):
        t = apply_Tg(BVFunction.sign(Fraction(1, 2), -1, 1), self.phi)
        self.assertTrue(t.continuous)
        self.assertEqual(t.value_at(0), 0)

    def test_tg_rejects_discontinuous_f(self):
        step = PiecewisePoly((-1, 0, 1), ((0,), (1,)), continuous=False)
        with self.assertRaises(ContractError):
            apply_Tg(BVFunction.sign(0, -1, 1), step)

    def test_entropy_flux_is_kruzhkov_flux(self):
        for k in (0, Fraction(1, 2), Fraction(-3, 4)):
            q = kruzhkov_pair(self.phi, PiecewisePoly.constant(0, -1, 1), k).q
            expected = q.shift(-q.value_at(0))
            flux = entropy_flux(self.phi, k)
            for x in (-1, Fraction(-1, 2), 0, Fraction(1, 3), Fraction(3, 5), 1):
                self.assertEqual(flux.value_at(x), expected.value_at(x), msg=f"k={k}, u={x}")

    def test_burgers_flux_at_zero(self):
        flux = entropy_flux(self.phi, 0)
        self.assertEqual(flux.value_at(Fraction(1, 2)), Fraction(1, 8))
        self.assertEqual(flux.value_at(Fraction(-1, 2)), Fraction(-1, 8))


def random_continuous(rng, lo=-1, hi=1):
    """Continuous piecewise quadratic with random dyadic data, vanishing at 0"""
    cuts = sorted({Fraction(int(c), 8) for c in rng.integers(-7, 8, size=3)})
    bps = (Fraction(lo),) + tuple(cuts) + (Fraction(hi),)
    slopes = tuple(tuple(Fraction(int(c), 4) for c in rng.integers(-4, 5, size=2))
                   for _ in range(len(bps) - 1))
    return PiecewisePoly(bps, slopes, False, 1).antiderivative(base=0)


def random_bv(rng, lo=-1, hi=1):
    locs = sorted({Fraction(int(c), 8) for c in rng.integers(-7, 8, size=int(rng.integers(0, 3)))})
    jumps = tuple((loc, Fraction(int(rng.integers(-4, 5)), 4)) for loc in locs)
    return BVFunction(random_continuous(rng, lo, hi), jumps)


def partition_sum(f, g, a, b, n=2 ** 18):
    """Midpoint Riemann-Stieltjes sum of f dg over [a, b), jumps at their location"""
    nodes = np.linspace(float(a), float(b), n + 1)
    mids = 0.5 * (nodes[1:] + nodes[:-1])
    smooth = float(np.sum(f(mids) * np.diff(g.smooth(nodes))))
    return smooth + sum(float(f.value_at(loc) * s) for loc, s in g.jumps if a <= loc < b)


class TestRandomIdentities(unittest.TestCase):
    """Identities of T_g and the Stieltjes integral on random data"""

    def setUp(self):
        self.rng = np.random.default_rng(20261017)
        self.grid = [Fraction(k, 16) for k in range(-16, 17)]

    def test_entropy_flux_matches_kruzhkov_flux(self):
        for trial in range(20):
            f = random_continuous(self.rng)
            k = Fraction(int(self.rng.integers(-8, 9)), 8)
            fk = f.value_at(k)

            def q(u):
                s = (u > k) - (u < k)
                return s * (f.value_at(u) - fk)

            flux = entropy_flux(f, k)
            for u in self.grid:
                self.assertEqual(flux.value_at(u), q(u) - q(0), msg=f"trial {trial}, k={k}, u={u}")

    def test_tg_is_linear(self):
        for trial in range(20):
            g = random_bv(self.rng)
            f1, f2 = random_continuous(self.rng), random_continuous(self.rng)
            c = Fraction(int(self.rng.integers(-5, 6)), 3)
            both = apply_Tg(g, f1 + f2.scale(c))
            t1, t2 = apply_Tg(g, f1), apply_Tg(g, f2)
            for u in self.grid:
                self.assertEqual(both.value_at(u), t1.value_at(u) + c * t2.value_at(u),
                                 msg=f"trial {trial}, u={u}")

    def test_tg_derivative_is_g_times_f_prime(self):
        for trial in range(20):
            f_coeffs = [int(x) for x in self.rng.integers(-4, 5, size=2)]
            f_coeffs.append(int(self.rng.choice([-3, -2, -1, 1, 2, 3])))
            g_coeffs = [int(self.rng.integers(-4, 5)), int(self.rng.choice([-2, -1, 1, 2]))]
            f = PiecewisePoly.polynomial([Fraction(c, 4) for c in f_coeffs], -1, 1)
            g = PiecewisePoly.polynomial([Fraction(c, 2) for c in g_coeffs], -1, 1)
            t = apply_Tg(BVFunction.from_smooth(g), f)
            df = f.derivative()
            u0 = Fraction(int(self.rng.integers(-4, 5)), 8)

            def error(h):
                central = (t.value_at(u0 + h) - t.value_at(u0 - h)) / (2 * h)
                return abs(central - g.value_at(u0) * df.value_at(u0))

            coarse, fine = error(Fraction(1, 8)), error(Fraction(1, 16))
            self.assertGreater(fine, 0)
            self.assertGreaterEqual(math.log2(coarse / fine), 1.9, msg=f"trial {trial}")

    def test_stieltjes_matches_partition_sums(self):
        for trial in range(20):
            f, g = random_continuous(self.rng), random_bv(self.rng)
            u = Fraction(int(self.rng.integers(1, 9)), 8)
            self.assertAlmostEqual(stieltjes_integral(f, g, u), partition_sum(f, g, 0, u),
                                   delta=1e-10, msg=f"trial {trial}")
            self.assertAlmostEqual(stieltjes_integral(f, g, -u), -partition_sum(f, g, -u, 0),
                                   delta=1e-10, msg=f"trial {trial}")

    def test_stieltjes_is_additive(self):
        for trial in range(20):
            f, g = random_continuous(self.rng), random_bv(self.rng)
            a = Fraction(int(self.rng.integers(1, 4)), 8)
            b = a + Fraction(int(self.rng.integers(1, 5)), 8)
            whole = stieltjes_integral(f, g, b)
            self.assertAlmostEqual(whole, stieltjes_integral(f, g, a) + partition_sum(f, g, a, b),
                                   delta=1e-10, msg=f"trial {trial}")


class TestKruzhkovPair(unittest.TestCase):
    """eta, q and Q for the presets"""

    def test_stefan_diffusion_part(self):
        phi = PiecewisePoly.constant(0, -1, 1)
        A = PiecewisePoly.positive_part_identity(-1, 1)
        eta, q, Q = kruzhkov_pair(phi, A, 0)
        self.assertEqual(eta.value_at(-1), 1)
        self.assertEqual(q.value_at(Fraction(1, 2)), 0)
        self.assertEqual(Q.value_at(Fraction(-1, 2)), 0)
        self.assertEqual(Q.value_at(Fraction(1, 2)), Fraction(1, 2))

    def test_k_outside_range(self):
        phi = PiecewisePoly.identity(-1, 1)
        with self.assertRaises(RangeError):
            kruzhkov_pair(phi, phi, 2)


if __name__ == '__main__':
    unittest.main()
