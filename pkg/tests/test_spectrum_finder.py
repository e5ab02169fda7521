"""Tests for contour-based zero search and the spectral separation check.

Synthetic analytic handles pin down winding counts, multiplicity reporting,
and residual polishing.  Problem-level searches are checked against the
trigonometric spectra of point boundary forms.
"""

import numpy as np
import pytest

from nonlocal_sl import LinearForm, Potential, ProblemSpec
from nonlocal_sl.errors import InputError
from nonlocal_sl.spectrum_finder import SearchBox, condition_S, find_spectrum, problem_spectrum

T = np.pi


def _spec(a=None, q=None):
    form2 = LinearForm.point_value(T if a is None else a, 0)
    return ProblemSpec(
        q=q or Potential.zero(T),
        form1=LinearForm.point_value(0.0, 0),
        form2=form2,
    )


class TestSyntheticHandles:
    def test_two_simple_zeros(self):
        def f(lam):
            lam = np.asarray(lam, dtype=complex)
            return (lam - 2.0) * (lam - 7.0 - 0.5j)

        s = find_spectrum(f, SearchBox(0.0, 10.0, -2.0, 2.0))
        assert s.winding_total == 2
        assert sorted(m for _, m in s.entries) == [1, 1]
        eig = sorted(s.eigenvalues, key=lambda z: z.real)
        assert eig[0] == pytest.approx(2.0, abs=1e-8)
        assert eig[1] == pytest.approx(7.0 + 0.5j, abs=1e-8)

    def test_double_zero_reported_with_multiplicity(self):
        def f(lam):
            return (np.asarray(lam, dtype=complex) - 5.3) ** 2

        s = find_spectrum(f, SearchBox(0.0, 10.0, -2.0, 2.0))
        assert s.winding_total == 2
        assert len(s.entries) == 1
        lam0, mult = s.entries[0]
        assert mult == 2
        assert lam0 == pytest.approx(5.3, abs=1e-6)

    def test_empty_box(self):
        def f(lam):
            return np.asarray(lam, dtype=complex) - 100.0

        s = find_spectrum(f, SearchBox(0.0, 10.0, -1.0, 1.0))
        assert s.winding_total == 0 and s.entries == ()

    def test_reversed_box_rejected(self):
        with pytest.raises(InputError):
            SearchBox(5.0, 1.0, -1.0, 1.0)


class TestProblemSpectra:
    def test_dirichlet_eigenvalues(self):
        s = problem_spectrum(_spec(), "delta1", SearchBox(0.5, 30.0, -1.0, 1.0))
        assert np.allclose(s.eigenvalues, [1.0, 4.0, 9.0, 16.0, 25.0], atol=1e-8)
        assert list(s.multiplicities) == [1] * 5
        assert s.winding_total == 5

    def test_interior_point_omega(self):
        # omega reduces to sin(rho a) / rho for these forms with q = 0
        a = T / 2
        s = problem_spectrum(_spec(a), "omega", SearchBox(0.5, 40.0, -1.0, 1.0))
        assert np.allclose(s.eigenvalues, [4.0, 16.0, 36.0], atol=1e-7)

    def test_winding_conserved_under_partition(self):
        spec = _spec(q=Potential.from_cosine(T, [0.4, -0.3, 0.2]))
        whole = problem_spectrum(spec, "delta1", SearchBox(0.5, 30.0, -1.0, 1.0))
        left = problem_spectrum(spec, "delta1", SearchBox(0.5, 5.5, -1.0, 1.0))
        right = problem_spectrum(spec, "delta1", SearchBox(5.5, 30.0, -1.0, 1.0))
        assert left.winding_total + right.winding_total == whole.winding_total
        joined = np.sort(np.concatenate([left.eigenvalues, right.eigenvalues]).real)
        assert np.allclose(joined, np.sort(whole.eigenvalues.real), atol=1e-7)

    def test_real_axis_route_matches_contour_route(self):
        spec = _spec(q=Potential.from_cosine(T, [0.6, 0.25]))
        box = SearchBox(0.5, 25.0, -1.0, 1.0)
        s_contour = problem_spectrum(spec, "delta1", box)
        s_real = problem_spectrum(spec, "delta1", box, real_axis=True)
        assert len(s_real.eigenvalues) == len(s_contour.eigenvalues)
        assert np.allclose(
            np.sort(s_real.eigenvalues.real), np.sort(s_contour.eigenvalues.real), atol=1e-8
        )
        assert np.max(np.abs(s_real.eigenvalues.imag)) < 1e-10


class TestConditionS:
    def test_fails_when_zero_sets_coincide(self):
        # with form2 at the endpoint, omega and delta_1 are the same function
        rep = condition_S(_spec(), SearchBox(0.5, 12.0, -1.0, 1.0), separation_tol=1e-4)
        assert not rep.holds
        assert rep.min_gap < 1e-12
        assert rep.witness is not None
        w1, w2 = rep.witness
        assert abs(w1 - w2) < 1e-10

    def test_holds_for_incommensurate_interior_point(self):
        # omega zeros fall at (pi n / a)^2 with a = 1, away from the n^2 family
        rep = condition_S(_spec(a=1.0), SearchBox(0.5, 40.0, -1.0, 1.0), separation_tol=0.1)
        assert rep.holds
        # closest approach: pi^2 against 9
        assert rep.min_gap == pytest.approx(np.pi**2 - 9.0, rel=1e-6)
        assert rep.n_first == 2 and rep.n_second == 6

    def test_shared_subset_is_caught(self):
        # a = T/2 places every omega zero on the delta_1 lattice
        rep = condition_S(_spec(a=T / 2), SearchBox(0.5, 40.0, -1.0, 1.0), separation_tol=1e-3)
        assert not rep.holds
        assert rep.min_gap < 1e-8
