import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiral_reservoir.chiral import chiral_residual, predicted_steady_moments, purity_deviation
from chiral_reservoir.exemplars import fourfold_exemplar, fourfold_sigma, herald_hamiltonian, herald_sigma
from chiral_reservoir.model import GaussianMoments, Hamiltonian, SqueezeParams
from chiral_reservoir.oracle import (IntegrationError, MomentGenerator, NonRelaxingError, distance_trace,
                                     evolve, generator, moment_distance, propagate, relaxation_time,
                                     steady_moments, trace_csv, trajectory)
from chiral_reservoir.spectral import dark_mode_metrics, fourfold_family

SQ = SqueezeParams(0.5, 0.3, 1.0)


def exemplars():
    return [("fourfold", fourfold_exemplar(), fourfold_sigma(2)),
            ("herald", herald_hamiltonian(4, 2.5), herald_sigma(4))]


def random_moments(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return GaussianMoments(a @ a.conj().T, b + b.T)


class TestGenerator:
    def test_drift(self):
        gen = generator(Hamiltonian([[1.0, 2.0], [2.0, -1.0]]), 1, SqueezeParams(0.2, 0.0, 3.0))
        assert np.allclose(gen.drift, [[1j, 2j], [2j, -1j + 1.5]])

    def test_sources(self):
        gen = generator(Hamiltonian(np.zeros((2, 2))), 0, SqueezeParams(0.4, 0.7, 2.0))
        assert gen.normal_source[0, 0] == pytest.approx(2 * np.sinh(0.4) ** 2)
        assert gen.anomalous_source[0, 0] == pytest.approx(2 * np.exp(0.7j) * np.sinh(0.4) * np.cosh(0.4))
        assert np.count_nonzero(gen.normal_source) == 1

    def test_bad_drain(self):
        with pytest.raises(ValueError, match="out of range"):
            MomentGenerator(Hamiltonian(np.zeros((2, 2))), 2, SQ)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_preserves_structure(self, seed, n):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        gen = generator(Hamiltonian(a + a.conj().T), int(rng.integers(n)), SQ)
        dn, dm = gen(random_moments(rng, n))
        assert np.max(np.abs(dn - dn.conj().T)) <= 1e-10
        assert np.max(np.abs(dm - dm.T)) <= 1e-10

    def test_single_site_fixed_point(self):
        # one mode coupled to the reservoir relaxes to the reservoir's own moments
        sq = SqueezeParams(0.5, 0.3, 1.7)
        g = steady_moments(generator(Hamiltonian([[0.4]]), 0, sq))
        assert g.normal[0, 0].real == pytest.approx(np.sinh(0.5) ** 2, abs=1e-12)
        # a detuned drain rotates the anomalous moment: M = Q / (gamma + 2 i w)
        expected = 1.7 * np.exp(0.3j) * np.sinh(0.5) * np.cosh(0.5) / (1.7 + 0.8j)
        assert g.anomalous[0, 0] == pytest.approx(expected, abs=1e-12)

    def test_zero_squeezing_vacuum(self):
        H, sigma = fourfold_exemplar(), fourfold_sigma(2)
        g = steady_moments(generator(H, sigma.drain, SqueezeParams(0.0, 0.3, 1.0)))
        assert moment_distance(g, GaussianMoments.vacuum(H.dim)) <= 1e-12


class TestSteadyState:
    @pytest.mark.parametrize("name,H,sigma", exemplars())
    def test_matches_prediction(self, name, H, sigma):
        gen = generator(H, sigma.drain, SQ)
        g = steady_moments(gen)
        assert gen.residual(g) <= 1e-10
        assert moment_distance(g, predicted_steady_moments(sigma, SQ)) <= 1e-8
        assert purity_deviation(g) <= 1e-8

    @pytest.mark.parametrize("r,phi,gamma", [(0.1, 0.0, 1.0), (0.8, -2.0, 0.5), (0.3, 1.0, 4.0)])
    def test_other_reservoirs(self, r, phi, gamma):
        sq = SqueezeParams(r, phi, gamma)
        sigma = herald_sigma(2)
        g = steady_moments(generator(herald_hamiltonian(2, 1.3), sigma.drain, sq))
        assert moment_distance(g, predicted_steady_moments(sigma, sq)) <= 1e-8

    def test_detectability(self):
        # a 0.1J potential on one site breaks the symmetry and visibly moves the steady state
        H, sigma = fourfold_exemplar(), fourfold_sigma(2)
        bump = np.zeros((H.dim, H.dim))
        bump[sigma.drain + 1, sigma.drain + 1] = 0.1
        perturbed = Hamiltonian(H.entries + bump)
        assert chiral_residual(perturbed, sigma) == pytest.approx(0.1, abs=1e-12)
        g = steady_moments(generator(perturbed, sigma.drain, SQ))
        assert moment_distance(g, predicted_steady_moments(sigma, SQ)) >= 1e-3

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_non_chiral_perturbation_detected(self, seed):
        rng = np.random.default_rng(seed)
        H, sigma = herald_hamiltonian(2, 2.5), herald_sigma(2)
        a = rng.normal(size=(5, 5))
        pert = a + a.T
        pert *= 0.1 / np.max(np.abs(pert))
        perturbed = Hamiltonian(H.entries + pert)
        if chiral_residual(perturbed, sigma) < 0.05:
            return
        g = steady_moments(generator(perturbed, sigma.drain, SQ))
        assert moment_distance(g, predicted_steady_moments(sigma, SQ)) >= 1e-3

    def test_decoupled_drain_non_relaxing(self):
        # site 2 has no bond to the drain or its neighbour: a dark mode
        H = Hamiltonian([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.5]])
        with pytest.raises(NonRelaxingError, match="non-relaxing"):
            steady_moments(generator(H, 0, SQ))

    def test_isolated_drain_non_relaxing(self):
        H = Hamiltonian(np.diag([0.0, 1.0]))
        with pytest.raises(NonRelaxingError) as info:
            steady_moments(generator(H, 0, SQ))
        assert info.value.smallest <= 1e-12


class TestDynamics:
    def test_zero_time(self):
        gen = generator(herald_hamiltonian(1, 0.7), 1, SQ)
        g0 = GaussianMoments.vacuum(3)
        assert moment_distance(evolve(g0, gen, 0.0), g0) == 0.0

    def test_negative_time(self):
        gen = generator(herald_hamiltonian(1, 0.7), 1, SQ)
        with pytest.raises(ValueError):
            evolve(GaussianMoments.vacuum(3), gen, -1.0)
        with pytest.raises(ValueError):
            trajectory(GaussianMoments.vacuum(3), gen, [0.0, 2.0, 1.0])

    def test_dimension_mismatch(self):
        gen = generator(herald_hamiltonian(1, 0.7), 1, SQ)
        with pytest.raises(ValueError, match="dimension"):
            evolve(GaussianMoments.vacuum(2), gen, 1.0)

    def test_single_site_closed_form(self):
        # N(t) = sinh^2 r (1 - e^{-gamma t}) from vacuum for an undetuned drain
        sq = SqueezeParams(0.4, 0.0, 2.0)
        gen = generator(Hamiltonian([[0.0]]), 0, sq)
        for t in (0.1, 0.5, 2.0):
            g = evolve(GaussianMoments.vacuum(1), gen, t)
            assert g.normal[0, 0].real == pytest.approx(np.sinh(0.4) ** 2 * (1 - np.exp(-2.0 * t)), abs=1e-10)
            assert g.anomalous[0, 0].real == pytest.approx(
                np.sinh(0.4) * np.cosh(0.4) * (1 - np.exp(-2.0 * t)), abs=1e-10)

    @pytest.mark.parametrize("name,H,sigma", exemplars())
    def test_runge_kutta_matches_closed_form(self, name, H, sigma):
        gen = generator(H, sigma.drain, SQ)
        g0 = GaussianMoments.vacuum(H.dim)
        for t in (0.5, 7.0, 60.0):
            assert moment_distance(evolve(g0, gen, t), propagate(g0, gen, t)) <= 1e-8

    def test_semigroup(self):
        rng = np.random.default_rng(3)
        gen = generator(herald_hamiltonian(2, 1.0), 2, SQ)
        g0 = random_moments(rng, 5)
        once = evolve(g0, gen, 3.0)
        twice = evolve(evolve(g0, gen, 1.2), gen, 1.8)
        assert moment_distance(once, twice) <= 1e-8

    def test_fixed_point_is_stationary(self):
        H, sigma = herald_hamiltonian(4, 2.5), herald_sigma(4)
        gen = generator(H, sigma.drain, SQ)
        ss = steady_moments(gen)
        assert moment_distance(evolve(ss, gen, 10.0), ss) <= 1e-9

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blowup_reported(self):
        # negative gamma turns decay into gain; the integrator gives up with a diagnosis
        sq = SqueezeParams(0.5, 0.0, 1.0)
        object.__setattr__(sq, "gamma", -400.0)  # bypass validation on purpose
        gen = MomentGenerator(Hamiltonian([[0.0]]), 0, sq)
        with pytest.raises(IntegrationError, match="decay rates"):
            evolve(GaussianMoments.vacuum(1), gen, 10.0, rtol=1e-10, atol=1e-300)


class TestRelaxation:
    @pytest.mark.parametrize("name,H,sigma", exemplars())
    def test_finite(self, name, H, sigma):
        gen = generator(H, sigma.drain, SQ)
        t = relaxation_time(gen, 1e-6)
        assert np.isfinite(t) and t > 0
        g0 = GaussianMoments.vacuum(H.dim)
        ss = steady_moments(gen)
        assert moment_distance(propagate(g0, gen, t), ss) <= 1e-6
        assert moment_distance(propagate(g0, gen, 0.999 * t), ss) > 1e-6 * 0.999

    def test_herald_runge_kutta_confirms(self):
        H, sigma = herald_hamiltonian(4, 2.5), herald_sigma(4)
        gen = generator(H, sigma.drain, SQ)
        t = relaxation_time(gen, 1e-6)
        g = evolve(GaussianMoments.vacuum(H.dim), gen, t)
        assert moment_distance(g, steady_moments(gen)) <= 1.01e-6

    def test_starts_converged(self):
        gen = generator(herald_hamiltonian(1, 0.7), 1, SQ)
        assert relaxation_time(gen, g0=steady_moments(gen)) == 0.0

    def test_gives_up(self):
        gen = generator(herald_hamiltonian(4, 2.5), 0, SQ)
        assert relaxation_time(gen, 1e-6, t_max=1.0) == np.inf

    def test_slower_when_drain_weight_is_smaller(self):
        fam = fourfold_family("alternating")
        rows = []
        for v in (0.25, 0.5, 1.0):
            H = fam.build(v)
            weight = dark_mode_metrics(H, fam.drain).min_drain_weight
            rows.append((weight, relaxation_time(generator(H, fam.drain, SQ), 1e-6)))
        rows.sort(reverse=True)
        times = [t for _, t in rows]
        assert times == sorted(times)
        assert len(set(times)) == 3


class TestTrace:
    def test_csv(self):
        H, sigma = herald_hamiltonian(1, 0.7), herald_sigma(1)
        gen = generator(H, sigma.drain, SQ)
        rows = distance_trace(GaussianMoments.vacuum(3), gen, np.linspace(0, 5, 6),
                              predicted_steady_moments(sigma, SQ))
        text = trace_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "t,max_distance_to_prediction,purity_deviation"
        assert len(lines) == 7
        assert lines[1].startswith("0,")
        assert rows[0].purity == 0.0
        assert rows[-1].distance < rows[0].distance


class TestDistance:
    def test_identical(self):
        g = random_moments(np.random.default_rng(0), 3)
        assert moment_distance(g, g) == 0.0

    def test_thermal(self):
        n = np.sinh(0.5) ** 2
        assert moment_distance(GaussianMoments.vacuum(2), GaussianMoments(n * np.eye(2))) == pytest.approx(n)

    def test_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            moment_distance(GaussianMoments.vacuum(2), GaussianMoments.vacuum(3))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_metric(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_moments(rng, 3) for _ in range(3))
        assert moment_distance(a, b) == moment_distance(b, a)
        assert moment_distance(a, c) <= moment_distance(a, b) + moment_distance(b, c) + 1e-12
