import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dpdsa.errors import ConfigError, InvalidSet, NoNoiseModel
from dpdsa.problem import (
    AdditiveNoise,
    AffineSlab,
    Ball,
    Box,
    FullSpace,
    Halfspace,
    ProblemSpec,
    QuadraticCost,
    RegressionNoise,
    SmoothCost,
    exact_gradient,
    noisy_gradient,
    problem_from_config,
    problem_to_config,
    project,
    sensor_problem,
)
from oracles.finite_diff import central_gradient
from oracles.projection import project_affine, project_ball, project_polyhedron

N_RANDOM = 1000


def random_sets(rng, m):
    lo = rng.normal(size=m) - 0.5
    box = Box(lo, lo + rng.exponential(size=m) + 0.1)
    ball = Ball(rng.normal(size=m), float(rng.exponential() + 0.2))
    hs = Halfspace(rng.normal(size=m), float(rng.normal()))
    A = rng.normal(size=(max(1, m - 1), m))
    aff = AffineSlab(A, rng.normal(size=A.shape[0]))
    return {"full": FullSpace(), "box": box, "ball": ball, "halfspace": hs, "affine": aff}


class TestProjectionExamples:
    def test_box(self):
        assert np.array_equal(project(Box([-1, -1], [1, 1]), [2, 0.5]), [1, 0.5])

    def test_ball(self):
        assert np.allclose(project(Ball([0, 0], 1.0), [3, 4]), [0.6, 0.8], atol=1e-15)

    def test_full_space(self):
        x = np.array([1.5, -2.0])
        assert np.array_equal(project(FullSpace(), x), x)

    def test_halfspace_against_dual_descent(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            m = int(rng.integers(2, 6))
            a = rng.normal(size=m)
            b = float(rng.normal())
            x = rng.normal(size=m) * 3
            got = Halfspace(a, b).project(x)
            ref = project_polyhedron(x, a[None, :], [b])
            assert np.allclose(got, ref, atol=1e-8)

    def test_box_against_dual_descent(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            m = 3
            lo = rng.normal(size=m)
            hi = lo + rng.exponential(size=m)
            x = rng.normal(size=m) * 3
            G = np.vstack([np.eye(m), -np.eye(m)])
            ref = project_polyhedron(x, G, np.concatenate([hi, -lo]))
            assert np.allclose(Box(lo, hi).project(x), ref, atol=1e-8)

    def test_ball_against_bisection(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            c = rng.normal(size=4)
            r = float(rng.exponential() + 0.1)
            x = rng.normal(size=4) * 3
            assert np.allclose(Ball(c, r).project(x), project_ball(x, c, r), atol=1e-10)

    def test_affine_against_kkt(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            A = rng.normal(size=(2, 4))
            b = rng.normal(size=2)
            x = rng.normal(size=4)
            assert np.allclose(AffineSlab(A, b).project(x), project_affine(x, A, b), atol=1e-10)


class TestSetValidation:
    def test_box_order(self):
        with pytest.raises(InvalidSet):
            Box([1.0], [0.0])

    def test_ball_radius(self):
        with pytest.raises(InvalidSet):
            Ball([0.0], 0.0)

    def test_halfspace_normal(self):
        with pytest.raises(InvalidSet):
            Halfspace([0.0, 0.0], 1.0)

    def test_affine_rank(self):
        with pytest.raises(InvalidSet):
            AffineSlab([[1.0, 1.0], [2.0, 2.0]], [0.0, 1.0])


@pytest.mark.parametrize("variant", ["full", "box", "ball", "halfspace", "affine"])
class TestProjectionProperties:
    def test_idempotent(self, variant):
        rng = np.random.default_rng(10)
        for _ in range(N_RANDOM):
            m = int(rng.integers(1, 6))
            s = random_sets(rng, m)[variant]
            p = s.project(rng.normal(size=m) * 4)
            assert np.linalg.norm(s.project(p) - p) <= 1e-12 * max(1.0, np.linalg.norm(p))

    def test_non_expansive(self, variant):
        rng = np.random.default_rng(11)
        for _ in range(N_RANDOM):
            m = int(rng.integers(1, 6))
            s = random_sets(rng, m)[variant]
            x, y = rng.normal(size=(2, m)) * 4
            assert np.linalg.norm(s.project(x) - s.project(y)) <= np.linalg.norm(x - y) + 1e-12

    def test_variational_inequality(self, variant):
        # (x - P x)^T (z - P x) <= 0 for every z in the set
        rng = np.random.default_rng(12)
        for _ in range(N_RANDOM):
            m = int(rng.integers(1, 6))
            s = random_sets(rng, m)[variant]
            x = rng.normal(size=m) * 4
            p = s.project(x)
            z = s.project(rng.normal(size=m) * 4)
            assert (x - p) @ (z - p) <= 1e-10 * max(1.0, np.linalg.norm(x) ** 2)


class TestNormalCone:
    def test_box(self):
        rng = np.random.default_rng(20)
        for _ in range(N_RANDOM):
            m = int(rng.integers(1, 6))
            lo = rng.normal(size=m)
            hi = lo + rng.exponential(size=m) + 0.1
            x = lo + rng.random(m) * (hi - lo)
            where = rng.integers(0, 3, size=m)  # 0 interior, 1 at lower, 2 at upper
            x[where == 1] = lo[where == 1]
            x[where == 2] = hi[where == 2]
            v = np.zeros(m)
            v[where == 1] = -rng.exponential(size=(where == 1).sum())
            v[where == 2] = rng.exponential(size=(where == 2).sum())
            assert np.allclose(Box(lo, hi).project(x + v), x, atol=1e-10)

    def test_ball(self):
        rng = np.random.default_rng(21)
        for _ in range(N_RANDOM):
            m = int(rng.integers(1, 6))
            c = rng.normal(size=m)
            r = float(rng.exponential() + 0.1)
            u = rng.normal(size=m)
            x = c + r * u / np.linalg.norm(u)
            v = rng.exponential() * (x - c)
            assert np.linalg.norm(Ball(c, r).project(x + v) - x) <= 1e-10 * max(1.0, np.linalg.norm(x))

    def test_halfspace(self):
        rng = np.random.default_rng(22)
        for _ in range(N_RANDOM):
            m = int(rng.integers(1, 6))
            a = rng.normal(size=m)
            b = float(rng.normal())
            y = rng.normal(size=m)
            x = y - (a @ y - b) / (a @ a) * a
            v = rng.exponential() * a
            assert np.linalg.norm(Halfspace(a, b).project(x + v) - x) <= 1e-10 * max(1.0, np.linalg.norm(x))


class TestGradients:
    def test_zero_at_center(self):
        c = QuadraticCost(np.diag([1.0, 2.0]), [1.0, -1.0])
        assert np.array_equal(exact_gradient(c, [1.0, -1.0]), [0.0, 0.0])

    def test_identity(self):
        c = QuadraticCost(np.eye(2), [0.0, 0.0])
        assert np.array_equal(exact_gradient(c, [1.0, 2.0]), [1.0, 2.0])

    def test_finite_differences_quadratic(self):
        rng = np.random.default_rng(30)
        for _ in range(20):
            B = rng.normal(size=(4, 4))
            c = QuadraticCost(B @ B.T, rng.normal(size=4))
            x = rng.normal(size=4)
            fd = central_gradient(c.value, x)
            g = c.gradient(x)
            assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))

    def test_finite_differences_smooth(self):
        w = np.array([1.0, -2.0, 0.5])
        f = lambda x: float(np.log1p(np.exp(w @ x)) + 0.5 * x @ x)  # noqa: E731
        g = lambda x: w / (1 + np.exp(-(w @ x))) + x  # noqa: E731
        cost = SmoothCost(f, g, 3, 1.0 + 0.25 * w @ w)
        rng = np.random.default_rng(31)
        for _ in range(20):
            x = rng.normal(size=3)
            fd = central_gradient(cost.value, x)
            assert np.linalg.norm(fd - cost.gradient(x)) <= 1e-5 * max(1.0, np.linalg.norm(fd))

    def test_convexity_and_lipschitz(self):
        p = sensor_problem()
        rng = np.random.default_rng(32)
        Lf = p.lipschitz
        assert Lf == pytest.approx(max(np.linalg.norm(c.matrix, 2) for c in p.costs))
        for _ in range(500):
            x, y = rng.normal(size=(2, 3)) * 5
            for c in p.costs:
                assert c.value(y) >= c.value(x) + c.gradient(x) @ (y - x) - 1e-9
                assert np.linalg.norm(c.gradient(x) - c.gradient(y)) <= Lf * np.linalg.norm(x - y) + 1e-12


@pytest.fixture(scope="module")
def draws():
    p = sensor_problem()
    rng = np.random.default_rng(40)
    out = []
    for c in p.costs:
        Z = rng.standard_normal((100_000, 4))
        out.append((c, c.noise.realize_batch(c, p.known_optimum, Z)))
    return out


class TestNoisyGradient:
    def test_no_model(self):
        with pytest.raises(NoNoiseModel):
            noisy_gradient(QuadraticCost(np.eye(2), [0.0, 0.0]), [1.0, 1.0], np.random.default_rng(0))

    def test_zero_additive_is_exact(self):
        c = QuadraticCost(np.eye(2), [1.0, 0.0], AdditiveNoise(np.zeros((2, 2))))
        x = np.array([0.3, -0.7])
        assert np.array_equal(noisy_gradient(c, x, np.random.default_rng(0)), c.gradient(x))

    def test_mean_zero_at_optimum(self, draws):
        for _, g in draws:
            se = g.std(axis=0, ddof=1) / np.sqrt(len(g))
            assert np.all(np.abs(g.mean(axis=0)) <= 3 * se + 1e-15)

    def test_covariance_at_optimum(self, draws):
        for c, g in draws:
            emp = np.cov(g, rowvar=False)
            target = 0.1 * c.matrix
            assert np.linalg.norm(emp - target) <= 0.05 * np.linalg.norm(target)

    def test_regression_formula(self):
        # g = u^T u x - d u^T with d = u . x* + e
        c = sensor_problem().costs[0]
        z = np.array([0.3, -1.2, 0.8, 0.5])
        x = np.array([0.5, 0.1, -2.0])
        u = c.factor @ z[:3]
        d = u @ c.center + np.sqrt(0.1) * z[3]
        expected = np.outer(u, u) @ x - d * u
        assert np.allclose(c.noise.realize(c, x, z), expected, atol=1e-14)


class TestSensor:
    def test_matrices(self):
        p = sensor_problem()
        assert np.array_equal(p.costs[0].matrix, np.diag([1.0, 1.0, 0.0]))
        assert np.array_equal(p.costs[1].matrix, np.diag([0.0, 1.0, 1.0]))
        assert np.array_equal(p.costs[2].matrix, np.diag([1.0, 0.0, 1.0]))
        assert np.array_equal(sum(c.matrix for c in p.costs), 2 * np.eye(3))

    def test_optimum(self):
        p = sensor_problem()
        assert p.n == 3 and p.m == 3 and p.is_unconstrained
        assert np.array_equal(p.known_optimum, [1.0, 2.0, 3.0])
        assert np.array_equal(p.gradient_stack(p.stacked_optimum()), np.zeros(9))
        assert all(c.noise.sigma2 == 0.1 for c in p.costs)

    def test_wrong_optimum_rejected(self):
        p = sensor_problem()
        with pytest.raises(ValueError):
            ProblemSpec(p.costs, p.sets, known_optimum=[0.0, 0.0, 0.0])


class TestRegressionConstant:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_bound_holds(self, seed):
        rng = np.random.default_rng(seed)
        c = sensor_problem().costs[int(rng.integers(3))]
        x = rng.normal(size=3) * rng.exponential() * 5
        d = x - c.center
        K = c.noise.state_second_moment(c)
        exact = d @ K @ d + 0.1 * np.trace(c.matrix)
        assert exact <= c.noise.second_moment_constant(c) * (1 + x @ x) + 1e-9


class TestConfig:
    def test_builtin(self):
        p = problem_from_config({"builtin": "sensors"})
        assert np.array_equal(p.known_optimum, [1.0, 2.0, 3.0])

    def test_round_trip(self):
        p = sensor_problem()
        q = problem_from_config(problem_to_config(p))
        for a, b in zip(p.costs, q.costs):
            assert np.array_equal(a.matrix, b.matrix)
            assert np.array_equal(a.center, b.center)
            assert a.noise.sigma2 == b.noise.sigma2

    def test_sets_from_config(self):
        cfg = {"m": 2, "agents": [
            {"cost": {"center": [0, 0]}, "set": {"type": "box", "lower": [-1, -1], "upper": [1, 1]}},
            {"cost": {"center": [0, 0]}, "set": {"type": "ball", "center": [0, 0], "radius": 2}},
            {"cost": {"center": [0, 0]}, "set": {"type": "halfspace", "normal": [1, 0], "offset": 1}},
            {"cost": {"center": [0, 0]}, "set": {"type": "affine", "matrix": [[1, 1]], "vector": [0]}},
        ]}
        p = problem_from_config(cfg)
        assert [type(s) for s in p.sets] == [Box, Ball, Halfspace, AffineSlab]
        q = problem_from_config(problem_to_config(p))
        assert [type(s) for s in q.sets] == [Box, Ball, Halfspace, AffineSlab]

    def test_error_paths(self):
        with pytest.raises(ConfigError) as e:
            problem_from_config({"agents": [{"cost": {"center": [0]}, "set": {"type": "ball", "center": [0]}}]})
        assert e.value.path == "problem.agents[0].set.radius"
        with pytest.raises(ConfigError) as e:
            problem_from_config({"agents": [{"cost": {"center": [0]}, "set": {"type": "box", "lower": [1], "upper": [0]}}]})
        assert e.value.path == "problem.agents[0].set"
        with pytest.raises(ConfigError) as e:
            problem_from_config({"builtin": "nope"})
        assert e.value.path == "problem.builtin"
