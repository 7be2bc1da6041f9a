import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevinlab import benchmarks
from langevinlab.objectives import (
    certify,
    make_cosine,
    make_quadratic,
    objective_from_json,
    objective_to_json,
    with_gradient_bound,
)


class TestQuadraticFamily:
    def test_value_two_anchors(self):
        obj = make_quadratic([[-1.0], [1.0]])
        assert obj.value([0.0]) == 0.5

    def test_full_gradient_symmetric_anchors(self):
        obj = make_quadratic([[-1.0], [1.0]])
        assert obj.full_gradient([0.0]) == pytest.approx(0.0)

    def test_component_gradient(self):
        obj = make_quadratic([[-2.0], [-1.0], [1.0], [2.0]])
        # third component anchors at +1, so its gradient at 0 is -1
        assert obj.component_gradient(2, [0.0])[0] == -1.0

    def test_single_zero_anchor(self):
        obj = make_quadratic([[0.0]])
        assert obj.value([0.0]) == 0.0

    def test_full_gradient_centered(self):
        obj = make_quadratic([[-2.0], [-1.0], [1.0], [2.0]])
        assert obj.full_gradient([3.0])[0] == pytest.approx(3.0)

    def test_certificate_constants(self):
        obj = make_quadratic([[-1.0], [1.0]])
        cert = obj.certificate
        assert cert.smoothness == 1.0
        assert cert.dissipativity_slope == 0.5
        assert cert.dissipativity_offset == 1.0
        assert cert.gradient_bound == 1.0

    def test_errors(self):
        with pytest.raises(ValueError):
            make_quadratic(np.empty((0, 2)))
        with pytest.raises(ValueError):
            make_quadratic([[1.0, 2.0], [3.0]])
        obj = make_quadratic([[0.0, 0.0]])
        with pytest.raises(ValueError):
            obj.value([1.0])
        with pytest.raises(IndexError):
            obj.component_gradient(1, [0.0, 0.0])


class TestCosineFamily:
    def test_zero_amplitude_is_quadratic(self):
        obj = make_cosine(1.0, 0.0, [[3.0, -1.0]], [[0.0, 0.0]])
        grad = obj.full_gradient([1.0, 0.0])
        assert grad == pytest.approx([1.0, 0.0])

    def test_negative_curvature_at_origin(self, cos1d):
        h = 1e-4
        second = (cos1d.value([h]) - 2 * cos1d.value([0.0]) + cos1d.value([-h])) / h**2
        assert second == pytest.approx(-1.0, abs=1e-3)

    def test_certificate_constants(self, cos1d):
        cert = cos1d.certificate
        assert cert.smoothness == 3.0
        assert cert.dissipativity_slope == 0.5
        assert cert.dissipativity_offset == 0.5

    def test_value_at_origin(self, cos1d):
        assert cos1d.value([0.0]) == 0.5

    def test_component_gradient_hand_value(self, cos1d):
        got = cos1d.component_gradient(0, [math.pi / 4])[0]
        assert got == pytest.approx(math.pi / 4 - 1.0, rel=1e-12)

    def test_zero_amplitude_component_gradient(self):
        tilts = [[0.5, -0.5], [1.0, 2.0]]
        obj = make_cosine(2.0, 0.0, [[1.0, 0.0], [0.0, 1.0]], tilts)
        x = np.array([0.3, -0.7])
        for i in range(2):
            assert obj.component_gradient(i, x) == pytest.approx(2.0 * x + np.array(tilts[i]))

    def test_errors(self):
        with pytest.raises(ValueError):
            make_cosine(0.0, 0.5, [[1.0]], [[0.0]])
        with pytest.raises(ValueError):
            make_cosine(1.0, -0.1, [[1.0]], [[0.0]])
        with pytest.raises(ValueError):
            make_cosine(1.0, 0.5, [[1.0, 0.0]], [[0.0]])


class TestGradientConsistency:
    @pytest.mark.parametrize("family", ["quadratic", "cosine"])
    def test_finite_differences(self, family, rng):
        obj = benchmarks.random_instance(family, n=5, dim=3, seed=7)
        h = 1e-5
        for _ in range(100):
            x = rng.normal(scale=2.0, size=3)
            i = int(rng.integers(obj.n))
            grad = obj.component_gradient(i, x)
            fd = np.empty(3)
            for axis in range(3):
                e = np.zeros(3)
                e[axis] = h
                fd[axis] = (obj.component_value(i, x + e) - obj.component_value(i, x - e)) / (2 * h)
            scale = max(1.0, float(np.linalg.norm(grad)))
            assert np.linalg.norm(fd - grad) / scale <= 1e-5

    @pytest.mark.parametrize("family", ["quadratic", "cosine"])
    def test_full_gradient_is_component_mean(self, family, rng):
        obj = benchmarks.random_instance(family, n=6, dim=2, seed=3)
        for _ in range(20):
            x = rng.normal(size=2)
            stacked = np.stack([obj.component_gradient(i, x) for i in range(obj.n)])
            assert np.array_equal(obj.full_gradient(x), stacked.mean(axis=0))

    def test_value_is_component_mean(self, rng):
        obj = benchmarks.random_instance("cosine", n=7, dim=2, seed=5)
        x = rng.normal(size=2)
        vals = np.array([obj.component_value(i, x) for i in range(obj.n)])
        assert obj.value(x) == float(np.mean(vals))

    def test_value_many_matches_value(self, cos2d, rng):
        pts = rng.normal(size=(50, 2))
        many = cos2d.value_many(pts)
        single = np.array([cos2d.value(p) for p in pts])
        assert np.allclose(many, single, rtol=1e-12, atol=1e-12)


class TestCertify:
    def test_quadratic_certifies_clean(self, quad1d):
        report = certify(quad1d, samples=500, rng=0)
        assert report.ok
        assert report.max_smoothness_ratio <= 1.0 + 1e-9

    def test_cosine_certifies_clean(self, cos1d):
        report = certify(cos1d, radius=10.0, samples=10_000, rng=0)
        assert report.ok

    def test_cos2d_certifies_clean(self, cos2d):
        report = certify(cos2d, samples=4000, rng=0)
        assert report.ok

    def test_uncentered_quadratic_certifies_clean(self):
        # anchors far from the origin exercise the gradient-bound intercept
        report = certify(make_quadratic([[1.0], [2.0]]), samples=2000, rng=0)
        assert report.ok

    def test_halved_smoothness_is_caught(self, cos1d):
        bad_cert = replace(cos1d.certificate, smoothness=cos1d.certificate.smoothness / 2)
        bad = make_cosine(1.0, 0.5, [[2.0]], [[0.0]])
        bad = type(bad)(1.0, 0.5, [[2.0]], [[0.0]], certificate=bad_cert)
        report = certify(bad, radius=10.0, samples=5000, rng=0)
        assert report.smoothness_violations >= 1
        assert not report.ok

    def test_samples_must_be_positive(self, quad1d):
        with pytest.raises(ValueError):
            certify(quad1d, samples=0)


class TestNonconvexityWitness:
    @pytest.mark.parametrize("name", ["cos1d", "cos2d"])
    def test_negative_second_difference_along_some_frequency(self, name, request):
        obj = request.getfixturevalue(name)
        cert = obj.certificate
        assert obj.amplitude * np.max(np.linalg.norm(obj.frequencies, axis=1)) ** 2 > obj.curvature
        h = 1e-4
        found = False
        for w in obj.frequencies:
            direction = w / np.linalg.norm(w)
            for t in np.linspace(-2.0, 2.0, 41):
                x = t * direction
                second = (
                    obj.value(x + h * direction)
                    - 2 * obj.value(x)
                    + obj.value(x - h * direction)
                ) / h**2
                if second < 0:
                    found = True
                    break
            if found:
                break
        assert found

    def test_witness_uses_component_curvature(self, cos1d):
        # single component: curvature along w at the origin is 1 - 0.5*4 = -1
        h = 1e-4
        second = (
            cos1d.component_value(0, [h]) - 2 * cos1d.component_value(0, [0.0])
            + cos1d.component_value(0, [-h])
        ) / h**2
        assert second == pytest.approx(-1.0, abs=1e-3)


class TestSerialization:
    @pytest.mark.parametrize("family", ["quadratic", "cosine"])
    def test_round_trip_is_value_exact(self, family, rng):
        obj = benchmarks.random_instance(family, n=4, dim=2, seed=11)
        clone = objective_from_json(objective_to_json(obj))
        assert clone.family == obj.family
        assert clone.n == obj.n and clone.dim == obj.dim
        assert clone.certificate == obj.certificate
        for _ in range(10):
            x = rng.normal(size=2)
            assert clone.value(x) == obj.value(x)
            assert np.array_equal(clone.full_gradient(x), obj.full_gradient(x))

    def test_round_trip_twice_is_stable(self, cos2d):
        once = objective_to_json(cos2d)
        twice = objective_to_json(objective_from_json(once))
        assert once == twice

    def test_declared_shape_mismatch_rejected(self, quad1d):
        data = json.loads(objective_to_json(quad1d))
        data["dim"] = 3
        with pytest.raises(ValueError):
            objective_from_json(json.dumps(data))

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            objective_from_json(json.dumps({"family": "cubic", "parameters": {}}))

    def test_gradient_bound_replacement(self, cos1d):
        updated = with_gradient_bound(cos1d, 3.0)
        assert updated.certificate.gradient_bound == 3.0
        assert updated.certificate.smoothness == cos1d.certificate.smoothness
        assert updated.value([0.0]) == cos1d.value([0.0])


class TestImmutability:
    def test_parameter_arrays_are_read_only(self, quad1d, cos1d):
        with pytest.raises(ValueError):
            quad1d.anchors[0, 0] = 9.9
        with pytest.raises(ValueError):
            cos1d.frequencies[0, 0] = 9.9

    def test_concurrent_gradient_calls(self, cos2d, rng):
        points = rng.normal(size=(64, 2))
        serial = [cos2d.full_gradient(p) for p in points]
        with ThreadPoolExecutor(max_workers=8) as pool:
            threaded = list(pool.map(cos2d.full_gradient, points))
        for a, b in zip(serial, threaded):
            assert np.array_equal(a, b)


@settings(max_examples=25, deadline=None)
@given(
    anchors=st.lists(
        st.lists(st.floats(-5, 5), min_size=2, max_size=2),
        min_size=1,
        max_size=6,
    )
)
def test_random_quadratics_always_certify(anchors):
    obj = make_quadratic(np.asarray(anchors))
    report = certify(obj, samples=200, rng=0)
    assert report.ok
