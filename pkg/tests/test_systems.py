import numpy as np
import pytest

from slowfast.errors import ConfigurationError
from slowfast.systems import (
    REGISTRY,
    build_coefficient,
    build_observable,
    build_system,
    make_d1,
    ou_cos_average,
)


class TestRegistry:
    def test_all_entries_construct_and_validate(self):
        for name in REGISTRY:
            system = build_system(name)
            assert system.check_dissipativity(0)
            assert system.check_ellipticity(1)

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            build_system("D9")

    def test_parameterised_entry(self):
        system = build_system({"name": "OU", "a": 2.0, "sigma": 0.5})
        y = np.array([[1.0]])
        assert system.f(np.zeros((1, 1)), y)[0, 0] == -2.0
        assert system.delta2(np.zeros((1, 1)), y) == 0.5

    def test_d1_averaged_drift_oracle(self):
        system = make_d1()
        x = np.array([[0.7]])
        assert system.b_bar(0.0, x)[0, 0] == pytest.approx(-0.7 + ou_cos_average())


class TestCoefficientLanguage:
    def test_matches_d1_drift(self):
        spec = {
            "terms": [
                {"coef": -1.0, "powers": {"x": 1}},
                {"coef": 1.0, "trig": "cos", "lin": {"y": 1.0, "x": -1.0}},
            ]
        }
        b = build_coefficient(spec, "b")
        ref = make_d1().b
        x = np.array([[0.3], [1.1]])
        y = np.array([[-0.4], [0.9]])
        assert np.allclose(b(0.0, x, y), ref(0.0, x, y))

    def test_piecewise_indicator(self):
        spec = {"terms": [{"coef": 2.0, "powers": {"y": 1}, "indicator": {"var": "y", "min": 0.0}}]}
        f = build_coefficient(spec, "f")
        y = np.array([[1.0], [-1.0]])
        out = f(np.zeros((2, 1)), y)
        assert out[0, 0] == 2.0 and out[1, 0] == 0.0

    def test_noise_coefficient_shape(self):
        d2 = build_coefficient({"terms": [{"coef": 1.5}]}, "delta2")
        out = d2(np.zeros((3, 1)), np.zeros((3, 1)))
        assert out.shape == (3, 1, 1) and np.all(out == 1.5)

    def test_empty_terms_rejected(self):
        with pytest.raises(ConfigurationError):
            build_coefficient({"terms": []}, "b")

    def test_inline_system_builds_and_runs(self):
        spec = {
            "b": {"terms": [{"coef": -1.0, "powers": {"x": 1}}]},
            "delta1": {"terms": [{"coef": 1.0}]},
            "f": {"terms": [{"coef": -1.0, "powers": {"y": 1}}]},
            "delta2": {"terms": [{"coef": 1.0}]},
            "alpha1": 1.5,
            "alpha2": 1.5,
            "delta1_time_only": True,
        }
        system = build_system(spec)
        from slowfast.sde_core import simulate_slow_fast

        path = simulate_slow_fast(system, 1.0, 0.0, 0.2, 0.005, 0.1, 3)
        assert np.isfinite(path.x_path).all()

    def test_missing_coefficient(self):
        with pytest.raises(ConfigurationError):
            build_system({"b": {"terms": [{"coef": 1.0}]}})


class TestObservables:
    def test_named(self):
        g = build_observable("cos")
        assert np.allclose(g(np.array([[0.0], [np.pi]])), [1.0, -1.0])

    def test_offset_and_scale(self):
        g = build_observable({"name": "cos", "offset": -0.5, "scale": 2.0})
        assert g(np.array([[0.0]]))[0] == pytest.approx(0.5)

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            build_observable("sinh")
