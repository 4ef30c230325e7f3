import json

import numpy as np
import pytest

from rqode.core import validate_holder
from rqode.fixtures import (default_fixture_entries, fixture_names,
                            get_fixture, load_fixture_file, reference_solver,
                            write_fixture_file)
from rqode.planted import make_planted
from rqode.core import HolderParams


class TestRegistry:
    def test_names_available(self):
        names = fixture_names()
        for expected in ("sin_flow", "exp_flow", "constant", "cos_time",
                         "inv1p", "inv1p_r1"):
            assert expected in names

    def test_unknown_name(self):
        with pytest.raises(KeyError, match="unknown fixture"):
            get_fixture("does_not_exist")

    def test_entry_schema(self):
        for entry in default_fixture_entries():
            for key in ("name", "d", "r", "rho", "D", "H", "a", "b", "eta"):
                assert key in entry, (entry["name"], key)
            assert len(entry["D"]) == entry["r"] + 1
            assert len(entry["eta"]) == entry["d"]

    def test_references_match_dynamics(self):
        # reference solutions satisfy z' = f(z) (finite-difference check)
        for name in ("sin_flow", "exp_flow", "cos_time", "inv1p"):
            fx = get_fixture(name)
            a, b = fx.problem.interval
            ts = np.linspace(a + 0.05, b - 0.05, 7)
            h = 1e-6
            lhs = (fx.reference(ts + h) - fx.reference(ts - h)) / (2 * h)
            rhs = np.stack([np.asarray(fx.problem.f(z))
                            for z in fx.reference(ts)])
            assert np.allclose(lhs, rhs, atol=1e-7)

    def test_classes_validate_on_solution_tube(self):
        for name in ("sin_flow", "sin_flow_r1", "exp_flow_r1", "cos_time_r1",
                     "inv1p_r1"):
            fx = get_fixture(name)
            a, b = fx.problem.interval
            states = fx.reference(np.linspace(a, b, 41))
            assert validate_holder(fx.problem, fx.params, states, tol=1e-9).passed

    def test_scalar_flags(self):
        assert get_fixture("inv1p").scalar
        assert not get_fixture("sin_flow").scalar

    def test_inv1p_endpoint(self):
        fx = get_fixture("inv1p")
        assert fx.y_star == pytest.approx(1.0, abs=1e-14)


class TestFixtureFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "fixtures.json"
        write_fixture_file(default_fixture_entries(), path)
        fixtures = load_fixture_file(path)
        assert {f.name for f in fixtures} == set(fixture_names())
        fx = [f for f in fixtures if f.name == "sin_flow"][0]
        assert fx.problem.interval == (0.0, 1.0)

    def test_planted_entry_round_trip(self, tmp_path):
        params = HolderParams(r=0, rho=1.0, D=(1.2,), H=1.0)
        pl = make_planted([0.5, -0.25], params)
        entry = pl.to_entry("planted_demo")
        path = tmp_path / "planted.json"
        write_fixture_file([entry], path)
        (fx,) = load_fixture_file(path)
        assert fx.name == "planted_demo"
        ys = np.linspace(0, 1, 17)
        assert np.allclose(fx.problem.f(ys[:, None]),
                           pl.f(ys)[:, None])
        assert fx.y_star == pl.closed_form_endpoint()

    def test_file_is_json(self, tmp_path):
        path = tmp_path / "f.json"
        write_fixture_file(default_fixture_entries(), path)
        with open(path) as fh:
            assert isinstance(json.load(fh), list)

    def test_shipped_file_in_sync(self):
        import pathlib
        import rqode
        shipped = pathlib.Path(rqode.__file__).parent / "fixtures.json"
        with open(shipped) as fh:
            assert json.load(fh) == default_fixture_entries()


class TestReferenceSolver:
    def test_matches_closed_form(self):
        fx = get_fixture("sin_flow")
        ref = reference_solver(fx.problem)
        ts = np.linspace(0, 1, 9)
        assert np.allclose(ref(ts), fx.reference(ts), atol=1e-10)

    def test_scalar_and_array_calls(self):
        fx = get_fixture("exp_flow")
        ref = reference_solver(fx.problem)
        single = ref(0.25)
        batch = ref(np.array([0.25, 0.5]))
        assert single.shape == (1,)
        assert batch.shape == (2, 1)
        assert single[0] == batch[0, 0]
