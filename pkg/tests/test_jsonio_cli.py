"""Serialization round trips and the CLI contract (schemas, exit codes, determinism)."""

import json

import numpy as np
import pytest

from cprank import (
    AlgebraElement,
    FiniteDimAlgebra,
    build_cp_approx,
    circle_grid,
    interval_grid,
)
from cprank import jsonio
from cprank.cli import main

from conftest import (
    interval_chain_cover,
    matrix_path_approximation,
    rand_cp_contraction,
    rand_order_zero,
    three_arcs_cover,
)


class TestRoundTrips:
    def test_space_metric(self):
        sp = circle_grid(7)
        back = jsonio.space_from_json(json.loads(json.dumps(jsonio.space_to_json(sp))))
        assert np.abs(back.metric - sp.metric).max() <= 1e-15

    def test_space_coords(self):
        sp = interval_grid(9)
        back = jsonio.space_from_json(jsonio.space_to_json(sp))
        assert np.abs(back.metric - sp.metric).max() <= 1e-15

    def test_cover(self):
        c = three_arcs_cover(30)
        back = jsonio.cover_from_json(jsonio.cover_to_json(c))
        assert back.members == c.members

    def test_element(self):
        rng = np.random.default_rng(81)
        alg = FiniteDimAlgebra([2, 3])
        a = AlgebraElement(
            alg,
            [
                rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)),
                rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)),
            ],
        )
        back = jsonio.element_from_json(alg, jsonio.element_to_json(a))
        assert (back - a).norm() <= 1e-15

    def test_cpmap_matrix_codomain(self):
        rng = np.random.default_rng(82)
        phi = rand_cp_contraction(rng, [2, 3], 4)
        back = jsonio.cpmap_from_json(jsonio.cpmap_to_json(phi))
        for i, d in enumerate(phi.domain.block_sizes):
            for j in range(d):
                for k in range(d):
                    diff = back.unit_image(i, j, k) - phi.unit_image(i, j, k)
                    assert diff.norm() <= 1e-15

    def test_approximation_with_function_codomain(self):
        sp = interval_grid(25)
        xs = sp.coords[:, 0]
        approx = build_cp_approx(sp, [xs], eps=0.35)
        back = jsonio.approximation_from_json(
            json.loads(json.dumps(jsonio.approximation_to_json(approx)))
        )
        assert back.error_on(xs) == pytest.approx(approx.error_on(xs), abs=1e-12)
        assert back.weights is not None
        assert np.abs(back.weights - approx.weights).max() <= 1e-15

    def test_schema_errors(self):
        with pytest.raises(jsonio.SchemaError):
            jsonio.space_from_json({"points": 3})
        with pytest.raises(jsonio.SchemaError):
            jsonio.cover_from_json({})
        with pytest.raises(jsonio.SchemaError):
            jsonio.cpmap_from_json({"domain": {"block_sizes": [2]}})


def run_cli(tmp_path, name, payload, *args):
    inp = tmp_path / f"{name}.json"
    out = tmp_path / f"{name}_out.json"
    inp.write_text(json.dumps(payload))
    code = main([*args, "--in", str(inp), "--out", str(out)])
    return code, (out.read_bytes() if out.exists() else b"")


class TestCLI:
    def test_cover_strict_order(self, tmp_path):
        payload = {"cover": jsonio.cover_to_json(three_arcs_cover(60))}
        code, out = run_cli(tmp_path, "arcs", payload, "cover", "strict-order")
        assert code == 0
        assert json.loads(out)["strict_order"] == 2

    def test_cover_refine_drops_strict_order(self, tmp_path):
        c = circle_grid(60)
        payload = {
            "space": jsonio.space_to_json(c),
            "cover": jsonio.cover_to_json(three_arcs_cover(60)),
        }
        code, out = run_cli(tmp_path, "refine", payload, "cover", "refine")
        assert code == 0
        data = json.loads(out)
        assert data["strict_order"] <= data["input_order"]
        assert data["input_strict_order"] == 2

    def test_cover_check_refines(self, tmp_path):
        payload = {
            "fine": {"members": [[0], [1]]},
            "coarse": {"members": [[0, 1]]},
        }
        code, out = run_cli(tmp_path, "ref", payload, "cover", "check-refines")
        assert code == 0
        assert json.loads(out)["refines"] is True

    def test_malformed_json_exits_2(self, tmp_path):
        inp = tmp_path / "bad.json"
        inp.write_text("{not json")
        assert main(["cover", "order", "--in", str(inp)]) == 2

    def test_missing_field_exits_2(self, tmp_path):
        code, _ = run_cli(tmp_path, "mf", {"space": {"metric": [[0]]}}, "cover", "order")
        assert code == 2

    def test_repair_precondition_exits_3(self, tmp_path):
        payload = {
            "kind": "almost-projection",
            "algebra": {"block_sizes": [2]},
            "element": {"blocks": [[[[0.5, 0], [0, 0]], [[0, 0], [1.0, 0]]]]},
            "epsilon": 0.2,
        }
        code, _ = run_cli(tmp_path, "rp", payload, "cpmap", "repair")
        assert code == 3

    def test_extract_cover_failure_exits_4(self, tmp_path):
        space, U, approx = matrix_path_approximation()
        approx.psi.images[(0, 0)] = approx.psi.images[(0, 0)] * 0.5
        payload = {
            "space": jsonio.space_to_json(space),
            "cover": jsonio.cover_to_json(U),
            "n": 1,
            "approximation": jsonio.approximation_to_json(approx),
        }
        code, _ = run_cli(tmp_path, "x4", payload, "approx", "extract-cover")
        assert code == 4

    def test_approx_build_and_verify(self, tmp_path):
        sp = interval_grid(41)
        xs = sp.coords[:, 0]
        payload = {
            "space": jsonio.space_to_json(sp),
            "functions": [[[float(v), 0.0] for v in xs]],
            "epsilon": 0.3,
        }
        code, out = run_cli(tmp_path, "build", payload, "approx", "build")
        assert code == 0
        built = json.loads(out)
        assert max(built["report"]["errors"]) <= 0.3
        del built["report"], built["seed"]
        payload2 = {
            "approximation": built,
            "functions": payload["functions"],
            "epsilon": 0.3,
        }
        code2, out2 = run_cli(tmp_path, "verify", payload2, "approx", "verify")
        assert code2 == 0
        rep = json.loads(out2)
        assert rep["within"] and rep["psi"]["cp"] and rep["phi"]["cp"]

    def test_cpmap_stinespring_identity(self, tmp_path):
        phi = rand_cp_contraction(np.random.default_rng(83), [2], 2)
        from conftest import identity_map

        payload = {"map": jsonio.cpmap_to_json(identity_map(2))}
        code, out = run_cli(tmp_path, "st", payload, "cpmap", "stinespring")
        assert code == 0
        assert json.loads(out)["isometry"] is True

    def test_cpmap_order_bounds_trace(self, tmp_path):
        from test_cpmaps import trace_map

        payload = {"map": jsonio.cpmap_to_json(trace_map(2))}
        code, out = run_cli(tmp_path, "ob", payload, "cpmap", "order-bounds")
        assert code == 0
        data = json.loads(out)
        assert (data["lower"], data["upper"]) == (1, 1)

    def test_cpmap_decompose(self, tmp_path):
        rng = np.random.default_rng(84)
        phi = rand_order_zero(rng, [2], 2)
        payload = {"map": jsonio.cpmap_to_json(phi)}
        code, out = run_cli(tmp_path, "dec", payload, "cpmap", "decompose")
        assert code == 0
        data = json.loads(out)
        assert data["reconstruction_defect"] <= 1e-9
        assert len(data["blocks"]) == 1

    def test_determinism_two_runs(self, tmp_path):
        sp = interval_grid(31)
        xs = sp.coords[:, 0]
        payload = {
            "space": jsonio.space_to_json(sp),
            "functions": [[[float(v), 0.0] for v in xs]],
            "epsilon": 0.25,
        }
        _, out1 = run_cli(tmp_path, "d1", payload, "--seed", "5", "approx", "build")
        _, out2 = run_cli(tmp_path, "d2", payload, "--seed", "5", "approx", "build")
        assert out1 == out2
