import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flaggeo.dataio import (
    DataMatrix,
    ExperimentSpec,
    build_sets,
    center,
    experiment_points,
    gen_ellipsoid,
    gen_gaussian,
    gen_mixture,
    load_csv,
    random_frame,
    save_csv,
    select_bands,
    svd_flag,
)
from flaggeo.errors import (
    DegenerateSpectrum,
    DegenerateSpectrumWarning,
    InvalidInput,
    ParseError,
    RankTooLow,
)
from flaggeo.flag import FlagPoint, flag_distance
from oracles import haar

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def spec_dict(**over):
    base = {
        "signature": [1, 2],
        "k": 3,
        "m": 4,
        "q": 2,
        "sets": 3,
        "seed": 1,
        "classes": [
            {"name": "A", "generator": "gaussian", "params": {"n": 6, "p": 30, "scales": [3, 2, 1], "seed": 1}},
            {"name": "B", "generator": "gaussian", "params": {"n": 6, "p": 30, "scales": [1, 2, 3], "seed": 2}},
        ],
    }
    base.update(over)
    return base


class TestDataMatrix:
    def test_validation(self):
        with pytest.raises(InvalidInput):
            DataMatrix(np.zeros((0, 3)))
        with pytest.raises(InvalidInput):
            DataMatrix(np.array([[1.0, np.inf]]))
        with pytest.raises(InvalidInput):
            DataMatrix(np.zeros((2, 2)), column_labels=("a",))
        X = DataMatrix([[1, 2, 3]], class_label="c")
        assert (X.n, X.p, X.class_label) == (1, 3, "c")


class TestCenter:
    def test_examples(self):
        assert np.array_equal(center(np.array([[1.0, 3.0]])).values, [[-1.0, 1.0]])
        c = np.array([[1.0], [2.0], [3.0]])
        assert np.array_equal(center(np.hstack([c, c, c])).values, np.zeros((3, 3)))

    def test_zero_row_means(self, rng):
        Y = center(DataMatrix(rng.standard_normal((5, 20)) + 7, class_label="x"))
        assert np.linalg.norm(Y.values.mean(axis=1)) < 1e-12
        assert Y.class_label == "x"


class TestSvdFlag:
    def test_axis_aligned(self):
        P = svd_flag(np.diag([3.0, 2.0, 1.0]), (1, 1, 1))
        assert np.allclose(np.abs(P.frame()), np.eye(3)[:, :2])
        assert P.signature.parts == (1, 1, 1)

    def test_ellipsoid_recovers_frame(self):
        R = haar(3, np.random.default_rng(4))
        X = gen_ellipsoid([5, 2, 1], 500, R, seed=9)
        P = svd_flag(X, (1, 1))
        assert flag_distance(P, FlagPoint.from_matrix(R, (1, 1))).distance < 0.15
        U = np.linalg.svd(X.values)[0]
        axis_angles = np.arccos(np.clip(np.abs(np.sum(U * R, axis=0)), 0, 1))
        assert np.all(axis_angles < 0.1)

    def test_tie_across_boundary(self):
        with pytest.raises(DegenerateSpectrum):
            svd_flag(np.diag([3.0, 2.0, 2.0, 1.0]), (2, 1))
        with pytest.raises(DegenerateSpectrum):
            svd_flag(np.diag([3.0, 2.0, 1.0, 1.0]), (2, 1))

    def test_tie_inside_block_warns(self):
        with pytest.warns(DegenerateSpectrumWarning):
            P = svd_flag(np.diag([2.0, 2.0, 1.0, 0.5]), (2, 1))
        assert P.signature.parts == (2, 1, 1)

    def test_rank_too_low(self):
        X = np.outer([1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 1.0])
        with pytest.raises(RankTooLow):
            svd_flag(X, (1, 1))

    def test_signature_too_large(self, rng):
        with pytest.raises(InvalidInput):
            svd_flag(rng.standard_normal((3, 5)), (2, 2))

    @given(seeds)
    def test_column_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((6, 12)) * np.array([6, 4, 3, 2, 1, 0.5])[:, None]
        P1 = svd_flag(center(X), (1, 2))
        P2 = svd_flag(center(X[:, rng.permutation(12)]), (1, 2))
        assert flag_distance(P1, P2).distance < 1e-6

    @given(seeds, st.floats(0.01, 100.0))
    def test_scale_invariance(self, seed, c):
        X = np.random.default_rng(seed).standard_normal((5, 9))
        assert np.allclose(svd_flag(c * X, (2, 1)).Q, svd_flag(X, (2, 1)).Q, atol=1e-12)
        assert np.array_equal(svd_flag(4.0 * X, (2, 1)).Q, svd_flag(X, (2, 1)).Q)


class TestGenerators:
    def test_unit_sphere(self):
        X = gen_ellipsoid([1, 1, 1], 50, seed=3)
        assert np.allclose(np.linalg.norm(X.values, axis=0), 1.0, atol=1e-12)

    def test_deterministic(self):
        a = gen_ellipsoid([5, 2, 1], 40, random_frame(4, 3, 1), 0.1, seed=8)
        b = gen_ellipsoid([5, 2, 1], 40, random_frame(4, 3, 1), 0.1, seed=8)
        assert np.array_equal(a.values, b.values)
        g1 = gen_gaussian([2, 1], 10, random_frame(5, 2, 0), 0.1, seed=2, mean=[1, 0])
        g2 = gen_gaussian([2, 1], 10, random_frame(5, 2, 0), 0.1, seed=2, mean=[1, 0])
        assert np.array_equal(g1.values, g2.values)

    def test_gaussian_mean_and_span(self):
        F = random_frame(6, 2, 5)
        X = gen_gaussian([0.0, 0.0], 5, F, seed=1, mean=[2.0, -1.0]).values
        assert np.allclose(X, (F @ [2.0, -1.0])[:, None], atol=1e-15)

    def test_generator_validation(self):
        with pytest.raises(InvalidInput):
            gen_ellipsoid([1, 2], 5)
        with pytest.raises(InvalidInput):
            gen_ellipsoid([1, 0], 5)
        with pytest.raises(InvalidInput, match="orthonormality"):
            gen_ellipsoid([2, 1], 5, np.ones((3, 2)))
        with pytest.raises(InvalidInput):
            gen_gaussian([-1.0], 5)
        with pytest.raises(InvalidInput):
            gen_gaussian([1.0, 1.0], 5, mean=[1.0])

    def test_random_frame(self):
        F = random_frame(7, 3, 2)
        assert np.allclose(F.T @ F, np.eye(3), atol=1e-14)
        assert np.array_equal(F, random_frame(7, 3, 2))


class TestMixture:
    def test_set_sizes_and_labels(self):
        A = DataMatrix(np.arange(200.0).reshape(2, 100), class_label="one")
        B = DataMatrix(-np.arange(200.0).reshape(2, 100) - 1, class_label="five")
        sets = gen_mixture(A, B, 16, 9, 4, seed=0)
        assert [S.p for S in sets] == [25] * 4
        assert {S.class_label for S in sets} == {"one+five"}
        assert all(np.all(S.values[:, :16] >= 0) and np.all(S.values[:, 16:] < 0) for S in sets)

    def test_columns_disjoint(self):
        A = DataMatrix(np.arange(60.0)[None, :])
        B = DataMatrix(-np.arange(1.0, 61.0)[None, :])
        sets = gen_mixture(A, B, 5, 3, 6, seed=2)
        used = np.concatenate([S.values[0] for S in sets])
        assert len(np.unique(used)) == used.size

    def test_pure_sets(self):
        A = DataMatrix(np.ones((2, 10)), class_label="a")
        sets = gen_mixture(A, A, 5, 0, 2, seed=0)
        assert [S.p for S in sets] == [5, 5] and sets[0].class_label == "a"

    def test_exhaustion(self):
        A = DataMatrix(np.ones((2, 10)))
        with pytest.raises(InvalidInput, match="exhausted"):
            gen_mixture(A, A, 4, 1, 3)


class TestBands:
    def test_select(self):
        X = DataMatrix(np.arange(12.0).reshape(4, 3))
        assert np.array_equal(select_bands(X, [2, 0]).values, [[6, 7, 8], [0, 1, 2]])

    @pytest.mark.parametrize("idx", [[], [0, 0], [4], [-1], [0.5]])
    def test_invalid(self, idx):
        with pytest.raises(InvalidInput):
            select_bands(np.zeros((4, 3)), idx)


class TestCsv:
    def test_plain(self, tmp_path):
        f = tmp_path / "m.csv"
        f.write_text("1,2\n3,4\n")
        X = load_csv(f)
        assert (X.n, X.p) == (2, 2) and np.array_equal(X.values, [[1, 2], [3, 4]])

    def test_round_trip_bit_equal(self, tmp_path, rng):
        X = DataMatrix(rng.standard_normal((4, 7)) * 10.0 ** rng.integers(-20, 20, (4, 7)),
                       column_labels=[f"c{i}" for i in range(7)])
        save_csv(X, tmp_path / "r.csv")
        Y = load_csv(tmp_path / "r.csv", label="r")
        assert np.array_equal(X.values, Y.values)
        assert Y.column_labels == X.column_labels and Y.class_label == "r"

    def test_ragged(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("1,2\n3,4\n5\n")
        with pytest.raises(ParseError, match="line 3") as err:
            load_csv(f)
        assert err.value.line == 3

    def test_non_numeric(self, tmp_path):
        f = tmp_path / "bad.csv"
        f.write_text("a,b\n1,2\n3,x\n")
        with pytest.raises(ParseError) as err:
            load_csv(f)
        assert err.value.line == 3

    def test_non_finite_and_empty(self, tmp_path):
        f = tmp_path / "nan.csv"
        f.write_text("1,nan\n")
        with pytest.raises(ParseError):
            load_csv(f)
        e = tmp_path / "empty.csv"
        e.write_text("")
        with pytest.raises(ParseError):
            load_csv(e)


class TestExperimentSpec:
    def test_valid(self, tmp_path):
        spec = ExperimentSpec.from_dict(spec_dict(signature=[1, 2, 3]))
        assert spec.signature == (1, 2) and spec.k == 3 and spec.center == "global"

    @pytest.mark.parametrize("patch,path", [
        ({"k": "3"}, "$.k"),
        ({"m": -1}, "$.m"),
        ({"center": "median"}, "$.center"),
        ({"extra": 1}, "$"),
        ({"solver": {"restarts": 0}}, "$.solver.restarts"),
    ])
    def test_schema_errors_name_the_field(self, patch, path):
        with pytest.raises(InvalidInput) as err:
            ExperimentSpec.from_dict(spec_dict(**patch))
        assert str(err.value).startswith(path + ":")

    def test_class_errors(self):
        d = spec_dict()
        d["classes"][0].pop("generator")
        with pytest.raises(InvalidInput, match=r"\$\.classes\[0\]"):
            ExperimentSpec.from_dict(d)
        d = spec_dict()
        d["classes"][1]["params"]["colour"] = 1
        with pytest.raises(InvalidInput, match="unknown keys"):
            ExperimentSpec.from_dict(d)
        d = spec_dict()
        d["classes"][1]["name"] = "A"
        with pytest.raises(InvalidInput, match="distinct"):
            ExperimentSpec.from_dict(d)

    def test_semantic_errors(self):
        with pytest.raises(InvalidInput, match="signature"):
            ExperimentSpec.from_dict(spec_dict(signature=[2, 2]))
        with pytest.raises(InvalidInput):
            ExperimentSpec.from_dict(spec_dict(m=1, q=1))

    def test_build_sets(self):
        spec = ExperimentSpec.from_dict(spec_dict())
        sets = build_sets(spec)
        assert [S.class_label for S in sets] == ["A"] * 3 + ["B"] * 3
        assert all(S.values.shape == (6, 6) for S in sets)
        pts, labels = experiment_points(spec)
        assert len(pts) == 6 and pts[0].signature.parts == (1, 2, 3)
        again = build_sets(spec)
        assert all(np.array_equal(a.values, b.values) for a, b in zip(sets, again))

    def test_csv_sources(self, tmp_path):
        rng = np.random.default_rng(0)
        for name in ("a", "b"):
            save_csv(rng.standard_normal((5, 20)), tmp_path / f"{name}.csv")
        d = spec_dict(classes=[{"name": "a", "path": "a.csv"}, {"name": "b", "path": "b.csv"}],
                      center="set", bands=[0, 1, 2, 4])
        spec = ExperimentSpec.from_dict(json.loads(json.dumps(d)), base_dir=tmp_path)
        sets = build_sets(spec)
        assert all(S.n == 4 for S in sets)
        assert all(np.abs(S.values.mean(axis=1)).max() < 1e-12 for S in sets)

    def test_pure_sets_without_minor_part(self):
        d = spec_dict(q=0)
        d["m"] = 6
        sets = build_sets(ExperimentSpec.from_dict(d))
        assert len(sets) == 6 and all(S.values.shape == (6, 6) for S in sets)

    def test_pool_exhausted(self):
        with pytest.raises(InvalidInput, match="exhausted"):
            build_sets(ExperimentSpec.from_dict(spec_dict(sets=10)))

    def test_bad_generator_parameters(self):
        d = spec_dict()
        d["classes"][0]["params"]["scales"] = "big"
        with pytest.raises(InvalidInput):
            build_sets(ExperimentSpec.from_dict(d))


def test_no_warnings_on_generic_data(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        svd_flag(rng.standard_normal((6, 10)), (2, 2))
