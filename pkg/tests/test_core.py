import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frictiondiag.config import FLIP, THREE_STATE, default_model, example1_fss, example2_fss, example_model
from frictiondiag.core import (
    AnomalyStatus,
    FssSpec,
    HazardTable,
    RwaModel,
    TelemetryWindow,
    ValidationError,
    anomaly_names,
    constant_hazard,
    countdown_hazard,
    hazard_from_dict,
    make_rng,
    sign,
    spawn_seeds,
    table_hazard,
    validate_fss_spec,
)


class TestValidateFssSpec:
    def test_example1_is_valid(self):
        assert validate_fss_spec(example1_fss()) == []

    def test_example2_is_valid(self):
        assert validate_fss_spec(example2_fss()) == []

    def test_non_adjacent_transition(self):
        P = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]])
        spec = FssSpec(3, constant_hazard([0.1] * 3), P, [(0, 0.1), (0.2, 0.3), (0.4, 0.5)])
        assert "non-adjacent transition" in validate_fss_spec(spec)

    def test_overlapping_supports(self):
        spec = FssSpec(2, constant_hazard([0.1, 0.1]), FLIP, [(0.0, 0.2), (0.1, 0.3)])
        assert "overlapping friction supports" in validate_fss_spec(spec)

    def test_rows_must_sum_to_one(self):
        spec = FssSpec(2, constant_hazard([0.1, 0.1]), np.array([[0.0, 0.5], [1.0, 0.0]]), [(0, 0.1), (0.2, 0.3)])
        assert "transition rows must sum to 1" in validate_fss_spec(spec)

    def test_hazard_range(self):
        spec = FssSpec(2, table_hazard([[0.1, 1.5], [0.1, 0.1]]), FLIP, [(0, 0.1), (0.2, 0.3)])
        assert "hazard values outside [0, 1]" in validate_fss_spec(spec)

    def test_single_configuration_rejected(self):
        spec = FssSpec(1, constant_hazard([0.1]), np.array([[1.0]]), [(0, 0.1)])
        assert "q_max must be at least 2" in validate_fss_spec(spec)

    def test_model_validate_raises(self):
        bad = FssSpec(2, constant_hazard([0.1, 0.1]), FLIP, [(0.0, 0.2), (0.1, 0.3)])
        with pytest.raises(ValidationError, match="overlapping"):
            RwaModel(1.0, 1.0, 0.02, [bad]).validate()


class TestHazards:
    def test_countdown_values(self):
        h = countdown_hazard([200])
        assert h(1, 0) == pytest.approx(1 / 200)
        assert h(1, 150) == pytest.approx(1 / 50)
        assert h(1, 199) == 1.0
        assert h(1, 10_000) == 1.0  # clamped beyond the cap

    def test_countdown_onset(self):
        h = countdown_hazard([30000], [10000])
        assert h(1, 10000) == 0.0
        assert h(1, 10001) == pytest.approx(1 / (30000 - 10001))

    def test_table_clamp(self):
        h = table_hazard([[0.1, 0.2, 0.3]])
        assert h(1, 2) == 0.3 and h(1, 50) == 0.3
        np.testing.assert_allclose(h(1, np.array([0, 1, 7])), [0.1, 0.2, 0.3])

    @pytest.mark.parametrize("h", [countdown_hazard([5, 7], [1, 2]), constant_hazard([0.2, 0.4]),
                                   table_hazard([[0.1, 0.2], [0.3, 0.4]])])
    def test_dict_round_trip(self, h):
        h2 = hazard_from_dict(h.to_dict())
        np.testing.assert_array_equal(h.table, h2.table)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            hazard_from_dict({"kind": "weibull"})


class TestModelTypes:
    def test_model_round_trip(self):
        m = default_model()
        m2 = RwaModel.from_dict(m.to_dict())
        assert m2.to_dict() == m.to_dict()
        m2.validate()

    def test_example_model_valid(self):
        example_model().validate()

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValidationError):
            RwaModel(1.0, 1.0, 0.0, [example1_fss()])

    def test_window_validation(self):
        with pytest.raises(ValidationError):
            TelemetryWindow([1.0, 2.0], [1.0])
        with pytest.raises(ValidationError):
            TelemetryWindow([1.0, np.nan], [1.0, 1.0])
        w = TelemetryWindow([1.0, 2.0], [3.0, 4.0])
        assert w.n == 2 and not w.omega.flags.writeable

    def test_sign_of_zero_is_positive(self):
        np.testing.assert_array_equal(sign(np.array([-2.0, 0.0, 3.0])), [-1.0, 1.0, 1.0])


class TestAnomalyStatus:
    @given(st.lists(st.booleans(), min_size=3, max_size=6))
    def test_vector_round_trip(self, bits):
        s = AnomalyStatus.from_vector(bits)
        assert s.to_vector() == [int(b) for b in bits]
        assert len(s) == len(bits)

    def test_labels(self):
        assert AnomalyStatus.nominal(2).label == "nominal"
        assert AnomalyStatus(True, False, (False, False)).label == "dry"
        assert AnomalyStatus(False, False, (False, True)).label == "fss2"
        assert AnomalyStatus(True, True, (False, False)).label == "multi"
        assert anomaly_names(2) == ["dry", "viscous", "fss1", "fss2"]


class TestRandomness:
    def test_same_seed_same_stream(self):
        assert np.array_equal(make_rng(5).normal(size=10), make_rng(5).normal(size=10))

    def test_spawned_seeds_stable_and_distinct(self):
        a = [make_rng(s).random() for s in spawn_seeds(9, 3)]
        b = [make_rng(s).random() for s in spawn_seeds(9, 3)]
        assert a == b and len(set(a)) == 3


def test_three_state_matrix_is_valid():
    spec = FssSpec(3, constant_hazard([0.1] * 3), THREE_STATE, [(0, 0.1), (0.2, 0.3), (0.4, 0.5)])
    assert validate_fss_spec(spec) == []
    assert isinstance(spec.hazard, HazardTable)
