"""Tests for the output-space geometry, encoders, decoders, and distances."""

import json
import math

import numpy as np
import pytest

from doa_arch.errors import DegenerateDistributionError, DomainError
from doa_arch.label_codec import (
    DecodingMethod,
    LabelDistribution,
    LabelKind,
    OutputSpace,
    Position,
    decode_top1,
    decode_wad2,
    decode_wad3,
    encode_glc,
    encode_one_hot,
    encode_positions,
    encode_sld,
    encode_uld,
    peak_class,
    quantization_error_limit,
    round_half_up,
    wasserstein_1d,
)

SPACE = OutputSpace(range_deg=180, cell_deg=5)


class TestOutputSpace:
    def test_cell_count(self):
        assert SPACE.num_cells == 36
        assert SPACE.num_classes == 37
        assert not SPACE.circular

    def test_circular_flag(self):
        assert OutputSpace(range_deg=360, cell_deg=7.5).circular

    def test_fractional_cell_width(self):
        space = OutputSpace(range_deg=360, cell_deg=7.5)
        assert space.num_cells == 48

    def test_non_divisor_rejected(self):
        with pytest.raises(DomainError):
            OutputSpace(range_deg=180, cell_deg=7)

    def test_nonpositive_cell_rejected(self):
        with pytest.raises(DomainError):
            OutputSpace(range_deg=180, cell_deg=0)

    def test_json_round_trip(self):
        d = SPACE.to_json_dict()
        assert d == {"range_deg": 180, "cell_deg": 5}
        assert OutputSpace.from_json_dict(d) == SPACE


class TestRounding:
    def test_half_rounds_up(self):
        assert round_half_up(18.5) == 19
        assert round_half_up(0.5) == 1
        assert round_half_up(2.49) == 2

    def test_array_input(self):
        np.testing.assert_array_equal(round_half_up(np.array([0.4, 0.5, 1.6])), [0, 1, 2])


class TestPosition:
    def test_scaled_coordinate(self):
        pos = Position.in_space(SPACE, 92.4)
        assert pos.gamma == pytest.approx(18.48)
        assert pos.int_part == 18
        assert pos.frac_part == pytest.approx(0.48)

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            Position.in_space(SPACE, -0.1)
        with pytest.raises(DomainError):
            Position.in_space(SPACE, 180.1)


class TestOneHot:
    def test_just_below_midpoint(self):
        # 92.4 / 5 = 18.48 rounds down to class 18 (centre 90).
        assert peak_class(encode_one_hot(SPACE, 92.4)) == 18

    def test_just_above_midpoint(self):
        # 92.6 / 5 = 18.52 rounds up to class 19 (centre 95).
        assert peak_class(encode_one_hot(SPACE, 92.6)) == 19

    def test_zero(self):
        y = encode_one_hot(SPACE, 0.0)
        assert y.values[0] == 1.0
        assert y.values.sum() == 1.0

    def test_upper_boundary(self):
        assert encode_one_hot(SPACE, 180.0).values[36] == 1.0

    def test_exactly_one_entry(self):
        rng = np.random.default_rng(0)
        for p in rng.uniform(0, 180, 50):
            values = encode_one_hot(SPACE, p).values
            assert np.count_nonzero(values) == 1
            assert values.max() == 1.0


class TestUld:
    def test_split_mass(self):
        y = encode_uld(SPACE, 92.4).values
        assert y[18] == pytest.approx(0.52, abs=1e-9)
        assert y[19] == pytest.approx(0.48, abs=1e-9)
        assert np.count_nonzero(y) == 2

    def test_on_grid_reduces_to_one_hot(self):
        y = encode_uld(SPACE, 90.0).values
        assert y[18] == 1.0
        assert np.count_nonzero(y) == 1

    def test_exact_half(self):
        y = encode_uld(SPACE, 2.5).values
        assert y[0] == 0.5 and y[1] == 0.5

    def test_upper_boundary(self):
        assert encode_uld(SPACE, 180.0).values[36] == 1.0

    def test_adjacent_support_and_unit_mass(self):
        rng = np.random.default_rng(1)
        for p in rng.uniform(0, 180, 200):
            y = encode_uld(SPACE, p).values
            nz = np.flatnonzero(y)
            assert len(nz) <= 2
            if len(nz) == 2:
                assert nz[1] == nz[0] + 1
            assert abs(y.sum() - 1.0) < 1e-9

    def test_weighted_centre_reproduces_angle(self):
        # Unbiasedness: sum_i y_i * i * l == p.
        rng = np.random.default_rng(2)
        centers = SPACE.class_centers()
        for p in rng.uniform(0, 180, 500):
            y = encode_uld(SPACE, p).values
            assert (y * centers).sum() == pytest.approx(p, abs=1e-9)

    def test_agreement_with_one_hot_peak(self):
        rng = np.random.default_rng(3)
        for p in rng.uniform(0, 180, 300):
            gamma = p / SPACE.cell_deg
            frac = gamma - math.floor(gamma)
            uld_peak = peak_class(encode_uld(SPACE, p))
            hot_peak = peak_class(encode_one_hot(SPACE, p))
            if frac < 0.5:
                assert uld_peak == hot_peak
            elif frac > 0.5:
                assert hot_peak == math.floor(gamma) + 1


class TestGaussianCodings:
    def test_glc_peak_is_one_on_grid(self):
        y = encode_glc(SPACE, 90.0, sigma=8.0).values
        assert y[18] == 1.0

    def test_glc_known_value(self):
        # Gaussian at distance 5 degrees: exp(-25 / (2 * 64)).
        y = encode_glc(SPACE, 90.0, sigma=8.0).values
        assert y[17] == pytest.approx(math.exp(-25 / 128), abs=1e-12)
        assert y[17] == pytest.approx(0.8226, abs=5e-5)

    def test_glc_symmetry(self):
        y = encode_glc(SPACE, 90.0, sigma=8.0).values
        assert y[16] == pytest.approx(y[20], abs=1e-15)

    def test_glc_does_not_sum_to_one(self):
        assert encode_glc(SPACE, 90.0, sigma=8.0).values.sum() > 1.5

    def test_sld_sums_to_one(self):
        assert encode_sld(SPACE, 37.3, sigma=8.0).values.sum() == pytest.approx(1.0, abs=1e-12)

    def test_sld_peak_at_nearest_class(self):
        assert peak_class(encode_sld(SPACE, 90.0, sigma=8.0)) == 18

    def test_sld_preserves_glc_ratios(self):
        glc = encode_glc(SPACE, 90.0, sigma=8.0).values
        sld = encode_sld(SPACE, 90.0, sigma=8.0).values
        assert sld[17] / sld[18] == pytest.approx(glc[17] / glc[18], rel=1e-12)

    def test_bad_sigma(self):
        for sigma in (0.0, -1.0):
            with pytest.raises(DomainError):
                encode_glc(SPACE, 90.0, sigma)
            with pytest.raises(DomainError):
                encode_sld(SPACE, 90.0, sigma)

    def test_all_encoders_shape_and_range(self):
        rng = np.random.default_rng(4)
        for p in rng.uniform(0, 180, 20):
            for values in (
                encode_one_hot(SPACE, p).values,
                encode_uld(SPACE, p).values,
                encode_glc(SPACE, p, 8.0).values,
                encode_sld(SPACE, p, 8.0).values,
            ):
                assert values.shape == (37,)
                assert np.all(values >= 0.0) and np.all(values <= 1.0)


class TestPeakClass:
    def test_one_hot_identity(self):
        assert peak_class(encode_one_hot(SPACE, 90.0)) == 18

    def test_uld_majority(self):
        assert peak_class(encode_uld(SPACE, 92.4)) == 18

    def test_uniform_tie_breaks_low(self):
        assert peak_class(np.full(37, 1 / 37)) == 0

    def test_empty(self):
        with pytest.raises(DomainError):
            peak_class(np.array([]))


class TestDecoders:
    def test_top1_one_hot(self):
        out = decode_top1(SPACE, encode_one_hot(SPACE, 90.0))
        assert out.p_hat == 90.0
        assert out.method == DecodingMethod.TOP1

    def test_top1_quantizes(self):
        assert decode_top1(SPACE, encode_uld(SPACE, 92.4)).p_hat == 90.0
        assert decode_top1(SPACE, encode_uld(SPACE, 92.6)).p_hat == 95.0

    def test_wad2_exact_on_uld(self):
        out = decode_wad2(SPACE, encode_uld(SPACE, 92.4))
        assert out.p_hat == pytest.approx(92.4, abs=1e-9)
        assert out.method == DecodingMethod.WAD2

    def test_wad2_one_hot_reduces_to_top1(self):
        assert decode_wad2(SPACE, encode_one_hot(SPACE, 90.0)).p_hat == 90.0

    def test_wad2_boundary_padding(self):
        assert decode_wad2(SPACE, encode_one_hot(SPACE, 0.0)).p_hat == 0.0
        assert decode_wad2(SPACE, encode_one_hot(SPACE, 180.0)).p_hat == 180.0

    def test_wad3_exact_on_uld(self):
        assert decode_wad3(SPACE, encode_uld(SPACE, 92.4)).p_hat == pytest.approx(92.4, abs=1e-9)

    def test_wad3_one_hot_reduces_to_top1(self):
        assert decode_wad3(SPACE, encode_one_hot(SPACE, 90.0)).p_hat == 90.0

    def test_wad3_symmetric_sidelobes_cancel(self):
        y = np.zeros(37)
        y[17], y[18], y[19] = 0.1, 0.8, 0.1
        assert decode_wad3(SPACE, y).p_hat == pytest.approx(90.0, abs=1e-12)

    def test_wad3_matches_top1_on_symmetric_distributions(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            k = rng.integers(1, 36)
            side = rng.uniform(0, 0.3)
            y = np.zeros(37)
            y[k] = rng.uniform(0.4, 1.0)
            y[k - 1] = y[k + 1] = side
            assert decode_wad3(SPACE, y).p_hat == pytest.approx(
                decode_top1(SPACE, y).p_hat, abs=1e-9
            )

    def test_roundtrip_through_wad(self):
        rng = np.random.default_rng(6)
        for p in rng.uniform(0, 180, 20_000):
            y = encode_uld(SPACE, p)
            assert abs(decode_wad2(SPACE, y).p_hat - p) < 1e-9
            assert abs(decode_wad3(SPACE, y).p_hat - p) < 1e-9

    def test_wad_stays_inside_space(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            y = rng.uniform(0, 1, 37)
            for decode in (decode_top1, decode_wad2, decode_wad3):
                assert 0.0 <= decode(SPACE, y).p_hat <= 180.0

    def test_all_zero_distribution_rejected(self):
        with pytest.raises(DegenerateDistributionError):
            decode_wad2(SPACE, np.zeros(37))
        with pytest.raises(DegenerateDistributionError):
            decode_wad3(SPACE, np.zeros(37))

    def test_wrong_length_rejected(self):
        with pytest.raises(DomainError):
            decode_top1(SPACE, np.ones(10))


class TestWasserstein:
    def test_point_mass_transport(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            i, j = rng.integers(0, 37, 2)
            d = wasserstein_1d(
                encode_one_hot(SPACE, i * 5.0), encode_one_hot(SPACE, j * 5.0)
            )
            assert d == abs(int(i) - int(j))

    def test_identity(self):
        y = encode_sld(SPACE, 42.0, 8.0)
        assert wasserstein_1d(y, y) == 0.0

    def test_uld_to_origin_equals_gamma(self):
        assert wasserstein_1d(
            encode_uld(SPACE, 92.4), encode_one_hot(SPACE, 0.0)
        ) == pytest.approx(18.48, abs=1e-9)

    def test_linearity_against_staircase(self):
        origin = encode_one_hot(SPACE, 0.0)
        for p in np.linspace(0, 180, 361):
            wd_uld = wasserstein_1d(encode_uld(SPACE, p), origin)
            wd_hot = wasserstein_1d(encode_one_hot(SPACE, p), origin)
            assert wd_uld == pytest.approx(p / 5.0, abs=1e-9)
            assert wd_hot == round_half_up(p / 5.0)

    def test_mass_mismatch_rejected(self):
        with pytest.raises(DomainError):
            wasserstein_1d(encode_glc(SPACE, 90.0, 8.0), encode_one_hot(SPACE, 90.0))

    def test_length_mismatch_rejected(self):
        with pytest.raises(DomainError):
            wasserstein_1d(np.ones(5) / 5, np.ones(6) / 6)


class TestQuantizationErrorLimit:
    def test_uniform_expectation(self):
        rng = np.random.default_rng(9)
        positions = rng.uniform(0, 180, 1_000_000)
        assert quantization_error_limit(positions, SPACE) == pytest.approx(1.25, abs=0.005)

    def test_class_centers_have_no_error(self):
        assert quantization_error_limit(SPACE.class_centers(), SPACE) == 0.0

    def test_single_position(self):
        assert quantization_error_limit([92.4], SPACE) == pytest.approx(2.4, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            quantization_error_limit([], SPACE)

    def test_expectation_independent_of_tie_rule(self):
        # The l/4 expectation holds for any consistent rounding rule, so a
        # half-down variant must land on the same value.
        rng = np.random.default_rng(10)
        gamma = rng.uniform(0, 36, 1_000_000)
        half_down = np.ceil(gamma - 0.5)
        assert np.mean(np.abs(gamma - half_down)) == pytest.approx(0.25, abs=0.002)


class TestSerialization:
    def test_label_distribution_flat_array(self):
        y = encode_uld(SPACE, 92.4)
        text = y.to_json()
        parsed = json.loads(text)
        assert isinstance(parsed, list)
        assert len(parsed) == 37
        restored = LabelDistribution.from_json(text, LabelKind.ULD)
        np.testing.assert_array_equal(restored.values, y.values)

    def test_encode_positions_batch(self):
        batch = encode_positions("uld", SPACE, [92.4, 90.0])
        assert batch.shape == (2, 37)
        assert batch[1, 18] == 1.0

    def test_encode_positions_unknown_name(self):
        with pytest.raises(DomainError):
            encode_positions("nope", SPACE, [1.0])
