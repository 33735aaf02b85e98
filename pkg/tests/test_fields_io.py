import numpy as np
import pytest

from nlbellman import (FieldFormatError, ScalarField, ValidationError, closures,
                       export_field, import_field, second_difference)
from nlbellman.fields import average, from_closure, from_function

H = 1.0 / 64.0


def test_grid_validation():
    with pytest.raises(ValidationError):
        ScalarField(1, H, 1.5, np.zeros(193), closures.constant(0.0))  # R < 2
    with pytest.raises(ValidationError):
        ScalarField(1, 0.013, 2.0, np.zeros(100), closures.constant(0.0))  # h not dividing
    with pytest.raises(ValidationError):
        ScalarField(1, H, 2.0, np.zeros(100), closures.constant(0.0))  # bad shape


def test_sup_norm_floor():
    vals = np.zeros(257)
    vals[10] = 3.0
    with pytest.raises(ValidationError):
        ScalarField(1, H, 2.0, vals, closures.constant(0.0), sup_norm=1.0)
    u = ScalarField(1, H, 2.0, vals, closures.constant(0.5))
    assert u.sup_norm == 3.0


def test_values_at_interior_and_exterior():
    u = from_function(lambda p: p[:, 0] ** 2, 1, H, 2.0, closures.constant(9.0))
    assert u([0.5]) == pytest.approx(0.25, abs=1e-12)      # grid node, exact
    assert u([0.5 + H / 2]) == pytest.approx((0.5 + H / 2) ** 2, abs=H**2)
    assert u([3.0]) == 9.0                                  # closure
    assert u([-2.0]) == pytest.approx(4.0)                  # box edge is grid


def test_second_difference_affine_kills():
    u = from_function(lambda p: 2.0 * p[:, 0] + 1.0, 1, H, 2.0, closures.constant(0.0))
    # within the affine region the second difference vanishes identically
    assert second_difference(u, [0.1], [0.25]) == pytest.approx(0.0, abs=1e-13)


def test_second_difference_quadratic():
    u = from_function(lambda p: p[:, 0] ** 2, 1, H, 2.0, closures.constant(0.0))
    val = second_difference(u, [0.1], [0.3])
    assert val == pytest.approx(0.18, abs=2 * H**2)


def test_second_difference_bounded_by_sup():
    rng = np.random.default_rng(2)
    u = ScalarField(1, H, 2.0, rng.uniform(-1, 1, 257), closures.constant(0.0))
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, 1)
        y = rng.uniform(-5, 5, 1)
        assert abs(second_difference(u, x, y)) <= 4.0 * u.sup_norm + 1e-12


def test_shifted_field_shifts_everywhere():
    u = from_closure(closures.hat(2.0), 1, H, 2.0)
    v = u.shifted(0.25)
    assert np.allclose(v.values, u.values + 0.25)
    assert v([3.5]) == pytest.approx(u([3.5]) + 0.25)
    assert v.exterior.lo == pytest.approx(u.exterior.lo + 0.25)


def test_average_field():
    rng = np.random.default_rng(3)
    u = ScalarField(1, H, 2.0, rng.uniform(-1, 1, 257), closures.constant(0.5))
    v = ScalarField(1, H, 2.0, rng.uniform(-1, 1, 257), closures.constant(-0.5))
    w = average(u, v)
    assert np.array_equal(w.values, (u.values + v.values) / 2.0)
    assert w([5.0]) == pytest.approx(0.0)


def test_oscillation_constant_field():
    u = from_closure(closures.constant(0.7), 1, H, 2.0)
    assert u.oscillation == 0.0


# -- file format -------------------------------------------------------------

def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(4)
    u = ScalarField(1, H, 2.0, rng.uniform(-1, 1, 257), closures.hat(2.0, 0.7))
    path = tmp_path / "u.field"
    export_field(u, path)
    v = import_field(path)
    assert np.array_equal(u.values, v.values)
    assert v.sup_norm == u.sup_norm
    assert v.exterior.descriptor() == u.exterior.descriptor()
    assert (v.dimension, v.h, v.box_radius) == (u.dimension, u.h, u.box_radius)


def test_round_trip_2d(tmp_path):
    rng = np.random.default_rng(5)
    u = ScalarField(2, 1 / 8, 2.0, rng.uniform(-1, 1, (33, 33)), closures.constant(0.0))
    path = tmp_path / "u2.field"
    export_field(u, path)
    v = import_field(path)
    assert np.array_equal(u.values, v.values)


def test_version_mismatch_rejected(tmp_path):
    u = from_closure(closures.constant(0.0), 1, H, 2.0)
    path = tmp_path / "u.field"
    export_field(u, path)
    text = path.read_text().splitlines()
    import json
    header = json.loads(text[0])
    header["version"] = "2.0"
    path.write_text("\r\n".join([json.dumps(header)] + text[1:]) + "\r\n")
    with pytest.raises(FieldFormatError):
        import_field(path)


def test_malformed_header_line_number(tmp_path):
    path = tmp_path / "bad.field"
    path.write_text("{not json\r\n1,2,3\r\n")
    with pytest.raises(FieldFormatError) as err:
        import_field(path)
    assert err.value.line == 1


def test_malformed_body_line_number(tmp_path):
    u = from_closure(closures.constant(0.0), 1, H, 2.0)
    path = tmp_path / "u.field"
    export_field(u, path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1].replace("0.0", "zero", 1)
    path.write_text("\r\n".join(lines) + "\r\n")
    with pytest.raises(FieldFormatError) as err:
        import_field(path)
    assert err.value.line == 2


def test_sup_norm_below_floor_rejected(tmp_path):
    u = from_closure(closures.hat(2.0), 1, H, 2.0)
    path = tmp_path / "u.field"
    export_field(u, path)
    lines = path.read_text().splitlines()
    import json
    header = json.loads(lines[0])
    header["sup_norm"] = 1e-6
    path.write_text("\r\n".join([json.dumps(header)] + lines[1:]) + "\r\n")
    with pytest.raises(FieldFormatError):
        import_field(path)


def test_non_serializable_closure_rejected(tmp_path):
    from nlbellman.closures import Closure
    fancy = Closure(kind="custom", params={}, fn=lambda p: np.zeros(np.atleast_2d(p).shape[0]),
                    bound=0.0)
    u = ScalarField(1, H, 2.0, np.zeros(257), fancy)
    with pytest.raises(ValidationError):
        export_field(u, tmp_path / "u.field")
