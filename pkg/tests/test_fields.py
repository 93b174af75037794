import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besov_sparse.errors import FormatError, InvalidInputError
from besov_sparse.fields import (Grid3, LevelSet, ScalarField, VectorField, component_superlevel, linf_norm,
                                 read_field, scalar_superlevel, signed_part, write_field)


class TestGrid3:
    def test_spacing_and_centres(self):
        g = Grid3(16, 4.0)
        assert g.h == 0.25
        assert g.voxel_volume == 0.25 ** 3
        assert g.x[0] == pytest.approx(-2.0 + 0.125)
        assert g.x[-1] == pytest.approx(2.0 - 0.125)

    @pytest.mark.parametrize("n", [0, 4, 12, 33, -8])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(InvalidInputError, match="power of two"):
            Grid3(n)

    @pytest.mark.parametrize("L", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_length(self, L):
        with pytest.raises(InvalidInputError):
            Grid3(16, L)

    def test_radius_is_periodic(self):
        g = Grid3(16, 2.0)
        r = g.radius((0.9, 0.0, 0.0))
        # the cell at x=-0.9375 is 0.1625 away through the boundary
        i = int(np.argmin(np.abs(g.x + 0.9375)))
        assert r[i, 7, 7] == pytest.approx(math.sqrt(0.1625 ** 2 + 2 * 0.0625 ** 2))
        assert r.max() <= math.sqrt(3) * 1.0 + 1e-12

    def test_index_and_center_round_trip(self):
        g = Grid3(8, 1.0)
        for idx in [(0, 0, 0), (7, 3, 5)]:
            assert g.index_of(g.center_of(idx)) == idx
        assert g.index_of((1.0 + g.x[2], g.x[0], g.x[0])) == (2, 0, 0)

    def test_wavenumbers(self):
        g = Grid3(8, 2 * math.pi)
        assert sorted(g.k1d) == list(range(-4, 4))
        assert g.kmag.shape == (8, 8, 5)
        assert g.k_nyquist == 4.0


class TestFields:
    def test_shape_checked(self):
        g = Grid3(8)
        with pytest.raises(InvalidInputError):
            ScalarField(g, np.zeros((8, 8, 4)))
        with pytest.raises(InvalidInputError):
            VectorField(g, np.zeros((2, 8, 8, 8)))

    def test_non_finite_rejected(self):
        g = Grid3(8)
        a = np.zeros(g.shape)
        a[1, 2, 3] = np.nan
        with pytest.raises(InvalidInputError, match="non-finite"):
            ScalarField(g, a)

    def test_data_is_read_only(self):
        f = ScalarField.zeros(Grid3(8))
        with pytest.raises(ValueError):
            f.data[0, 0, 0] = 1.0

    def test_components_are_one_based(self):
        g = Grid3(8)
        data = np.stack([np.full(g.shape, float(i)) for i in (1, 2, 3)])
        u = VectorField(g, data)
        assert u.component(2).data[0, 0, 0] == 2.0
        with pytest.raises(InvalidInputError):
            u.component(0)
        assert np.array_equal(VectorField.from_components(*[u.component(i) for i in (1, 2, 3)]).data, data)

    def test_linf_over_components(self):
        g = Grid3(8)
        data = np.zeros((3,) + g.shape)
        data[2, 1, 1, 1] = -5.0
        assert linf_norm(VectorField(g, data)) == 5.0
        assert linf_norm(ScalarField.zeros(g)) == 0.0


class TestLevelSets:
    def test_signed_parts(self):
        v = np.array([-2.0, 0.0, 3.0])
        assert list(signed_part(v, "+")) == [0.0, 0.0, 3.0]
        assert list(signed_part(v, "-")) == [2.0, 0.0, 0.0]
        with pytest.raises(InvalidInputError):
            signed_part(v, "x")

    def test_component_superlevel_threshold(self):
        g = Grid3(8)
        data = np.zeros((3,) + g.shape)
        data[0, 0, 0, 0] = 4.0
        data[0, 1, 0, 0] = 2.5
        data[1, 2, 0, 0] = -3.0
        u = VectorField(g, data)
        S = component_superlevel(u, 1, "+", 0.5)
        assert S.threshold == 2.0
        assert np.count_nonzero(S.mask) == 2
        Sm = component_superlevel(u, 2, "-", 0.5)
        assert Sm.mask[2, 0, 0] and np.count_nonzero(Sm.mask) == 1

    @pytest.mark.parametrize("lam", [0.0, 1.0, -0.1])
    def test_level_range(self, lam):
        u = VectorField.zeros(Grid3(8))
        with pytest.raises(InvalidInputError):
            component_superlevel(u, 1, "+", lam)

    def test_complement_and_measure(self):
        g = Grid3(8, 2.0)
        mask = np.zeros(g.shape, bool)
        mask[:2] = True
        S = LevelSet(g, mask)
        assert S.volume_fraction == 0.25
        assert S.measure == pytest.approx(2.0)
        assert S.complement().volume_fraction == 0.75

    def test_scalar_superlevel_is_strict(self):
        g = Grid3(8)
        f = ScalarField(g, np.full(g.shape, 1.5))
        assert not scalar_superlevel(f, 1.5).mask.any()


class TestBSF1:
    def test_round_trip_vector(self, tmp_path, rng):
        g = Grid3(8, 3.0)
        u = VectorField(g, rng.standard_normal((3,) + g.shape))
        p = tmp_path / "u.bsf1"
        write_field(u, p)
        v = read_field(p)
        assert isinstance(v, VectorField)
        assert v.grid == g
        assert np.array_equal(v.data, u.data)

    def test_x_index_fastest(self, tmp_path):
        g = Grid3(8)
        a = np.zeros(g.shape)
        a[1, 0, 0] = 7.0
        p = tmp_path / "f.bsf1"
        write_field(ScalarField(g, a), p)
        raw = p.read_bytes()
        assert struct.unpack_from("<d", raw, 28 + 8)[0] == 7.0

    def test_header_layout(self, tmp_path):
        g = Grid3(8, 2.5)
        p = tmp_path / "f.bsf1"
        write_field(ScalarField.zeros(g), p)
        raw = p.read_bytes()
        assert raw[:4] == b"BSF1"
        assert struct.unpack_from("<BBH3Id", raw, 4) == (1, 1, 0, 8, 8, 8, 2.5)
        assert len(raw) == 28 + 8 * 512

    def _corrupt(self, tmp_path, offset, payload):
        p = tmp_path / "f.bsf1"
        write_field(ScalarField.zeros(Grid3(8)), p)
        raw = bytearray(p.read_bytes())
        raw[offset:offset + len(payload)] = payload
        p.write_bytes(bytes(raw))
        return p

    @pytest.mark.parametrize("offset,payload,fragment", [
        (0, b"XXXX", "magic"),
        (4, b"\x02", "version"),
        (5, b"\x02", "component count"),
        (6, b"\x01", "reserved"),
        (12, struct.pack("<I", 16), "dimension"),
    ])
    def test_format_errors(self, tmp_path, offset, payload, fragment):
        p = self._corrupt(tmp_path, offset, payload)
        with pytest.raises(FormatError, match=fragment) as exc:
            read_field(p)
        assert "byte offset" in str(exc.value)

    def test_truncated_and_trailing(self, tmp_path):
        p = tmp_path / "f.bsf1"
        write_field(ScalarField.zeros(Grid3(8)), p)
        raw = p.read_bytes()
        p.write_bytes(raw[:-8])
        with pytest.raises(FormatError):
            read_field(p)
        p.write_bytes(raw + b"\0")
        with pytest.raises(FormatError):
            read_field(p)
        p.write_bytes(raw[:10])
        with pytest.raises(FormatError):
            read_field(p)

    def test_non_power_of_two_is_invalid_input(self, tmp_path):
        p = tmp_path / "f.bsf1"
        hdr = struct.pack("<4sBBH3Id", b"BSF1", 1, 1, 0, 6, 6, 6, 1.0)
        p.write_bytes(hdr + bytes(8 * 216))
        with pytest.raises(InvalidInputError):
            read_field(p)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1, 3]), st.floats(0.1, 100.0))
    def test_round_trip_property(self, tmp_path_factory, seed, ncomp, L):
        g = Grid3(8, L)
        rng = np.random.default_rng(seed)
        shape = g.shape if ncomp == 1 else (3,) + g.shape
        f = (ScalarField if ncomp == 1 else VectorField)(g, rng.standard_normal(shape) * 1e3)
        p = tmp_path_factory.mktemp("bsf") / "f.bsf1"
        write_field(f, p)
        back = read_field(p)
        assert back.grid == g and np.array_equal(back.data, f.data)
