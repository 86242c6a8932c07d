"""Round-trip and corruption tests for the on-disk formats."""
from fractions import Fraction

import numpy as np
import pytest

from fedzkp.gf2 import BitVec
from fedzkp.lpn import XlpnParams, gen_instance, validate_instance
from fedzkp.model import RoundRecord, DetectionReport, init_model, make_embedding
from fedzkp.storage import (
    MAGIC,
    load_aggregate,
    load_checkpoint,
    load_credential,
    load_embedding_config,
    load_history,
    load_public_input,
    load_watermark,
    save_aggregate,
    save_checkpoint,
    save_credential,
    save_embedding_config,
    save_history,
    save_public_input,
    save_watermark,
)
from fedzkp.watermark import aggregate, hash_watermark

PARAMS = XlpnParams(m=48, l=32, tau=Fraction(1, 4))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


class TestCredentialFiles:
    def test_round_trip(self, tmp_path, rng):
        pub, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "cred.bin"
        save_credential(path, cred, PARAMS)
        back, params = load_credential(path)
        assert params == PARAMS
        assert back.s == cred.s and back.e == cred.e

    def test_magic_present(self, tmp_path, rng):
        _, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "cred.bin"
        save_credential(path, cred, PARAMS)
        assert path.read_bytes()[:7] == MAGIC

    def test_rejects_wrong_kind(self, tmp_path, rng):
        pub, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "x.bin"
        save_public_input(path, pub, PARAMS)
        with pytest.raises(ValueError, match="kind"):
            load_credential(path)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"not a real file at all")
        with pytest.raises(ValueError, match="FEDZKP"):
            load_credential(path)

    def test_rejects_truncation(self, tmp_path, rng):
        _, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "cred.bin"
        save_credential(path, cred, PARAMS)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(ValueError, match="truncated"):
            load_credential(path)

    def test_rejects_trailing_bytes(self, tmp_path, rng):
        _, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "cred.bin"
        save_credential(path, cred, PARAMS)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ValueError, match="trailing"):
            load_credential(path)

    def test_rejects_tampered_weight_field(self, tmp_path, rng):
        _, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "cred.bin"
        save_credential(path, cred, PARAMS)
        data = bytearray(path.read_bytes())
        data[8 + 4 + 4 + 8 + 8] ^= 0xFF  # weight field inside the header
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError):
            load_credential(path)


class TestPublicInputFiles:
    def test_round_trip_still_validates(self, tmp_path, rng):
        pub, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "pub.bin"
        save_public_input(path, pub, PARAMS)
        back, params = load_public_input(path)
        assert back.A == pub.A and back.y == pub.y
        assert validate_instance(back, cred, params)

    def test_file_never_contains_credential(self, tmp_path, rng):
        # a weight-w noise pattern must not be findable in the public file
        pub, cred = gen_instance(PARAMS, rng)
        path = tmp_path / "pub.bin"
        save_public_input(path, pub, PARAMS)
        blob = path.read_bytes()
        assert cred.s.to_bytes() not in blob[20:]
        assert cred.e.to_bytes() not in blob[20:]


class TestAggregateFiles:
    def test_round_trip_preserves_watermark(self, tmp_path, rng):
        parts = [gen_instance(PARAMS, rng)[0] for _ in range(4)]
        agg = aggregate(parts)
        path = tmp_path / "agg.bin"
        save_aggregate(path, agg, PARAMS)
        back, params = load_aggregate(path)
        assert len(back.parts) == 4
        assert hash_watermark(back, 64) == hash_watermark(agg, 64)

    def test_dimension_mismatch_rejected(self, tmp_path, rng):
        parts = [gen_instance(PARAMS, rng)[0] for _ in range(2)]
        agg = aggregate(parts)
        other = XlpnParams(m=48, l=24, tau=Fraction(1, 4))
        with pytest.raises(ValueError, match="dimensions"):
            save_aggregate(tmp_path / "agg.bin", agg, other)


class TestWatermarkFiles:
    def test_round_trip(self, tmp_path, rng):
        parts = [gen_instance(PARAMS, rng)[0] for _ in range(3)]
        wm = hash_watermark(aggregate(parts), 96)
        path = tmp_path / "wm.json"
        save_watermark(path, wm)
        back = load_watermark(path)
        assert back.n == 96 and back.h == wm.h

    def test_stored_as_hex_text(self, tmp_path, rng):
        parts = [gen_instance(PARAMS, rng)[0] for _ in range(3)]
        wm = hash_watermark(aggregate(parts), 64)
        path = tmp_path / "wm.json"
        save_watermark(path, wm)
        text = path.read_text()
        assert '"n": 64' in text
        assert wm.h.to_bytes().hex() in text


class TestCheckpoints:
    def test_round_trip_bitwise(self, tmp_path, rng):
        state = init_model(64, rng, d_in=8, classes=5)
        path = tmp_path / "model.bin"
        save_checkpoint(path, state)
        back = load_checkpoint(path)
        assert (back.d_in, back.omega, back.classes) == (8, 64, 5)
        assert np.array_equal(back.theta, state.theta)
        assert np.array_equal(back.W_gamma, state.W_gamma)

    def test_rejects_width_mismatch(self, tmp_path, rng):
        state = init_model(64, rng, d_in=8, classes=5)
        path = tmp_path / "model.bin"
        save_checkpoint(path, state)
        data = bytearray(path.read_bytes())
        data[8 + 4] ^= 0x01  # declared width field
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_loaded_arrays_are_writable(self, tmp_path, rng):
        state = init_model(32, rng, d_in=4, classes=3)
        path = tmp_path / "model.bin"
        save_checkpoint(path, state)
        back = load_checkpoint(path)
        back.theta[0] = 123.0  # frombuffer views would blow up here
        assert back.theta[0] == 123.0


class TestEmbeddingConfigFiles:
    def test_seed_regenerates_identical_directions(self, tmp_path):
        path = tmp_path / "embed.json"
        save_embedding_config(path, omega=128, n=32, seed=99, lam=2.0, mu_hinge=1.5)
        a = load_embedding_config(path)
        b = load_embedding_config(path)
        assert np.array_equal(a.E, b.E)
        assert a.lam == 2.0 and a.mu_hinge == 1.5
        reference = make_embedding(128, 32, np.random.default_rng(99),
                                   lam=2.0, mu_hinge=1.5)
        assert np.array_equal(a.E, reference.E)

    def test_directions_not_in_file(self, tmp_path):
        path = tmp_path / "embed.json"
        save_embedding_config(path, omega=512, n=256, seed=1, lam=1.0, mu_hinge=0.5)
        assert path.stat().st_size < 200


class TestHistoryFiles:
    def test_round_trip(self, tmp_path):
        history = [
            RoundRecord(round=1, report=DetectionReport(r=0.5, err=16), accuracy=0.25),
            RoundRecord(round=2, report=DetectionReport(r=1.0, err=0), accuracy=0.875),
        ]
        path = tmp_path / "history.csv"
        save_history(path, history)
        rows = load_history(path)
        assert rows == [(1, 0.5, 0.25), (2, 1.0, 0.875)]

    def test_header_checked(self, tmp_path):
        path = tmp_path / "history.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError, match="header"):
            load_history(path)
