import numpy as np
import pytest

from isograph import DataFormatError, build_model, load_checkpoint, save_checkpoint
from isograph.checkpoint import MAGIC


class TestCheckpointRoundTrip:
    def test_round_trip_preserves_everything(self, tmp_path):
        model = build_model(9, [(3, 2), (2, 1)], widths=(16, 8, 2), mode="fast",
                            softmax_axis="across_kernels", seed=4)
        path = tmp_path / "model.npz"
        save_checkpoint(path, model)
        back = load_checkpoint(path)
        assert back.input_size == model.input_size
        assert len(back.layers) == 2
        for a, b in zip(model.layers, back.layers):
            assert a.config == b.config
            assert np.array_equal(a.kernels, b.kernels)
        for key in ("w1", "b1", "w2", "b2", "w3", "b3"):
            assert np.array_equal(getattr(model.mlp, key), getattr(back.mlp, key))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / "nope.npz")

    def test_foreign_npz_rejected(self, tmp_path):
        path = tmp_path / "foreign.npz"
        np.savez(path, stuff=np.zeros(3))
        with pytest.raises(DataFormatError, match="header"):
            load_checkpoint(path)

    def test_bad_magic_rejected(self, tmp_path):
        import json

        path = tmp_path / "badmagic.npz"
        header = json.dumps({"magic": "something-else", "version": 1})
        np.savez(path, header=np.frombuffer(header.encode(), dtype=np.uint8))
        with pytest.raises(DataFormatError, match="magic"):
            load_checkpoint(path)

    def test_future_version_rejected(self, tmp_path):
        import json

        path = tmp_path / "future.npz"
        header = json.dumps({"magic": MAGIC, "version": 99})
        np.savez(path, header=np.frombuffer(header.encode(), dtype=np.uint8))
        with pytest.raises(DataFormatError, match="version"):
            load_checkpoint(path)
