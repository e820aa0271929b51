# Copyright 2026 The sonarleaf Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math
import os

import numpy as np
import pytest

import sonarleaf


def test_attenuation_values():
    assert sonarleaf.thorp_db_per_km(1000.0) == pytest.approx(0.06900409046574006, rel=1e-12)
    assert sonarleaf.attenuate(0.0, 1.0) == pytest.approx(0.9996546718755381, rel=1e-12)
    assert sonarleaf.attenuate(10000.0, 2.0) < sonarleaf.attenuate(10000.0, 1.0)


def test_generated_corpus(tiny):
    config, data, manifest = tiny
    rows = sonarleaf.load_manifest(manifest)
    assert len(rows) == 5 * 3 * 7
    splits = [r["split"] for r in rows]
    assert splits.count("train") == 75 and splits.count("val") == 15 and splits.count("test") == 15
    samples, rate = sonarleaf.read_wav(rows[0]["path"])
    assert rate == 16000
    assert samples.dtype == np.int16 and samples.shape == (4000,)


def test_untrained_model_refuses_eval():
    model = sonarleaf.Model("[model]\nnum_filters=4\nencoder_channels=4\nclip_seconds=0.1\n", seed=1)
    assert model.pooling == "attention" and model.use_ctdsv
    centers = model.center_hz
    assert len(centers) == 4 and list(centers) == sorted(centers)
    audio = np.zeros((2, model.clip_samples), dtype=np.float32)
    with pytest.raises(sonarleaf.ConfigError, match="uninitialized"):
        model.logits(audio)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(sonarleaf.ConfigError):
        sonarleaf.Model("[model]\npooling=mean\n")
    with pytest.raises(sonarleaf.IoError):
        sonarleaf.Model.load(str(tmp_path / "missing.ckpt"))
    model = sonarleaf.Model("[model]\nnum_filters=4\nencoder_channels=4\nclip_seconds=0.1\n")
    with pytest.raises(sonarleaf.InputError):
        model.logits(np.zeros((2, 7), dtype=np.float32))
    assert issubclass(sonarleaf.ConfigError, sonarleaf.Error)


def test_train_evaluate_analyze(tiny):
    config, _, _ = tiny
    model, history, best_epoch = sonarleaf.train(config)
    assert len(history) == 1 and best_epoch == 1
    assert math.isfinite(history[0]["train_loss"])
    metrics = sonarleaf.evaluate(model, config)
    assert metrics["total"] == 15
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert sum(map(sum, metrics["confusion"])) == 15
    curve = sonarleaf.delta_curve(model, config, "S2")
    assert len(curve["delta"]) == 4
    assert 0 <= curve["active_filters"] <= 4


def test_trained_model_inference_and_checkpoint(tiny, tmp_path):
    config, _, manifest = tiny
    model, _, _ = sonarleaf.train(config)
    rows = [r for r in sonarleaf.load_manifest(manifest) if r["split"] == "test"]
    audio = np.stack([sonarleaf.read_wav(r["path"])[0] / 32768.0 for r in rows]).astype(np.float32)
    ctdsv = np.array([r["ctdsv"] for r in rows])
    logits = model.logits(audio, ctdsv)
    assert logits.shape == (len(rows), 5)
    assert np.all(np.isfinite(logits))
    labels = model.predict(audio, ctdsv)
    assert labels == [sonarleaf.CLASSES[i] for i in logits.argmax(axis=1)]

    path = tmp_path / "m.ckpt"
    model.save(str(path))
    again = sonarleaf.Model.load(str(path))
    assert np.array_equal(again.logits(audio, ctdsv), logits)
    assert again.config_ini == model.config_ini


def test_cli_in_process(tiny, tmp_path):
    config, data, _ = tiny
    ini = tmp_path / "tiny.ini"
    ini.write_text(config)
    code, out, err = sonarleaf.run_cli(["train", "-c", str(ini), "--out", str(tmp_path / "run")])
    assert code == 0, err
    assert os.path.exists(tmp_path / "run" / "model.ckpt")
    code, _, err = sonarleaf.run_cli(["train", "--pooling", "mean", "--out", str(tmp_path / "x")])
    assert code == 2 and err.startswith("error[config]")
