# Copyright 2026 The histocap Authors.
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

import pytest

import histocap


def test_metric_examples():
    assert histocap.bleu4("the cat the cat on mat", "the cat sat on the mat") == pytest.approx(0.3433, abs=1e-4)
    assert histocap.rouge_l("police kill the gunman", "police killed the gunman") == pytest.approx(0.75)
    assert histocap.meteor("a b c", "a b c") == pytest.approx(1 - 0.5 / 27)
    assert histocap.meteor("the cat", "cat the") == pytest.approx(0.5)


def test_caption_round_trip():
    text = histocap.render_caption("small intestine - terminal ileum", "male",
                                   "6 pieces, prominent lymphoid component in 4 of 6 pieces.")
    assert text == ("this is a small intestine - terminal ileum tissue from a male patient and it has "
                    "6 pieces, prominent lymphoid component in 4 of 6 pieces.")
    fields = histocap.parse_caption(text)
    assert fields["tissue_type"] == "small intestine - terminal ileum"
    assert fields["sex"] == "male"
    assert histocap.parse_caption("no delimiters here") is None
    assert histocap.tokenize("2 pieces.") == ["2", "pieces", "."]
    assert histocap.tissue_accuracy(text, "Small intestine - terminal ileum") == 1


def test_bert_base_counts():
    c = histocap.count_params()
    assert c["layer_core"] == 7_087_872
    assert c["last_n_plus_xattn"][3] - c["last_n_plus_xattn"][2] == 7_087_872
    assert abs(c["total"] - 137e6) / 137e6 < 0.02


def test_config_validation_and_errors():
    cfg = histocap.default_config()
    assert cfg["seed"] == 0
    assert len(histocap.config_hash(cfg)) == 16
    with pytest.raises(ValueError):
        histocap.config_hash({"no-such-key": 1})
    with pytest.raises(ValueError):
        histocap.count_params(bert_base=False)
    assert issubclass(histocap.CorruptionError, histocap.DataError)
    assert issubclass(histocap.DataError, histocap.HistocapError)


def test_tiny_pipeline(tmp_path):
    cfg = histocap.default_config()
    cfg.update({"train-size": 6, "val-size": 3, "test-size": 3, "epochs": 2, "accumulation": 3,
                "decoder-layers": 1, "decoder-hidden": 16, "decoder-heads": 2, "decoder-ffn": 32,
                "pool-hidden": 8, "seed": 5})
    root = str(tmp_path)
    with pytest.raises(histocap.DataError):
        histocap.extract_features(cfg, root)
    entries = histocap.gen_corpus(cfg, root)
    assert len(entries) == 12
    stats = histocap.extract_features(cfg, root)
    assert stats["encoded"] + stats["skipped"] == 12
    result = histocap.train(cfg, root)
    assert len(result["epoch_losses"]) == 2
    assert all(math.isfinite(a) and math.isfinite(b) for a, b in result["epoch_losses"])
    again = histocap.evaluate(cfg, root, "test")
    assert again == result["test"]
    test_ids = [e["slide_id"] for e in entries if e["split"] == "test"]
    assert isinstance(histocap.caption(cfg, root, test_ids[0]), str)
    with pytest.raises(histocap.DataError):
        histocap.caption(cfg, root, "missing-slide")
