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

"""Python bindings for the histocap slide captioning toolkit."""

from ._core import (
    CorruptionError,
    DataError,
    HistocapError,
    NumericError,
    bleu4,
    caption,
    config_hash,
    count_params,
    default_config,
    evaluate,
    extract_features,
    gen_corpus,
    meteor,
    parse_caption,
    render_caption,
    rouge_l,
    tissue_accuracy,
    tokenize,
    train,
)

__all__ = [
    "CorruptionError",
    "DataError",
    "HistocapError",
    "NumericError",
    "bleu4",
    "caption",
    "config_hash",
    "count_params",
    "default_config",
    "evaluate",
    "extract_features",
    "gen_corpus",
    "meteor",
    "parse_caption",
    "render_caption",
    "rouge_l",
    "tissue_accuracy",
    "tokenize",
    "train",
]
