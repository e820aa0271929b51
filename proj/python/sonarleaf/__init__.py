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
"""Learnable Gabor frontend classifier for underwater acoustic clips."""

from ._core import (
    ConfigError,
    Error,
    InputError,
    InternalError,
    IoError,
    Model,
    NumericalError,
    attenuate,
    delta_curve,
    evaluate,
    gen_dataset,
    load_manifest,
    num_threads,
    read_wav,
    run_cli,
    set_num_threads,
    thorp_db_per_km,
    train,
)

# Logit order.
CLASSES = ("Tug", "Tanker", "Cargo", "Passengership", "Background")

__all__ = [
    "CLASSES",
    "ConfigError",
    "Error",
    "InputError",
    "InternalError",
    "IoError",
    "Model",
    "NumericalError",
    "attenuate",
    "delta_curve",
    "evaluate",
    "gen_dataset",
    "load_manifest",
    "num_threads",
    "read_wav",
    "run_cli",
    "set_num_threads",
    "thorp_db_per_km",
    "train",
]
