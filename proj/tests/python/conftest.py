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
import os
import sys

import pytest

# ctest points this at the build tree; an installed wheel needs nothing.
_build = os.environ.get("SONARLEAF_PYTHON_DIR")
if _build:
    sys.path.insert(0, _build)

TINY = """[model]
num_filters=4
kernel_width=201
encoder_channels=4,4
attn_dim=4
meta_hidden=4
clip_seconds=0.25
[data]
data_dir={data}
clips_per_cell=7
gen_seed=3
[train]
epochs=1
batch_size=8
seeds=2
"""


@pytest.fixture(scope="session")
def tiny(tmp_path_factory):
    import sonarleaf

    sonarleaf.set_num_threads(1)
    data = tmp_path_factory.mktemp("data")
    config = TINY.format(data=data)
    manifest = sonarleaf.gen_dataset(str(data), config)
    return config, data, manifest
