# Copyright 2019 bo-invariance Developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import pytest

import numpy as np

import bo_invariance as bo
from bo_invariance.forms import clear_form_cache


@pytest.fixture(scope="function", autouse=True)
def clear_forms():
    clear_form_cache()


@pytest.fixture(scope="function", autouse=True)
def isolated_output(tmp_path, monkeypatch):
    monkeypatch.setenv("BO_INVARIANCE_OUTPUT", (tmp_path / "output").as_posix())


@pytest.fixture(scope="function")
def cosine():
    return bo.SpectralField.from_modes({1: 0.5})


@pytest.fixture(scope="function")
def smooth_field():
    return bo.SpectralField.from_modes({1: 0.3, 2: 0.1 - 0.05j, 3: 0.02j}, n_modes=8)


@pytest.fixture(scope="function")
def small_ensemble():
    return bo.EnsembleSpec(40, base_seed=7)


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(12345)
