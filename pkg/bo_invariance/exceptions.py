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


class BOInvarianceException(Exception):
    pass


class InvalidGrid(BOInvarianceException):
    pass


class InvalidField(BOInvarianceException):
    pass


class InvalidParameters(BOInvarianceException):
    pass


class StepRejected(BOInvarianceException):
    pass


class SeriesDidNotConverge(BOInvarianceException):
    pass


class BudgetExceeded(BOInvarianceException):
    pass


class UnknownForm(BOInvarianceException):
    pass


class InvalidConfig(BOInvarianceException):
    pass


class InvalidArchive(BOInvarianceException):
    pass


class InvalidEnsembleFile(InvalidArchive):
    pass


class UninitializedRun(BOInvarianceException):
    pass
