# Copyright (C) 2021, edgecloud contributors
#
# This file is part of edgecloud
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from edgecloud.exceptions import EdgeCloudException


class ShapeException(EdgeCloudException):
    def __init__(self, msg=None):
        if msg is None:
            msg = "Shape mismatch"
        super(ShapeException, self).__init__(msg)


class TrainingDivergedException(EdgeCloudException):
    def __init__(self, msg=None, diagnostics=None):
        if msg is None:
            msg = "Training diverged"
        self.diagnostics = diagnostics or {}
        super(TrainingDivergedException, self).__init__(msg)


class CheckpointException(EdgeCloudException):
    def __init__(self, msg=None):
        if msg is None:
            msg = "Unable to read checkpoint"
        super(CheckpointException, self).__init__(msg)
