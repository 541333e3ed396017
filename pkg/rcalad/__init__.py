# Copyright 2023 RCALAD Developers, All rights reserved.
#
#  This file is part of RCALAD.
#
#  RCALAD is free software: you can redistribute it and/or modify it under the
#  terms of the GNU General Public License as published by the Free Software
#  Foundation, either version 3 of the License, or (at your option) any later
#  version.
#
#  RCALAD is distributed in the hope that it will be useful, but WITHOUT ANY
#  WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR
#  A PARTICULAR PURPOSE.  See the GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License along with
#  RCALAD.  If not, see <http://www.gnu.org/licenses/
"""
Adversarially learned anomaly detection with complete cycle consistency and a
supplementary distribution, on a small reverse-mode autodiff core.
"""

# Core packages

# 3rd party packages

# Project packages
from rcalad.version import __version__
