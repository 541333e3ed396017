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
Logging setup for the command line tools: colored output and an extra TRACE
level below DEBUG for per-op tape events.
"""

# Core packages
import logging

# 3rd party packages
import coloredlogs

# Project packages

kTraceLevel = logging.DEBUG - 5


def _trace(self: logging.Logger, msg: str, *args, **kwargs) -> None:
    if self.isEnabledFor(kTraceLevel):
        self._log(kTraceLevel, msg, args, **kwargs)  # pylint: disable=protected-access


def initialize(log_level: str) -> None:
    """
    Register the TRACE level and install colored console logging. Should be
    called exactly once, from a console-script entry point.
    """
    setattr(logging, 'TRACE', kTraceLevel)
    logging.addLevelName(kTraceLevel, 'TRACE')
    setattr(logging.Logger, 'trace', _trace)

    coloredlogs.install(fmt='%(asctime)s %(levelname)s %(name)s - %(message)s',
                        level=log_level.upper())

    # pandas pulls this in when it is installed
    logging.getLogger('numexpr').setLevel(logging.WARNING)


__api__ = [
    'initialize'
]
