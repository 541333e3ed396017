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
Variant toggles: which of the optional objective terms are enabled. The six
named variants are fixed toggle sets; any other mix is also accepted.
"""

# Core packages
import typing as tp
import dataclasses

# 3rd party packages

# Project packages
from rcalad.core.exceptions import ConfigurationError


@dataclasses.dataclass(frozen=True)
class Toggles():
    use_dxx: bool = True
    use_dzz: bool = True
    use_dxxzz: bool = True
    use_sigma: bool = True

    def discriminators(self) -> tp.List[str]:
        """Discriminators that have terms in the objective."""
        ret = ['dxz']
        if self.use_dxx:
            ret.append('dxx')
        if self.use_dzz:
            ret.append('dzz')
        if self.use_dxxzz:
            ret.append('dxxzz')
        return ret

    def n_discriminator_terms(self) -> int:
        return 2 + 2 * (self.use_dxx + self.use_dzz + self.use_dxxzz) + self.use_sigma

    def n_generator_terms(self) -> int:
        return 1 + self.use_dxx + self.use_dzz + self.use_dxxzz + self.use_sigma

    def as_dict(self) -> tp.Dict[str, bool]:
        return dataclasses.asdict(self)


kVariants = {
    'ali': Toggles(False, False, False, False),
    'alice': Toggles(True, False, False, False),
    'alad': Toggles(True, True, False, False),
    'calad': Toggles(True, True, True, False),
    'ralad': Toggles(True, True, False, True),
    'rcalad': Toggles(True, True, True, True),
}


def variant_toggles(name: str) -> Toggles:
    key = name.lower()
    if key not in kVariants:
        raise ConfigurationError(
            f"Unknown variant '{name}': must be one of {list(kVariants)}")
    return kVariants[key]


def variant_name(toggles: Toggles) -> tp.Optional[str]:
    """The named variant with exactly these toggles, or None for custom mixes."""
    for name, t in kVariants.items():
        if t == toggles:
            return name
    return None


__api__ = [
    'Toggles',
    'kVariants',
    'variant_toggles',
    'variant_name'
]
