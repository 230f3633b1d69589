"""Player identities and the shared value domain."""

from __future__ import annotations

import enum


class Player(str, enum.Enum):
    S = "S"
    R0 = "R0"
    R1 = "R1"

    def __str__(self) -> str:
        return self.value


PLAYERS = (Player.S, Player.R0, Player.R1)

# Slot of each player in a freshly prepared triplet; amplitude index is 9a+3b+c
# with (a, b, c) the digits of slots (0, 1, 2).
HOME_SLOT = {Player.S: 0, Player.R0: 1, Player.R1: 2}

# The "inconsistent" flag / output value. Kept as None so that the value domain
# is {0, 1, None} and maps directly onto JSON null.
BOTTOM = None


def format_value(v):
    """Render a protocol value for reports: 0, 1, '⊥' or 'abort'."""
    if v is BOTTOM:
        return "⊥"
    return v
