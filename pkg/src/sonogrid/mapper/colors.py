"""dB to color mapping for the red-to-green overlay."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ValidationError

Rgba = tuple[int, int, int, int]


@dataclass(frozen=True)
class ColorStop:
    db: float
    rgba: Rgba

    def __post_init__(self) -> None:
        if len(self.rgba) != 4 or any(not 0 <= c <= 255 for c in self.rgba):
            raise ValidationError(f"rgba must be four bytes, got {self.rgba!r}")


# quiet green, amber anchored at the 65 dB health threshold, loud red
DEFAULT_STOPS = (
    ColorStop(40.0, (0, 200, 0, 180)),
    ColorStop(65.0, (220, 200, 0, 180)),
    ColorStop(90.0, (220, 0, 0, 180)),
)


def validate_stops(stops) -> tuple[ColorStop, ...]:
    stops = tuple(stops)
    if len(stops) < 2:
        raise ValidationError("need at least two color stops")
    for a, b in zip(stops, stops[1:]):
        if not a.db < b.db:
            raise ValidationError("color stops must be strictly increasing in db")
    return stops


def color_map(db: float, stops=DEFAULT_STOPS) -> Rgba:
    """Piecewise-linear per-channel interpolation, clamped to the end stops.

    Rounding is floor(x + 0.5) so browser-side mirrors (Math.round) produce
    byte-identical colors.
    """
    if db <= stops[0].db:
        return stops[0].rgba
    if db >= stops[-1].db:
        return stops[-1].rgba
    for lo, hi in zip(stops, stops[1:]):
        if db <= hi.db:
            t = (db - lo.db) / (hi.db - lo.db)
            return tuple(
                int(math.floor(lo.rgba[i] + (hi.rgba[i] - lo.rgba[i]) * t + 0.5))
                for i in range(4)
            )
    return stops[-1].rgba
