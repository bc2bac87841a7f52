"""Quantity parsing and unit normalization for answers and anchors.

Length units are normalized to meters. Angles stay in degrees, areas in
square meters, counts are unitless. An unknown unit is a parse failure, not
a silent pass-through.
"""

from __future__ import annotations

import re

# meters per unit
LENGTH_UNITS = {
    "mm": 0.001,
    "millimeter": 0.001,
    "millimeters": 0.001,
    "millimetre": 0.001,
    "millimetres": 0.001,
    "cm": 0.01,
    "centimeter": 0.01,
    "centimeters": 0.01,
    "centimetre": 0.01,
    "centimetres": 0.01,
    "m": 1.0,
    "meter": 1.0,
    "meters": 1.0,
    "metre": 1.0,
    "metres": 1.0,
    "km": 1000.0,
    "kilometer": 1000.0,
    "kilometers": 1000.0,
    "kilometre": 1000.0,
    "kilometres": 1000.0,
    "in": 0.0254,
    "inch": 0.0254,
    "inches": 0.0254,
    "ft": 0.3048,
    "foot": 0.3048,
    "feet": 0.3048,
}

ANGLE_UNITS = {"deg", "degree", "degrees", "°"}
AREA_UNITS = {"m2", "m^2", "m²", "sq m", "sqm", "square meter", "square meters",
              "square metre", "square metres"}

_NUMBER = r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?"
# number with an optional unit word glued on ("28.1cm", "0.31 meters", "136")
_QTY_RE = re.compile(
    rf"({_NUMBER})\s*(square\s+met(?:er|re)s?|sq\s*m|[a-zA-Z^°²0-9]*)"
)


class UnparsableQuantity(ValueError):
    pass


def parse_quantity(text: str) -> tuple[float, str]:
    """Parse the LAST "number [unit]" occurrence in text.

    Returns (value, dimension) with dimension one of "m", "deg", "m2", "".
    Length values are converted to meters. Raises UnparsableQuantity when no
    number is found or the trailing unit word is not recognized.
    """
    matches = [m for m in _QTY_RE.finditer(text)]
    if not matches:
        raise UnparsableQuantity(f"no numeric quantity in {text!r}")
    m = matches[-1]
    value = float(m.group(1))
    unit = (m.group(2) or "").strip().lower().rstrip(".,;:!?)")
    if unit == "":
        return value, ""
    if unit in LENGTH_UNITS:
        return value * LENGTH_UNITS[unit], "m"
    if unit in ANGLE_UNITS:
        return value, "deg"
    if re.sub(r"\s+", " ", unit) in AREA_UNITS:
        return value, "m2"
    raise UnparsableQuantity(f"unknown unit {unit!r} in {text!r}")


def format_value(value: float, sig: int = 3) -> str:
    """Fixed display form: sig significant digits, no exponent notation."""
    if value == 0:
        return "0"
    from math import floor, log10

    digits = sig - 1 - floor(log10(abs(value)))
    out = round(value, digits)
    if digits <= 0:
        return str(int(out))
    return f"{out:.{digits}f}"
