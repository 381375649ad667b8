"""Human-readable formatting of results."""
from minicalc import arith


def _group(digits):
    groups = []
    while len(digits) > 3:
        groups.insert(0, digits[-3:])
        digits = digits[:-3]
    groups.insert(0, digits)
    return ",".join(groups)


def format_result(value):
    """Format an integer with thousands separators."""
    sign = "-" if value < 0 else ""
    return sign + _group(str(arith.absolute(value)))
