from typing import List, Tuple


def parse_range(value: str) -> Tuple[float, float]:
    """Parses a ``min:max`` flag value into a pair of floats

    Parameters
    ----------
    value : str
        range such as ``-50:0``; negative bounds need the ``--re=-50:0``
        form on the command line

    Returns
    -------
    Tuple[float, float]
        (min, max) with min < max

    Raises
    ------
    ValueError
        if the value is not two numbers separated by a colon, or min >= max
    """
    low, sep, high = str(value).partition(":")
    if not sep:
        raise ValueError(f"Expected 'min:max', got '{value}'")
    low, high = float(low), float(high)
    if not low < high:
        raise ValueError(f"Range minimum {low} must be below maximum {high}")
    return low, high


def format_range(bounds: Tuple[float, float]) -> str:
    return f"{bounds[0]:g}:{bounds[1]:g}"


def parse_steps(value: str) -> List[int]:
    """Splits a comma separated list of step counts, e.g. ``320,640,1280``"""
    return [int(token) for token in str(value).split(",") if token.strip()]
