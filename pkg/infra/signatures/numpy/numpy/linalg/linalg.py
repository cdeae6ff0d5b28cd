"""Signature stub: lstsq as of NumPy 1.24.3."""


def lstsq(a, b, rcond="warn"):
    ...
