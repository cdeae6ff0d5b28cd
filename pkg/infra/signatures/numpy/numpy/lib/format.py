"""Signature stub: read_array as of NumPy 1.24.3."""

_MAX_HEADER_SIZE = 10000


def read_array(fp, allow_pickle=False, pickle_kwargs=None, *, max_header_size=_MAX_HEADER_SIZE):
    ...
