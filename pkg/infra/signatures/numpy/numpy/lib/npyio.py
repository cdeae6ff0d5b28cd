"""Signature stub: NpzFile as of NumPy 1.24.3."""
from numpy.lib import format


class NpzFile:
    def __init__(self, fid, own_fid=False, allow_pickle=False, pickle_kwargs=None, *,
                 max_header_size=format._MAX_HEADER_SIZE):
        ...
