"""Signature stub: DatetimeIndex.to_series (pandas 1.x layout)."""
from pandas._libs import lib


class DatetimeIndex:
    def to_series(self, keep_tz=lib.no_default, index=None, name=None):
        ...
