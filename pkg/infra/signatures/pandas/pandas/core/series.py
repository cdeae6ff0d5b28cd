"""Signature stub: Series.between (pandas 1.5 layout)."""


class Series:
    def between(self, left, right, inclusive="both"):
        ...
