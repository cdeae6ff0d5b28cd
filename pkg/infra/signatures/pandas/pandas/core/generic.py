"""Signature stub: NDFrame.interpolate (pandas 1.5 layout)."""


class NDFrame:
    def interpolate(
        self,
        method="linear",
        *,
        axis=0,
        limit=None,
        inplace=False,
        limit_direction=None,
        limit_area=None,
        downcast=None,
        **kwargs,
    ):
        ...
