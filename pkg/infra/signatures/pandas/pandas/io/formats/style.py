"""Signature stub: Styler methods carrying curated DABCs (pandas 1.5 layout)."""


class Styler:
    def bar(
        self,
        subset=None,
        axis=0,
        *,
        color=None,
        cmap=None,
        width=100,
        height=100,
        align="mid",
        vmin=None,
        vmax=None,
        props="width: 10em;",
    ):
        ...

    def to_latex(
        self,
        buf=None,
        *,
        column_format=None,
        position=None,
        position_float=None,
        hrules=None,
        clines=None,
        label=None,
        caption=None,
        sparse_index=None,
        sparse_columns=None,
        multirow_align=None,
        multicol_align=None,
        siunitx=False,
        environment=None,
        encoding=None,
        convert_css=False,
    ):
        ...
