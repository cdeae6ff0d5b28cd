"""Signature stub: DataFrame methods carrying curated DABCs (pandas 1.5 layout)."""
from pandas.core.generic import NDFrame


class DataFrame(NDFrame):
    def to_gbq(
        self,
        destination_table,
        project_id=None,
        chunksize=None,
        reauth=False,
        if_exists="fail",
        auth_local_webserver=True,
        table_schema=None,
        location=None,
        progress_bar=True,
        credentials=None,
    ):
        ...

    def append(self, other, ignore_index=False, verify_integrity=False, sort=False):
        ...
