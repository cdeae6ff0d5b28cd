"""Signature stub: read_gbq (pandas 1.5 layout)."""


def read_gbq(
    query,
    project_id=None,
    index_col=None,
    col_order=None,
    reauth=False,
    auth_local_webserver=True,
    dialect=None,
    location=None,
    configuration=None,
    credentials=None,
    use_bqstorage_api=None,
    max_results=None,
    progress_bar_type=None,
):
    ...
