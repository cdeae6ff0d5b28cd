"""Signature stub: KFold as of scikit-learn 1.1.2."""


class KFold:
    def __init__(self, n_splits=5, *, shuffle=False, random_state=None):
        ...
