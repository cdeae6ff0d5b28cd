"""Signature stub: r2_score as of scikit-learn 1.1.2."""


def r2_score(y_true, y_pred, *, sample_weight=None, multioutput="uniform_average"):
    ...
