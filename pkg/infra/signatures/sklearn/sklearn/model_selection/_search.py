"""Signature stub: GridSearchCV as of scikit-learn 1.1.2."""
import numpy as np


class GridSearchCV:
    def __init__(
        self,
        estimator,
        param_grid,
        *,
        scoring=None,
        n_jobs=None,
        refit=True,
        cv=None,
        verbose=0,
        pre_dispatch="2*n_jobs",
        error_score=np.nan,
        return_train_score=False,
    ):
        ...
