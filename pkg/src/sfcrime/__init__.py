"""Spatio-temporal crime classification pipeline for the SF incident dataset.

Submodules:
    ingest      CSV parsing, label encoding, class-frequency analysis
    features    feature matrix assembly, split, PCA, univariate selection
    classifiers decision tree, KNN, random forest, AdaBoost (all native)
    resampling  SMOTE, random undersampling, edited nearest neighbours
    metrics     accuracy, multiclass log loss, confusion matrix
    cli         ingest / explore / run / reproduce command line front end
"""

__version__ = "0.1.0"
