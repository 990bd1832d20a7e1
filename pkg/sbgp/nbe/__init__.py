# Neural Bayes estimator package
