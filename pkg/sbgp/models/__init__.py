# Distribution, dependence and baseline models
