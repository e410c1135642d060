#pragma once

#include "cropml/models/knn.hpp"
#include "cropml/models/linear.hpp"
#include "cropml/models/naive_bayes.hpp"
#include "cropml/models/tree_models.hpp"
