#pragma once

#include "cropml/common.hpp"
#include "cropml/csv.hpp"
#include "cropml/dataset.hpp"
#include "cropml/ensemble.hpp"
#include "cropml/explain.hpp"
#include "cropml/labels.hpp"
#include "cropml/metrics.hpp"
#include "cropml/model.hpp"
#include "cropml/models.hpp"
#include "cropml/nn/autograd.hpp"
#include "cropml/nn/network.hpp"
#include "cropml/nn/train.hpp"
#include "cropml/preprocess.hpp"
#include "cropml/synthetic.hpp"
#include "cropml/tuning.hpp"
