#pragma once

#include "crowdcluster/aggregation.hpp"
#include "crowdcluster/agreement.hpp"
#include "crowdcluster/clustering.hpp"
#include "crowdcluster/dataset.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/evaluation.hpp"
#include "crowdcluster/features.hpp"
#include "crowdcluster/log.hpp"
#include "crowdcluster/matrix.hpp"
#include "crowdcluster/model_io.hpp"
#include "crowdcluster/models.hpp"
#include "crowdcluster/rng.hpp"
#include "crowdcluster/scheme.hpp"
#include "crowdcluster/summary.hpp"
#include "crowdcluster/synthetic.hpp"
