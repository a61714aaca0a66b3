#pragma once

#include "sslpoison/errors.hpp"

#include "sslpoison/nn/model.hpp"
#include "sslpoison/nn/model_io.hpp"

#include "sslpoison/data/augment.hpp"
#include "sslpoison/data/dataset.hpp"
#include "sslpoison/data/dataset_io.hpp"

#include "sslpoison/ssl/config.hpp"
#include "sslpoison/ssl/guess.hpp"
#include "sslpoison/ssl/trace.hpp"
#include "sslpoison/ssl/trainer.hpp"
#include "sslpoison/ssl/vat.hpp"

#include "sslpoison/poison/bridge.hpp"
#include "sslpoison/poison/density.hpp"
#include "sslpoison/poison/transfer.hpp"

#include "sslpoison/defense/cluster.hpp"
#include "sslpoison/defense/collinear.hpp"
#include "sslpoison/defense/influence.hpp"

#include "sslpoison/harness/config.hpp"
#include "sslpoison/harness/curves.hpp"
#include "sslpoison/harness/matrix.hpp"
#include "sslpoison/harness/stats.hpp"
#include "sslpoison/harness/trial.hpp"
