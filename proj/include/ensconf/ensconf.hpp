#pragma once

// Umbrella header for the whole library.

#include "ensconf/baselines.hpp"
#include "ensconf/core/json.hpp"
#include "ensconf/core/types.hpp"
#include "ensconf/core/vote.hpp"
#include "ensconf/experiments/config.hpp"
#include "ensconf/experiments/evaluate.hpp"
#include "ensconf/experiments/pipeline.hpp"
#include "ensconf/experiments/record.hpp"
#include "ensconf/experiments/synth.hpp"
#include "ensconf/features.hpp"
#include "ensconf/geometry.hpp"
#include "ensconf/ingestion/benchmarks.hpp"
#include "ensconf/ingestion/store.hpp"
#include "ensconf/metrics.hpp"
#include "ensconf/models/classifier.hpp"
#include "ensconf/models/cv.hpp"
#include "ensconf/models/logistic.hpp"
#include "ensconf/models/mlp.hpp"
#include "ensconf/orchestration/agents.hpp"
#include "ensconf/orchestration/http_backend.hpp"
#include "ensconf/orchestration/mock_backend.hpp"
#include "ensconf/orchestration/team.hpp"
#include "ensconf/orchestration/wrappers.hpp"
