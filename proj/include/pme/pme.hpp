#pragma once

#include "pme/bundle_adjustment.hpp"
#include "pme/clustering.hpp"
#include "pme/config.hpp"
#include "pme/core.hpp"
#include "pme/embedding.hpp"
#include "pme/geometry.hpp"
#include "pme/hungarian.hpp"
#include "pme/io.hpp"
#include "pme/metrics.hpp"
#include "pme/min_cost_flow.hpp"
#include "pme/parallel.hpp"
#include "pme/pipeline.hpp"
#include "pme/synth.hpp"
#include "pme/tracking.hpp"
