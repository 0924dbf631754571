#pragma once

// Umbrella header for the library (the CLI lives in rhythm/cli.hpp).

#include "rhythm/analysis.hpp"
#include "rhythm/api.hpp"
#include "rhythm/config.hpp"
#include "rhythm/coupling_stats.hpp"
#include "rhythm/credit_shaping.hpp"
#include "rhythm/digest.hpp"
#include "rhythm/error.hpp"
#include "rhythm/format.hpp"
#include "rhythm/head_analysis.hpp"
#include "rhythm/index_set.hpp"
#include "rhythm/matrix.hpp"
#include "rhythm/oracle.hpp"
#include "rhythm/perturbation.hpp"
#include "rhythm/pipeline.hpp"
#include "rhythm/plot.hpp"
#include "rhythm/profile_export.hpp"
#include "rhythm/rhythm_metrics.hpp"
#include "rhythm/synth.hpp"
#include "rhythm/tensor_io.hpp"
#include "rhythm/version.hpp"
