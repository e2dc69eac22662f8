#pragma once

#include "sa_steady/config.hpp"
#include "sa_steady/engine.hpp"
#include "sa_steady/error.hpp"
#include "sa_steady/experiments.hpp"
#include "sa_steady/matlib.hpp"
#include "sa_steady/metrics.hpp"
#include "sa_steady/models.hpp"
#include "sa_steady/noise.hpp"
#include "sa_steady/report.hpp"
#include "sa_steady/rng.hpp"
#include "sa_steady/theory.hpp"
