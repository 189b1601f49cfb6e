#pragma once

#include "dgsp/base_change.hpp"
#include "dgsp/common.hpp"
#include "dgsp/core.hpp"
#include "dgsp/ensemble.hpp"
#include "dgsp/experiment.hpp"
#include "dgsp/filters.hpp"
#include "dgsp/io.hpp"
#include "dgsp/learning.hpp"
#include "dgsp/sampling.hpp"
#include "dgsp/synth.hpp"
#include "dgsp/transform.hpp"
