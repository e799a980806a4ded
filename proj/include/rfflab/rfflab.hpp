#pragma once

#include "rfflab/vec.hpp"
#include "rfflab/rng.hpp"
#include "rfflab/field.hpp"
#include "rfflab/field_tube.hpp"
#include "rfflab/dynamics.hpp"
#include "rfflab/intersection.hpp"
#include "rfflab/limit_sde.hpp"
#include "rfflab/stats.hpp"
#include "rfflab/parallel.hpp"
#include "rfflab/covariance.hpp"
#include "rfflab/harness.hpp"
#include "rfflab/io.hpp"
#include "rfflab/config.hpp"
#include "rfflab/verify.hpp"
