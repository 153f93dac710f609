#pragma once

#include "postop/cohort.hpp"
#include "postop/eor.hpp"
#include "postop/error.hpp"
#include "postop/geometry.hpp"
#include "postop/metrics.hpp"
#include "postop/morphology.hpp"
#include "postop/nifti.hpp"
#include "postop/phantom.hpp"
#include "postop/preprocess.hpp"
#include "postop/random.hpp"
#include "postop/registration.hpp"
#include "postop/report.hpp"
#include "postop/resample.hpp"
#include "postop/stats.hpp"
#include "postop/volume.hpp"
#include "postop/workflow.hpp"
