#pragma once

#include "sose/apply.hpp"
#include "sose/calibration.hpp"
#include "sose/diagnostics.hpp"
#include "sose/error.hpp"
#include "sose/experiment.hpp"
#include "sose/io.hpp"
#include "sose/kwise.hpp"
#include "sose/less.hpp"
#include "sose/leverage.hpp"
#include "sose/oblivious.hpp"
#include "sose/parallel.hpp"
#include "sose/pipeline.hpp"
#include "sose/report.hpp"
#include "sose/sketch.hpp"
