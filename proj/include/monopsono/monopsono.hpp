#pragma once

#include "concentration.hpp"
#include "csv.hpp"
#include "data_model.hpp"
#include "delineation.hpp"
#include "econometrics.hpp"
#include "errors.hpp"
#include "minwage_analysis.hpp"
#include "oligopsony.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "synth.hpp"
#include "types.hpp"
