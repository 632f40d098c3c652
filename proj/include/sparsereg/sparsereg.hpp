#pragma once

#include "sparsereg/errors.hpp"
#include "sparsereg/core_model.hpp"
#include "sparsereg/lasso.hpp"
#include "sparsereg/simplex.hpp"
#include "sparsereg/dantzig.hpp"
#include "sparsereg/re_analysis.hpp"
#include "sparsereg/bounds.hpp"
#include "sparsereg/experiment.hpp"
#include "sparsereg/io.hpp"
