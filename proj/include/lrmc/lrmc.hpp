#pragma once

#include "lrmc/certificate.hpp"
#include "lrmc/csv.hpp"
#include "lrmc/experiment.hpp"
#include "lrmc/leverage.hpp"
#include "lrmc/linalg.hpp"
#include "lrmc/random.hpp"
#include "lrmc/sampling.hpp"
#include "lrmc/solver.hpp"
