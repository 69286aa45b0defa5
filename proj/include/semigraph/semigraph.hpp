#pragma once

#include "semigraph/format.hpp"
#include "semigraph/random.hpp"
#include "semigraph/graph_core.hpp"
#include "semigraph/graph_io.hpp"
#include "semigraph/mittag_leffler.hpp"
#include "semigraph/renewal.hpp"
#include "semigraph/subordination.hpp"
#include "semigraph/experiments.hpp"
#include "semigraph/interbank.hpp"
