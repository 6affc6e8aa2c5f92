#pragma once

#include "bayesknock/app.hpp"
#include "bayesknock/chain.hpp"
#include "bayesknock/common.hpp"
#include "bayesknock/data.hpp"
#include "bayesknock/distributions.hpp"
#include "bayesknock/fdr.hpp"
#include "bayesknock/ggm.hpp"
#include "bayesknock/io.hpp"
#include "bayesknock/knockoff.hpp"
#include "bayesknock/linalg.hpp"
#include "bayesknock/parallel.hpp"
#include "bayesknock/regression.hpp"
#include "bayesknock/sim.hpp"
