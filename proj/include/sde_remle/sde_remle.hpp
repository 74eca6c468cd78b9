#pragma once

#include "sde_remle/asymptotics.hpp"
#include "sde_remle/config.hpp"
#include "sde_remle/csv.hpp"
#include "sde_remle/error.hpp"
#include "sde_remle/likelihood.hpp"
#include "sde_remle/mle.hpp"
#include "sde_remle/model.hpp"
#include "sde_remle/parallel.hpp"
#include "sde_remle/path_simulator.hpp"
#include "sde_remle/rng.hpp"
#include "sde_remle/statistics.hpp"
#include "sde_remle/suff_stats.hpp"
#include "sde_remle/text.hpp"
