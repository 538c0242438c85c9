#pragma once

#include "ddbh/errors.hpp"
#include "ddbh/params.hpp"
#include "ddbh/rng.hpp"
#include "ddbh/lattice.hpp"
#include "ddbh/meanfield.hpp"
#include "ddbh/stats.hpp"
#include "ddbh/sgpe.hpp"
#include "ddbh/modela.hpp"
#include "ddbh/domainwall.hpp"
#include "ddbh/singlecavity.hpp"
#include "ddbh/sweep.hpp"
#include "ddbh/config.hpp"
#include "ddbh/io.hpp"
