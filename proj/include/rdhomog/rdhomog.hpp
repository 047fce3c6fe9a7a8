#pragma once

// Everything except the CLI layer (which needs nlohmann/json).
#include "rdhomog/diffeo.hpp"
#include "rdhomog/error.hpp"
#include "rdhomog/exact1d.hpp"
#include "rdhomog/fem.hpp"
#include "rdhomog/fields.hpp"
#include "rdhomog/homogenize.hpp"
#include "rdhomog/mcstats.hpp"
#include "rdhomog/parallel.hpp"
#include "rdhomog/quadrature.hpp"
#include "rdhomog/seeding.hpp"
#include "rdhomog/stats.hpp"
