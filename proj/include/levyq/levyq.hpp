#pragma once

#include "levyq/config.hpp"
#include "levyq/density.hpp"
#include "levyq/dirichlet.hpp"
#include "levyq/harness.hpp"
#include "levyq/kernel.hpp"
#include "levyq/levy.hpp"
#include "levyq/path.hpp"
#include "levyq/quadrature.hpp"
#include "levyq/report.hpp"
#include "levyq/rng.hpp"
#include "levyq/sde.hpp"
#include "levyq/step.hpp"
#include "levyq/tail.hpp"
