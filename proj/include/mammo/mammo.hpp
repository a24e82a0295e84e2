#pragma once

#include "error.hpp"
#include "plane.hpp"
#include "rng.hpp"
#include "wavelet.hpp"
#include "features.hpp"
#include "mlp.hpp"
#include "cascade.hpp"
#include "dataset.hpp"
#include "eval.hpp"
#include "report.hpp"
#include "cli.hpp"
