#pragma once

#include "ppl/mcmc/diagnostics.hpp"
#include "ppl/mcmc/model.hpp"
#include "ppl/mcmc/sampler.hpp"
