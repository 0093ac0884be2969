#pragma once

#include "sobolev/adam.hpp"
#include "sobolev/autodiff.hpp"
#include "sobolev/error.hpp"
#include "sobolev/fields.hpp"
#include "sobolev/jet.hpp"
#include "sobolev/loss.hpp"
#include "sobolev/metrics.hpp"
#include "sobolev/multi_index.hpp"
#include "sobolev/network.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/quadrature.hpp"
#include "sobolev/reference.hpp"
#include "sobolev/sampling.hpp"
#include "sobolev/tape.hpp"
#include "sobolev/trainer.hpp"
