#pragma once

#include "ldamend/nn/dense.hpp"
#include "ldamend/nn/gradcheck.hpp"
#include "ldamend/nn/loss.hpp"
#include "ldamend/nn/optim.hpp"
