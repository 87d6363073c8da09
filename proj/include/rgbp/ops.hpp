#pragma once

#include "rgbp/ops/activations.hpp"
#include "rgbp/ops/conv.hpp"
#include "rgbp/ops/edge.hpp"
#include "rgbp/ops/gradcheck.hpp"
#include "rgbp/ops/linear.hpp"
#include "rgbp/ops/norm.hpp"
#include "rgbp/ops/pool.hpp"
#include "rgbp/ops/structural.hpp"
