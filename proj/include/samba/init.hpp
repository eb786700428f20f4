#pragma once

#include <functional>
#include <random>
#include <string>

#include "samba/tensor.hpp"

namespace samba {

using Rng = std::mt19937_64;

// Trainable leaf with i.i.d. N(0, stddev^2) entries.
Tensor normal_parameter(Shape shape, double stddev, Rng& rng);
Tensor uniform_parameter(Shape shape, double bound, Rng& rng);
Tensor constant_parameter(Shape shape, double value);

// Walks named parameters. Names are dotted paths ("blocks.0.ssm.a_log").
using ParamVisitor = std::function<void(const std::string& name, Tensor& param)>;

}  // namespace samba
