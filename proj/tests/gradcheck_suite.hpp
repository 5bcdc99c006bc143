#pragma once

#include "support.hpp"

#include "e3g/backbone.hpp"

#include <string>
#include <vector>

namespace e3g::test {

struct NamedGradCheck {
    std::string name;
    GradStats stats;
};

/// Finite-difference checks for every differentiable op and for the two
/// composite networks, at double precision on small random shapes.
std::vector<NamedGradCheck> run_gradient_suite(std::uint64_t seed);

/// 32x32 input, stage channels {2,3,4,5}, 3 pyramid channels.
EncoderConfig small_encoder_config();

/// Backbone check alone. Parameters whose analytic gradient is identically
/// zero are appended to dead_params.
NamedGradCheck check_backbone(std::mt19937_64& rng, std::vector<std::string>* dead_params);

}  // namespace e3g::test
