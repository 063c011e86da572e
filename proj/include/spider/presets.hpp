// Built-in coefficient families, constructible from JSON.
//
//   {"family": "brownian-spider", "I": 3, "alpha_mode": "l-dependent"}
//   {"family": "constant", "sigma": [1, 2], "drift": [0, 0.5], "alpha": [0.4, 0.6]}
//   {"family": "affine-in-l", "sigma": [...], "sigma_slope": [...], "drift": [...],
//    "drift_slope": [...], "alpha": [...], "alpha_slope": [...], "l_cap": 4}
//   {"family": "trig-in-t", "sigma": [...], "sigma_amp": 0.2, "drift": [...],
//    "alpha": [...], "alpha_amp": [...], "omega": 6.28}
//
// Any family accepts an optional "bounds" object overriding the computed
// a_lower / sigma_lower / lip_b / lip_sigma / lip_alpha. Unknown keys are
// rejected.
#pragma once

#include <vector>

#include <json.hpp>

#include "spider/junction.hpp"

namespace spider {

enum class AlphaMode { kUniform, kLDependent, kGiven };

/// sigma == 1, b == 0. kLDependent uses alpha_1(t, l) = base + amp / (1 + l)
/// and splits the remainder evenly over the other branches.
CoefficientSet brownian_spider(int branches, AlphaMode mode = AlphaMode::kUniform,
                               std::vector<double> alpha = {}, double base = 0.3, double amp = 0.3);

CoefficientSet constant_coefficients(std::vector<double> sigma, std::vector<double> drift,
                                     std::vector<double> alpha);

CoefficientSet make_preset(const nlohmann::json& spec);

/// Canonical form of a preset spec with every default filled in.
nlohmann::json normalize_preset(const nlohmann::json& spec);

}  // namespace spider
