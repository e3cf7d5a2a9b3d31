#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pacsr/network.hpp"

namespace pacsr {

struct GradCheckEntry {
  std::string name;  // "<tensor>[<flat index>]"
  double analytic = 0;
  double numeric = 0;
  double rel_error = 0;
  double step = 0;  // finite-difference step that produced `numeric`
};

struct GradCheckResult {
  std::string label;
  double tolerance = 0;
  double max_rel_error = 0;
  std::vector<GradCheckEntry> entries;
  bool passed() const { return max_rel_error < tolerance; }
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps entries whose true gradient
/// is ~0 from being judged on round-off alone.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Steps tried per entry are h, h/10, h/100. A step is used once its forward
/// and backward one-sided differences agree; disagreement means the stencil
/// straddles a kink (sparse screening or a tied argmax in a degenerate row).

/// SFI block on a (1,4,8,8) input in double precision: every weight, bias and
/// input element against central differences with step `h`.
GradCheckResult check_sfi_gradients(std::uint64_t seed = 0, double h = 1e-5);

/// DSLA block on 4 tokens of 8 positions with 8 channels and 2 heads: every
/// projection entry, both omegas and the input.
GradCheckResult check_dsla_gradients(std::uint64_t seed = 0, double h = 1e-5);

/// Whole network on a size x size input with the training loss; `count`
/// scalar parameters sampled across distinct tensors.
GradCheckResult check_network_gradients(const NetworkConfig& cfg, int size = 32, int count = 20,
                                        std::uint64_t seed = 0, double h = 1e-5);

/// All three checks with tolerances 1e-3, 1e-3 and 1e-2.
std::vector<GradCheckResult> grad_check(const NetworkConfig& cfg);

void to_json(nlohmann::json& j, const GradCheckResult& r);

}  // namespace pacsr
