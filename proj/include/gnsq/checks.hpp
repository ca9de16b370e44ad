#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace gnsq {

enum class Suite { Lemmas, Certificates, All };

struct CheckItem {
  std::string name;
  bool pass = false;
  std::string detail;
  nlohmann::json report;  // certificate items: {theorem, checkpoints, slacks, verdict}
};

// Test fixtures may replace pieces of the model to confirm a check can fail.
struct CheckHooks {
  std::function<double(double)> kappa;
};

std::vector<CheckItem> run_checks(Suite suite, std::uint64_t seed,
                                  const CheckHooks& hooks = {});

}  // namespace gnsq
