#pragma once

#include <string>
#include <vector>

#include "evobo/semantic_space.hpp"

namespace evobo {

struct Hypothesis {
  std::string id;
  std::string text;
  UnitVector embedding;
  std::vector<double> parameters;  // optional task featurization
};

}  // namespace evobo
