#pragma once

#include <string>
#include <vector>

namespace bicsep {

struct Condition {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Verdict {
  bool passed = false;
  std::vector<Condition> conditions;
};

}  // namespace bicsep
