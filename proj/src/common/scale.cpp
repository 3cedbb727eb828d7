#include "immf/common/scale.hpp"

#include "immf/common/error.hpp"

namespace immf {

ScaleConfig ScaleConfig::from_name(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ValidationError("unknown scale preset '" + name + "' (expected desk or paper)");
}

}  // namespace immf
