#include "check_catalog.hpp"

namespace errcalc::detail {

const std::vector<CheckDef>& check_catalog() {
  static const std::vector<CheckDef> defs = [] {
    std::vector<CheckDef> out;
    register_axiom_checks(out);
    register_prop_checks(out);
    register_wiener_checks(out);
    return out;
  }();
  return defs;
}

}  // namespace errcalc::detail
