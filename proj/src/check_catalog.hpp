#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <errcalc/harness.hpp>

namespace errcalc::detail {

struct CheckDef {
  std::string name;  // suite/check
  std::string suite;
  bool (*enabled)(const RunConfig&);  // nullptr means always on
  void (*run)(const RunConfig&, std::uint64_t seed, CheckReport&);
};

void register_axiom_checks(std::vector<CheckDef>& out);
void register_prop_checks(std::vector<CheckDef>& out);
void register_wiener_checks(std::vector<CheckDef>& out);

const std::vector<CheckDef>& check_catalog();

inline std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace errcalc::detail
