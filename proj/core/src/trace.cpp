#include <string>

#include "derand/derandomizer.hpp"
#include "derand/digest.hpp"

namespace derand {

std::string PotentialTrace::dump() const {
  std::string out;
  for (const auto& step : steps) {
    out += std::to_string(step.index);
    out += ' ';
    out += format_word(step.chosen, alphabet, ',');
    out += ' ';
    out += step.potential.upper_string(12);
    out += '\n';
  }
  return out;
}

std::string PotentialTrace::digest() const { return sha256_hex(dump()); }

}  // namespace derand
