#pragma once

#include <string_view>

namespace derand {

/// Library version, "major.minor.patch".
std::string_view library_version();

}  // namespace derand
