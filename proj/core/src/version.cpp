#include "derand/version.hpp"

#ifndef DERAND_VERSION
#define DERAND_VERSION "0.0.0"
#endif

namespace derand {

std::string_view library_version() { return DERAND_VERSION; }

}  // namespace derand
