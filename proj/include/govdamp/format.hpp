#pragma once

#include <string>

namespace govdamp {

// Shortest decimal text that parses back to the same double ("nan"/"inf" for non-finite).
std::string fmt_num(double v);

}  // namespace govdamp
