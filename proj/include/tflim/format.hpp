#pragma once

#include <string>

namespace tflim {

// Shortest form that round-trips: printf "%.17g".
std::string format_number(double x);

}  // namespace tflim
