#include "tflim/format.hpp"

#include <cstdio>

namespace tflim {

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace tflim
