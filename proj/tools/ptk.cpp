// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "ptk/version.hpp"

int main() {
  std::cout << "ptk " << ptk::kVersion << "\n";
  return 0;
}
