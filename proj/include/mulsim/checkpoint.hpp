#pragma once

#include <string>

#include "mulsim/perceiver.hpp"

namespace mulsim::perceiver {

// Binary container: magic, format version, a JSON manifest describing the
// registry/config/seed, then named row-major tensors as little-endian
// doubles. Loading validates structure and fails loudly on mismatch.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace mulsim::perceiver
