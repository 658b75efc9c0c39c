#pragma once

#include <string>

#include "uqlab/models.hpp"

namespace uqlab {

/// Versioned JSON container holding the network spec, flat weight vectors
/// and model-specific state; values round-trip bitwise.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

} // namespace uqlab
