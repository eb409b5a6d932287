// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_CHECKPOINT_HPP
#define RFSEP_CHECKPOINT_HPP

#include <string>

#include <nlohmann/json.hpp>

#include "model.hpp"

namespace rfsep {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Versioned container: magic, u64 header length, JSON header (config, tensor
// names/shapes, parameter count), then raw little-endian float32 payload in
// header order.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace rfsep

#endif
