#pragma once

#include <filesystem>

#include "xmrt/encoders.hpp"

namespace xmrt {

// A checkpoint is a directory holding one tensor file per parameter
// ("<name>.xmrt", e.g. audio_encoder.weight.xmrt) plus meta.json.
void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace xmrt
