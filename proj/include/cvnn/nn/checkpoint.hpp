#pragma once

#include <filesystem>

#include "cvnn/nn/layers.hpp"

namespace cvnn::nn {

/// Writes `<stem>.bin` (little-endian f64 planes, Re plane then Im plane for
/// complex tensors) and `<stem>.json` (manifest of names, shapes, domains and
/// byte offsets). Batch-norm running statistics are stored as "state" entries.
void save_checkpoint(Network& net, const std::filesystem::path& stem);

/// Restores parameters and running statistics; the manifest must match the
/// network's layout exactly.
void load_checkpoint(Network& net, const std::filesystem::path& stem);

}  // namespace cvnn::nn
