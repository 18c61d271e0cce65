#pragma once

#include <filesystem>
#include <vector>

#include "macc/layers.hpp"

namespace macc {

/// Model checkpoint: magic "MACCNN01", u32 layer count, then per layer u32
/// kind, u32 extent count and the u32 extents, then every parameter as a
/// little-endian float64 in declaration order. Several networks may share one
/// file; their layers and parameters are concatenated in the given order.
void save_checkpoint(const std::filesystem::path& path, const std::vector<const Network*>& nets);

/// Loads into networks whose architecture must match the stored descriptors.
void load_checkpoint(const std::filesystem::path& path, const std::vector<const Network*>& nets);

std::vector<LayerDesc> read_checkpoint_descriptors(const std::filesystem::path& path);

}  // namespace macc
