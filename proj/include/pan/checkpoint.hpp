#pragma once

#include <filesystem>
#include <iosfwd>

#include "pan/model.hpp"

namespace pan {

/// Binary model container:
///   "PANW" | u32 version | u64 length + config JSON (with encoder
///   cardinalities) | u64 block count | blocks
/// where each block is u32 name length | name | u32 rank | u64 dims... |
/// little-endian f64 data. Batch-norm running statistics are stored as
/// blocks named "buffer:<name>".
void write_checkpoint(std::ostream& out, const Model& model);
Model read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model& model);
/// Throws BadCheckpoint (or MissingFile) on unreadable or inconsistent files.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace pan
