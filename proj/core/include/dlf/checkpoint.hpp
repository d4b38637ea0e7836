#pragma once

#include <filesystem>

#include "dlf/params.hpp"

namespace dlf {

// Checkpoint container (little-endian):
//   magic "DLFC" | version u32 | parameter count u32 |
//   per parameter: name length u16 + UTF-8 name, rank u32, dims u32 x rank,
//   values f64.
// Values are always stored in 64-bit; loading in 32-bit mode rounds them.
void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);

// Loads by name into an existing store. Unknown names, missing parameters or
// shape mismatches raise CorruptError; a bad magic raises FormatError.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& path);

}  // namespace dlf
