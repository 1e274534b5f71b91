#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "treegate/model.hpp"

namespace treegate {

inline constexpr std::string_view kCheckpointMagic = "TREEGATE-CKPT v1";

// Text checkpoint:
//   TREEGATE-CKPT v1
//   key=value            metadata, fixed key order
//   tensor <name> <rows> <cols>
//   <rows lines of cols space-separated values, 17 significant digits>
//   ...
//   vocab <n>
//   <n token lines>
// The embedding table is always stored as tensor `embeddings`, trainable or not.
std::string serialize_checkpoint(const Model& model);
Model parse_checkpoint(std::string_view text);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace treegate
