#pragma once

#include "cbound/seqmodel.hpp"

#include <filesystem>
#include <string>

namespace cbound {

inline constexpr int kCheckpointVersion = 1;

/// JSON checkpoint (layout in docs/formats.md). Doubles are written in
/// shortest round-trip form, so theta and z reload bit-exactly.
std::string checkpoint_to_json(const GatedModel<double>& model);
GatedModel<double> checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const GatedModel<double>& model);
GatedModel<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace cbound
