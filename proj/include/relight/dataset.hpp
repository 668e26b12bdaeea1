#pragma once

#include <filesystem>
#include <vector>

#include "relight/olat.hpp"

namespace relight {

// Layout: root/<identity>/<take>/meta.json plus
// frame_%04d/{basis.f32, parsing.f32, foreground.png, flow.f32, flow_prev.f32}.
// flow.f32 holds flow_to_next (absent on the last frame); flow_prev.f32 holds
// flow_to_prev (absent on the first frame). Returns the take directory.
std::filesystem::path write_sequence(const OlatSequence& seq, const std::filesystem::path& root);

// Reads one take directory. Throws FormatError naming the offending file.
OlatSequence read_sequence(const std::filesystem::path& take_dir);

// Every take under root, ordered by (identity, take).
std::vector<OlatSequence> read_dataset(const std::filesystem::path& root);

}  // namespace relight
