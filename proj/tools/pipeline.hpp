#pragma once

#include "config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace cbound::cli {

enum class Stage { Simulate, Prepare, Sweep, Analyze };

const char* stage_name(Stage s);

struct RunOptions {
    std::filesystem::path out_dir;
    unsigned jobs = 1;
    std::ostream* log = nullptr;  ///< progress lines; null for silence
};

/// Runs `target`, first running (or reusing) every upstream stage. An
/// upstream stage is reused when the output directory's manifest carries the
/// same config digest and its recorded artifacts are intact; otherwise it is
/// recomputed and its artifacts rewritten.
void run_stage(const RunConfig& cfg, Stage target, const RunOptions& opts);

/// Recomputes every stage in order, ignoring reusable artifacts.
void run_all(const RunConfig& cfg, const RunOptions& opts);

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

}  // namespace cbound::cli
