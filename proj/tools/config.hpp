#pragma once

#include "cbound/boundary.hpp"
#include "cbound/trace.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cbound::cli {

struct TraceConfig {
    /// "lackey" or one of the synthetic kind names.
    std::string kind;
    std::filesystem::path path;  ///< lackey only; relative paths resolve against the config file
    std::string id;
    SyntheticSpec synthetic;
};

struct CacheConfig {
    std::uint32_t line_size = 64;
    std::vector<std::uint64_t> capacities;  ///< ascending, distinct
    std::uint64_t window_instructions = 100000;
    std::uint64_t model_capacity = 0;  ///< the capacity whose series becomes the dataset
};

struct PreprocessConfig {
    double epsilon = 1e-6;
    int bins = 100;
    std::size_t chunk_length = 512;
    double train_fraction = 0.8;
};

struct ModelConfig {
    int d_in = 8;
    std::vector<int> widths{16, 64};
    std::optional<std::array<int, 4>> ff_widths;  ///< default [w, w, w/2, 100]
    int h = 8;

    std::vector<Architecture> architectures() const;
};

struct SweepSection {
    std::vector<double> beta_grid;
    std::vector<double> gmin_grid;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int epochs = 50;
    AdamOptions adam;
};

struct AnalysisConfig {
    std::size_t heatmap_window = 100;
    LossKind boundary_loss = LossKind::Train;
    double dl_a = 32.0;
    double dl_b = 1.0;
    double dl_c = 0.0;
};

struct RunConfig {
    TraceConfig trace;
    CacheConfig cache;
    PreprocessConfig preprocess;
    ModelConfig model;
    SweepSection sweep;
    AnalysisConfig analysis;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;

    std::filesystem::path source_path;
    std::string source_bytes;  ///< exact file contents, hashed into the manifest
};

/// Parses and validates a whole config; unknown keys, wrong types and
/// out-of-range values raise ConfigError naming the offending key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& source_path = {});
RunConfig load_config(const std::filesystem::path& path);

SweepConfig make_sweep_config(const RunConfig& cfg, unsigned threads);

}  // namespace cbound::cli
