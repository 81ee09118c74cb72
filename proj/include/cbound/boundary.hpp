#pragma once

#include "cbound/optimizer.hpp"
#include "cbound/preprocess.hpp"
#include "cbound/seqmodel.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cbound {

struct TrainOptions {
    int epochs = 50;
    AdamOptions adam;
};

struct TrainResult {
    GatedModel<double> model;
    std::vector<double> epoch_objective;  ///< mean objective over each epoch's steps
    double initial_mean_gate = 0;
    double final_mean_gate = 0;
};

/// Truncated-BPTT training of mean step NLL + beta * sum(g) with Adam. Each
/// chunk is an independent stream (state reset at its start); one optimizer
/// step consumes the next horizon-length window of every chunk. Throws
/// NumericalError naming the step if the objective or gradient stops being
/// finite.
TrainResult train(GatedModel<double> model, std::span<const Symbol> seq,
                  std::span<const Range> chunks, double beta, const TrainOptions& opts);

/// A discretized dataset with its train/test partition.
struct Dataset {
    std::string trace_id;
    DiscretizedSequence seq;
    ChunkSplit split;

    std::size_t train_symbols() const;
    std::size_t test_symbols() const;
};

struct SweepConfig {
    std::vector<double> beta_grid;   ///< strictly ascending, >= 0
    std::vector<double> gmin_grid;   ///< strictly ascending, in (0, 1]
    std::vector<std::uint64_t> seeds;
    std::vector<Architecture> architectures;  ///< distinct LSTM widths
    TrainOptions train;
    unsigned threads = 1;
    /// When set, every trained (seed, width, beta) model is saved here.
    std::optional<std::filesystem::path> checkpoint_dir;

    /// Throws ConfigError.
    void validate() const;
};

enum class RecordStatus { Ok, Failed };

struct ModelRecord {
    std::string trace_id;
    std::uint64_t seed = 0;
    int width = 0;
    double beta = 0;
    double g_min = 0;
    std::size_t cost_J = 0;
    double loss_train = 0;
    double loss_test = 0;
    double loss_per_symbol_train = 0;
    double loss_per_symbol_test = 0;
    RecordStatus status = RecordStatus::Ok;
    std::string checkpoint;
};

/// Checkpoint file name for one trained model.
std::string checkpoint_name(std::uint64_t seed, int width, std::size_t beta_index);

/// Trains once per (seed, width, beta) and evaluates every g_min threshold
/// on the pruned model. Output is ordered by (seed, width, beta, g_min)
/// whatever the thread count. A failed training yields Failed records; if
/// every training fails, throws NumericalError.
std::vector<ModelRecord> sweep(const SweepConfig& config, const Dataset& data);

enum class LossKind { Train, Test };

double record_loss(const ModelRecord& r, LossKind kind);

/// Lower-left Pareto envelope in (cost_J, loss): strictly increasing J,
/// strictly decreasing loss. Failed records are ignored.
struct BoundaryCurve {
    std::vector<ModelRecord> points;
    LossKind loss = LossKind::Train;
};

BoundaryCurve pareto_frontier(std::span<const ModelRecord> records, LossKind kind = LossKind::Train);

inline constexpr const char* kBoundaryHeader =
    "trace_id,seed,width,beta,g_min,cost_J,loss_train,loss_test,"
    "loss_per_symbol_train,loss_per_symbol_test,status";

std::string records_to_csv(std::span<const ModelRecord> records);
/// Throws InputError on header mismatch or malformed rows.
std::vector<ModelRecord> records_from_csv(const std::string& text);

}  // namespace cbound
