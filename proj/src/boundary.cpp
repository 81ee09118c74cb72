#include "cbound/boundary.hpp"

#include "cbound/checkpoint.hpp"
#include "cbound/errors.hpp"
#include "cbound/io.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace cbound {

namespace {

double mean_gate(const GatedModel<double>& m) { return m.gates().mean(); }

bool finite_all(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

TrainResult train(GatedModel<double> model, std::span<const Symbol> seq,
                  std::span<const Range> chunks, double beta, const TrainOptions& opts) {
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (opts.epochs < 1) throw ConfigError("training budget must be >= 1 epoch");
    const int h = model.arch.horizon;

    TrainResult result;
    result.initial_mean_gate = mean_gate(model);
    Adam theta_opt(model.theta.size(), opts.adam);
    Adam z_opt(model.z.size(), opts.adam);

    std::vector<TrainingWindow<double>> batch;
    std::vector<std::size_t> owner;  // chunk index of each batch window
    std::vector<LstmState<double>> states(chunks.size());
    long step_no = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        for (auto& s : states) s = LstmState<double>::zero(model.arch.width);
        double objective_sum = 0;
        long epoch_steps = 0;
        for (std::size_t offset = 0;; offset += static_cast<std::size_t>(h)) {
            batch.clear();
            owner.clear();
            for (std::size_t c = 0; c < chunks.size(); ++c) {
                const Range& r = chunks[c];
                const std::size_t start = r.begin + offset;
                if (start + 1 >= r.end) continue;
                const std::size_t len = std::min<std::size_t>(h, r.end - start - 1);
                TrainingWindow<double> w;
                w.initial = states[c];
                w.inputs.assign(seq.begin() + start, seq.begin() + start + len);
                w.targets.assign(seq.begin() + start + 1, seq.begin() + start + 1 + len);
                batch.push_back(std::move(w));
                owner.push_back(c);
            }
            if (batch.empty()) break;

            auto grad = objective_grad<double>(model, batch, beta);
            ++step_no;
            if (!std::isfinite(grad.objective) || !finite_all(grad.d_theta) || !finite_all(grad.d_z)) {
                throw NumericalError("non-finite objective or gradient at optimizer step " +
                                     std::to_string(step_no) + " (epoch " + std::to_string(epoch) +
                                     ", beta " + std::to_string(beta) + ")");
            }
            theta_opt.step(model.theta, grad.d_theta);
            z_opt.step(model.z, grad.d_z);
            for (std::size_t k = 0; k < batch.size(); ++k) states[owner[k]] = std::move(grad.final_states[k]);
            objective_sum += grad.objective;
            ++epoch_steps;
        }
        if (epoch_steps == 0) throw InputError("training data has no chunk with two or more symbols");
        result.epoch_objective.push_back(objective_sum / static_cast<double>(epoch_steps));
    }
    if (!model.theta.allFinite() || !model.z.allFinite())
        throw NumericalError("parameters diverged after " + std::to_string(step_no) + " steps");
    result.final_mean_gate = mean_gate(model);
    result.model = std::move(model);
    return result;
}

std::size_t Dataset::train_symbols() const {
    return std::accumulate(split.train_chunks.begin(), split.train_chunks.end(), std::size_t{0},
                           [](std::size_t a, const Range& r) { return a + r.size(); });
}

std::size_t Dataset::test_symbols() const {
    return std::accumulate(split.test_chunks.begin(), split.test_chunks.end(), std::size_t{0},
                           [](std::size_t a, const Range& r) { return a + r.size(); });
}

void SweepConfig::validate() const {
    auto strictly_ascending = [](const std::vector<double>& v) {
        return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(a < b); }) == v.end();
    };
    if (beta_grid.empty() || !strictly_ascending(beta_grid))
        throw ConfigError("beta_grid must be non-empty and strictly ascending");
    if (!(beta_grid.front() >= 0.0)) throw ConfigError("beta values must be >= 0");
    if (gmin_grid.empty() || !strictly_ascending(gmin_grid))
        throw ConfigError("gmin_grid must be non-empty and strictly ascending");
    if (!(gmin_grid.front() > 0.0) || !(gmin_grid.back() <= 1.0))
        throw ConfigError("g_min values must lie in (0, 1]");
    if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
    if (architectures.empty()) throw ConfigError("sweep needs at least one width");
    for (std::size_t i = 0; i < architectures.size(); ++i) {
        architectures[i].validate();
        for (std::size_t j = 0; j < i; ++j)
            if (architectures[j].width == architectures[i].width)
                throw ConfigError("sweep widths must be distinct");
    }
    if (train.epochs < 1) throw ConfigError("training budget must be >= 1 epoch");
}

std::string checkpoint_name(std::uint64_t seed, int width, std::size_t beta_index) {
    return "model_s" + std::to_string(seed) + "_w" + std::to_string(width) + "_b" +
           std::to_string(beta_index) + ".json";
}

std::vector<ModelRecord> sweep(const SweepConfig& config, const Dataset& data) {
    config.validate();
    const auto& seq = data.seq.symbols;
    const auto& train_chunks = data.split.train_chunks;
    const auto& test_chunks = data.split.test_chunks;
    const double n_train = static_cast<double>(data.train_symbols());
    const double n_test = static_cast<double>(data.test_symbols());

    std::vector<std::uint64_t> seeds = config.seeds;
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    std::vector<Architecture> archs = config.architectures;
    std::sort(archs.begin(), archs.end(), [](const auto& a, const auto& b) { return a.width < b.width; });

    struct Job {
        std::uint64_t seed;
        const Architecture* arch;
        std::size_t beta_index;
    };
    std::vector<Job> jobs;
    for (auto s : seeds)
        for (const auto& a : archs)
            for (std::size_t b = 0; b < config.beta_grid.size(); ++b) jobs.push_back({s, &a, b});

    std::vector<std::vector<ModelRecord>> results(jobs.size());
    std::exception_ptr fatal;
    std::mutex fatal_mu;

    auto run_job = [&](std::size_t idx) {
        const Job& job = jobs[idx];
        const double beta = config.beta_grid[job.beta_index];
        ModelRecord proto;
        proto.trace_id = data.trace_id;
        proto.seed = job.seed;
        proto.width = job.arch->width;
        proto.beta = beta;

        auto& out = results[idx];
        out.reserve(config.gmin_grid.size());
        try {
            auto trained = train(init_model(*job.arch, job.seed), seq, train_chunks, beta, config.train);
            if (config.checkpoint_dir) {
                const auto path = *config.checkpoint_dir / checkpoint_name(job.seed, job.arch->width, job.beta_index);
                save_checkpoint(path, trained.model);
                proto.checkpoint = path.string();
            }
            for (double g_min : config.gmin_grid) {
                const auto pruned = apply_threshold(trained.model, g_min);
                ModelRecord r = proto;
                r.g_min = g_min;
                r.cost_J = cost_J(pruned);
                r.loss_train = nll(pruned, seq, train_chunks);
                r.loss_test = nll(pruned, seq, test_chunks);
                r.loss_per_symbol_train = r.loss_train / n_train;
                r.loss_per_symbol_test = r.loss_test / n_test;
                if (!std::isfinite(r.loss_train) || !std::isfinite(r.loss_test))
                    throw NumericalError("non-finite loss after pruning");
                out.push_back(std::move(r));
            }
        } catch (const NumericalError&) {
            out.clear();
            for (double g_min : config.gmin_grid) {
                ModelRecord r = proto;
                r.g_min = g_min;
                r.loss_train = r.loss_test = std::numeric_limits<double>::quiet_NaN();
                r.loss_per_symbol_train = r.loss_per_symbol_test = r.loss_train;
                r.status = RecordStatus::Failed;
                out.push_back(std::move(r));
            }
        } catch (...) {
            std::lock_guard lock(fatal_mu);
            if (!fatal) fatal = std::current_exception();
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(jobs.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) run_job(i);
            });
        for (auto& th : pool) th.join();
    }
    if (fatal) std::rethrow_exception(fatal);

    std::vector<ModelRecord> records;
    records.reserve(jobs.size() * config.gmin_grid.size());
    bool any_ok = false;
    for (auto& group : results)
        for (auto& r : group) {
            any_ok = any_ok || r.status == RecordStatus::Ok;
            records.push_back(std::move(r));
        }
    if (!any_ok) throw NumericalError("sweep: every training run failed");
    return records;
}

double record_loss(const ModelRecord& r, LossKind kind) {
    return kind == LossKind::Train ? r.loss_train : r.loss_test;
}

BoundaryCurve pareto_frontier(std::span<const ModelRecord> records, LossKind kind) {
    std::vector<const ModelRecord*> ok;
    for (const auto& r : records)
        if (r.status == RecordStatus::Ok) ok.push_back(&r);
    std::stable_sort(ok.begin(), ok.end(), [kind](const ModelRecord* a, const ModelRecord* b) {
        if (a->cost_J != b->cost_J) return a->cost_J < b->cost_J;
        return record_loss(*a, kind) < record_loss(*b, kind);
    });
    BoundaryCurve curve;
    curve.loss = kind;
    double best = std::numeric_limits<double>::infinity();
    for (const ModelRecord* r : ok) {
        const double l = record_loss(*r, kind);
        if (l < best) {
            curve.points.push_back(*r);
            best = l;
        }
    }
    return curve;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw InputError("boundary.csv line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t line) {
    Int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw InputError("boundary.csv line " + std::to_string(line) + ": bad integer '" + s + "'");
    return v;
}

}  // namespace

std::string records_to_csv(std::span<const ModelRecord> records) {
    std::string out = kBoundaryHeader;
    out += '\n';
    for (const auto& r : records) {
        out += r.trace_id + ',' + std::to_string(r.seed) + ',' + std::to_string(r.width) + ',' +
               format_shortest(r.beta) + ',' + format_shortest(r.g_min) + ',' + std::to_string(r.cost_J) + ',' +
               format_shortest(r.loss_train) + ',' + format_shortest(r.loss_test) + ',' +
               format_shortest(r.loss_per_symbol_train) + ',' + format_shortest(r.loss_per_symbol_test) + ',' +
               (r.status == RecordStatus::Ok ? "ok" : "failed") + '\n';
    }
    return out;
}

std::vector<ModelRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kBoundaryHeader)
        throw InputError("boundary.csv: header mismatch");
    std::vector<ModelRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 11)
            throw InputError("boundary.csv line " + std::to_string(line_no) + ": expected 11 fields");
        ModelRecord r;
        r.trace_id = f[0];
        r.seed = parse_int<std::uint64_t>(f[1], line_no);
        r.width = parse_int<int>(f[2], line_no);
        r.beta = parse_double(f[3], line_no);
        r.g_min = parse_double(f[4], line_no);
        r.cost_J = parse_int<std::size_t>(f[5], line_no);
        r.loss_train = parse_double(f[6], line_no);
        r.loss_test = parse_double(f[7], line_no);
        r.loss_per_symbol_train = parse_double(f[8], line_no);
        r.loss_per_symbol_test = parse_double(f[9], line_no);
        if (f[10] == "ok") r.status = RecordStatus::Ok;
        else if (f[10] == "failed") r.status = RecordStatus::Failed;
        else throw InputError("boundary.csv line " + std::to_string(line_no) + ": bad status '" + f[10] + "'");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace cbound
