#include "pipeline.hpp"

#include "cbound/analysis.hpp"
#include "cbound/boundary.hpp"
#include "cbound/cachesim.hpp"
#include "cbound/checkpoint.hpp"
#include "cbound/errors.hpp"
#include "cbound/io.hpp"
#include "cbound/preprocess.hpp"
#include "cbound/trace.hpp"

#include <Eigen/Core>
#include <json.hpp>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef CBOUND_VERSION
#define CBOUND_VERSION "0.0.0"
#endif

namespace cbound::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Simulate: return "simulate";
        case Stage::Prepare: return "prepare";
        case Stage::Sweep: return "sweep";
        case Stage::Analyze: return "analyze";
    }
    return "?";
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw InputError("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

namespace {

constexpr const char* kMissratesHeader = "window_index,cache_lines,miss_rate,accesses";
constexpr const char* kDatasetHeader = "index,symbol,split";
constexpr const char* kBoundsHeader = "cost_J,loss_train,loss_test,dl_bits";
constexpr Stage kStages[] = {Stage::Simulate, Stage::Prepare, Stage::Sweep, Stage::Analyze};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

template <typename T>
T parse_field(const std::string& s, const std::string& file, std::size_t line) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw InputError(file + " line " + std::to_string(line) + ": bad value '" + s + "'");
    return v;
}

/// Reads lines after checking the header; calls fn(fields, line_no) per row.
template <typename Fn>
void for_each_row(const fs::path& path, const char* header, std::size_t fields, Fn fn) {
    const std::string name = path.filename().string();
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != header) throw InputError(name + ": header mismatch");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = split_fields(line);
        if (f.size() != fields)
            throw InputError(name + " line " + std::to_string(line_no) + ": expected " + std::to_string(fields) +
                             " fields");
        fn(f, line_no);
    }
}

class Pipeline {
public:
    Pipeline(const RunConfig& cfg, const RunOptions& opts)
        : cfg_(cfg), opts_(opts), config_digest_(sha256_hex(cfg.source_bytes)) {
        fs::create_directories(opts_.out_dir);
        load_manifest();
    }

    void run_all() {
        for (Stage s : kStages) execute(s);
    }

    void run(Stage target) {
        for (Stage s : kStages) {
            if (s == target) {
                execute(s);
                break;
            }
            if (!load_if_valid(s)) execute(s);
        }
    }

private:
    fs::path out(const std::string& name) const { return opts_.out_dir / name; }
    fs::path checkpoint_dir() const { return out("checkpoints"); }

    void log(const std::string& msg) const {
        if (opts_.log) *opts_.log << msg << '\n';
    }

    // Manifest -----------------------------------------------------------

    void load_manifest() {
        manifest_ = ojson::object();
        manifest_["format"] = "cbound-manifest";
        manifest_["version"] = 1;
        manifest_["tool"] = {{"name", "cbound"}, {"version", CBOUND_VERSION}};
        manifest_["libraries"] = {
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"zlib", zlibVersion()},
            {"openssl", OpenSSL_version(OPENSSL_VERSION)},
        };
        manifest_["config"] = {{"path", cfg_.source_path.string()}, {"sha256", config_digest_}};
        manifest_["stages"] = ojson::object();

        std::error_code ec;
        if (!fs::is_regular_file(out("manifest.json"), ec)) return;
        try {
            const auto old = ojson::parse(read_file(out("manifest.json")));
            if (old.value("/config/sha256"_json_pointer, "") == config_digest_ &&
                old.value("/tool/version"_json_pointer, "") == CBOUND_VERSION && old.contains("stages") &&
                old["stages"].is_object())
                manifest_["stages"] = old["stages"];
        } catch (const std::exception&) {
            // An unreadable manifest just means nothing can be reused.
        }
    }

    void write_manifest() { atomic_write_file(out("manifest.json"), manifest_.dump(2) + "\n"); }

    bool stage_intact(Stage s) const {
        const auto& stages = manifest_["stages"];
        if (!stages.contains(stage_name(s))) return false;
        const auto& entry = stages[stage_name(s)];
        try {
            for (const auto& [name, digest] : entry.at("outputs").items()) {
                std::error_code ec;
                if (!fs::is_regular_file(out(name), ec)) return false;
                if (sha256_hex(read_file(out(name))) != digest.get<std::string>()) return false;
            }
            if (entry.contains("inputs"))
                for (const auto& [name, in] : entry["inputs"].items())
                    if (sha256_hex(read_file(in.at("path").get<std::string>())) != in.at("sha256").get<std::string>())
                        return false;
        } catch (const std::exception&) {
            return false;
        }
        return true;
    }

    void record_stage(Stage s, const std::vector<std::string>& outputs, ojson inputs = nullptr) {
        auto& stages = manifest_["stages"];
        bool downstream = false;
        for (Stage k : kStages) {
            if (downstream) stages.erase(stage_name(k));
            if (k == s) downstream = true;
        }
        ojson entry;
        ojson digests = ojson::object();
        for (const auto& name : outputs) digests[name] = sha256_hex(read_file(out(name)));
        entry["outputs"] = digests;
        if (!inputs.is_null()) entry["inputs"] = inputs;
        stages[stage_name(s)] = entry;
        write_manifest();
    }

    // Stage plumbing -----------------------------------------------------

    bool load_if_valid(Stage s) {
        if (!stage_intact(s)) return false;
        switch (s) {
            case Stage::Simulate: load_missrates(); break;
            case Stage::Prepare: load_dataset(); break;
            case Stage::Sweep: load_records(); break;
            case Stage::Analyze: break;
        }
        log(std::string(stage_name(s)) + ": reusing artifacts in " + opts_.out_dir.string());
        return true;
    }

    void execute(Stage s) {
        switch (s) {
            case Stage::Simulate: simulate(); break;
            case Stage::Prepare: prepare(); break;
            case Stage::Sweep: sweep_stage(); break;
            case Stage::Analyze: analyze(); break;
        }
    }

    // simulate -----------------------------------------------------------

    void simulate() {
        AccessTrace trace;
        ojson inputs = nullptr;
        if (cfg_.trace.kind == "lackey") {
            trace = load_lackey_file(cfg_.trace.path);
            inputs = {{"trace", {{"path", cfg_.trace.path.string()}, {"sha256", sha256_hex(read_file(cfg_.trace.path))}}}};
        } else {
            trace = generate_synthetic(cfg_.trace.synthetic, cfg_.seed);
        }
        auto series = miss_rate_series(trace, cfg_.cache.capacities, cfg_.cache.line_size,
                                       cfg_.cache.window_instructions);
        std::string csv = kMissratesHeader;
        csv += '\n';
        const std::size_t windows = series.empty() ? 0 : series.front().rates.size();
        for (std::size_t w = 0; w < windows; ++w)
            for (const auto& s : series)
                csv += std::to_string(w) + ',' + std::to_string(s.cache_lines) + ',' + format_g(s.rates[w], 9) + ',' +
                       std::to_string(s.accesses_per_window[w]) + '\n';
        atomic_write_file(out("missrates.csv"), csv);
        for (const auto& s : series)
            if (s.cache_lines == cfg_.cache.model_capacity) model_rates_ = s.rates;
        if (!model_rates_) model_rates_.emplace();
        record_stage(Stage::Simulate, {"missrates.csv"}, inputs);
        log("simulate: " + std::to_string(trace.instruction_count()) + " instructions, " +
            std::to_string(trace.data_access_count()) + " data accesses, " + std::to_string(windows) +
            " windows x " + std::to_string(series.size()) + " capacities -> missrates.csv");
    }

    // Rates are rebuilt from the integer counts so a reloaded series is
    // bit-identical to the one computed in memory.
    void load_missrates() {
        std::vector<double> rates;
        double prev = 1.0;
        for_each_row(out("missrates.csv"), kMissratesHeader, 4, [&](const auto& f, std::size_t line) {
            if (parse_field<std::uint64_t>(f[1], "missrates.csv", line) != cfg_.cache.model_capacity) return;
            const auto w = parse_field<std::uint64_t>(f[0], "missrates.csv", line);
            if (w != rates.size()) throw InputError("missrates.csv line " + std::to_string(line) + ": window out of order");
            const auto rate = parse_field<double>(f[2], "missrates.csv", line);
            const auto acc = parse_field<std::uint64_t>(f[3], "missrates.csv", line);
            if (acc > 0) {
                const auto misses = static_cast<std::uint64_t>(std::llround(rate * static_cast<double>(acc)));
                prev = static_cast<double>(misses) / static_cast<double>(acc);
            }
            rates.push_back(prev);
        });
        model_rates_ = std::move(rates);
    }

    const std::vector<double>& model_rates() {
        if (!model_rates_ && !load_if_valid(Stage::Simulate)) simulate();
        return *model_rates_;
    }

    // prepare ------------------------------------------------------------

    double lo() const { return std::log10(cfg_.preprocess.epsilon); }

    void prepare() {
        const auto& rates = model_rates();
        if (rates.empty()) throw InputError("trace produced no miss-rate windows");
        Dataset d;
        d.trace_id = cfg_.trace.id;
        d.seq = discretize(log_clip(rates, cfg_.preprocess.epsilon), cfg_.preprocess.bins, lo(), 0.0);
        d.split = chunk_split(d.seq.size(), cfg_.preprocess.chunk_length, cfg_.preprocess.train_fraction, cfg_.seed);

        std::vector<const char*> label(d.seq.size(), "train");
        for (const auto& r : d.split.test_chunks)
            for (std::size_t t = r.begin; t < r.end; ++t) label[t] = "test";
        std::string csv = kDatasetHeader;
        csv += '\n';
        for (std::size_t t = 0; t < d.seq.size(); ++t)
            csv += std::to_string(t) + ',' + std::to_string(d.seq.symbols[t]) + ',' + label[t] + '\n';
        atomic_write_file(out("dataset.csv"), csv);
        record_stage(Stage::Prepare, {"dataset.csv"});
        log("prepare: " + std::to_string(d.seq.size()) + " symbols, " + std::to_string(d.split.train_chunks.size()) +
            " train / " + std::to_string(d.split.test_chunks.size()) + " test chunks -> dataset.csv");
        data_ = std::move(d);
    }

    void load_dataset() {
        Dataset d;
        d.trace_id = cfg_.trace.id;
        d.seq.bin_count = cfg_.preprocess.bins;
        d.seq.lo = lo();
        d.seq.hi = 0.0;
        std::vector<bool> is_test;
        for_each_row(out("dataset.csv"), kDatasetHeader, 3, [&](const auto& f, std::size_t line) {
            if (parse_field<std::size_t>(f[0], "dataset.csv", line) != d.seq.size())
                throw InputError("dataset.csv line " + std::to_string(line) + ": index out of order");
            const auto sym = parse_field<Symbol>(f[1], "dataset.csv", line);
            if (sym < 0 || sym >= cfg_.preprocess.bins)
                throw InputError("dataset.csv line " + std::to_string(line) + ": symbol out of range");
            if (f[2] != "train" && f[2] != "test")
                throw InputError("dataset.csv line " + std::to_string(line) + ": split must be train or test");
            d.seq.symbols.push_back(sym);
            is_test.push_back(f[2] == "test");
        });
        const std::size_t len = cfg_.preprocess.chunk_length;
        d.split.chunk_length = len;
        for (std::size_t b = 0; b < d.seq.size(); b += len) {
            const Range r{b, std::min(b + len, d.seq.size())};
            for (std::size_t t = r.begin; t < r.end; ++t)
                if (is_test[t] != is_test[r.begin])
                    throw InputError("dataset.csv: chunk starting at " + std::to_string(b) + " mixes train and test");
            (is_test[r.begin] ? d.split.test_chunks : d.split.train_chunks).push_back(r);
        }
        if (d.split.train_chunks.empty() || d.split.test_chunks.empty())
            throw InputError("dataset.csv: need both train and test chunks");
        data_ = std::move(d);
    }

    const Dataset& data() {
        if (!data_ && !load_if_valid(Stage::Prepare)) prepare();
        return *data_;
    }

    // sweep --------------------------------------------------------------

    void sweep_stage() {
        const auto& d = data();
        fs::create_directories(checkpoint_dir());
        for (const auto& e : fs::directory_iterator(checkpoint_dir()))
            if (e.path().extension() == ".json" && e.path().filename().string().rfind("model_", 0) == 0)
                fs::remove(e.path());
        auto sc = make_sweep_config(cfg_, opts_.jobs);
        sc.checkpoint_dir = checkpoint_dir();
        log("sweep: " + std::to_string(sc.seeds.size() * sc.architectures.size() * sc.beta_grid.size()) +
            " trainings x " + std::to_string(sc.gmin_grid.size()) + " thresholds on " + std::to_string(opts_.jobs) +
            " thread(s)");
        auto recs = sweep(sc, d);
        atomic_write_file(out("boundary.csv"), records_to_csv(recs));

        std::vector<std::string> outputs{"boundary.csv"};
        std::vector<std::string> ckpts;
        for (const auto& e : fs::directory_iterator(checkpoint_dir()))
            if (e.path().extension() == ".json") ckpts.push_back("checkpoints/" + e.path().filename().string());
        std::sort(ckpts.begin(), ckpts.end());
        outputs.insert(outputs.end(), ckpts.begin(), ckpts.end());
        record_stage(Stage::Sweep, outputs);
        const auto failed = std::count_if(recs.begin(), recs.end(),
                                          [](const auto& r) { return r.status == RecordStatus::Failed; });
        log("sweep: " + std::to_string(recs.size()) + " records (" + std::to_string(failed) +
            " failed) -> boundary.csv");
        records_ = std::move(recs);
    }

    void load_records() {
        auto recs = records_from_csv(read_file(out("boundary.csv")));
        for (auto& r : recs) attach_checkpoint(r);
        records_ = std::move(recs);
    }

    void attach_checkpoint(ModelRecord& r) const {
        const auto& grid = cfg_.sweep.beta_grid;
        const auto it = std::find(grid.begin(), grid.end(), r.beta);
        if (it == grid.end()) throw InputError("boundary.csv: beta " + format_shortest(r.beta) + " is not in the config grid");
        r.checkpoint = (checkpoint_dir() / checkpoint_name(r.seed, r.width, static_cast<std::size_t>(it - grid.begin()))).string();
    }

    const std::vector<ModelRecord>& records() {
        if (!records_ && !load_if_valid(Stage::Sweep)) sweep_stage();
        return *records_;
    }

    // analyze ------------------------------------------------------------

    void analyze() {
        const auto& d = data();
        const auto& recs = records();
        const auto curve = pareto_frontier(recs, cfg_.analysis.boundary_loss);
        atomic_write_file(out("frontier.csv"), records_to_csv(curve.points));

        const auto usable = std::count_if(curve.points.begin(), curve.points.end(),
                                          [](const auto& p) { return p.cost_J > 0; });
        std::optional<PhaseSegmentation> seg;
        if (usable >= static_cast<long>(kMinPhasePoints)) seg = segment_phases(curve);
        else
            log("analyze: frontier has " + std::to_string(usable) +
                " points with J > 0; phases.csv left without a data row (need 6)");
        atomic_write_file(out("phases.csv"), phases_to_csv(d.trace_id, seg));

        std::map<std::string, GatedModel<double>> loaded;
        std::vector<PrunedModel<double>> models;
        for (auto p : curve.points) {
            if (p.checkpoint.empty()) attach_checkpoint(p);
            auto it = loaded.find(p.checkpoint);
            if (it == loaded.end()) it = loaded.emplace(p.checkpoint, load_checkpoint(p.checkpoint)).first;
            models.push_back(apply_threshold(it->second, p.g_min));
        }
        std::vector<Range> chunks = d.split.train_chunks;
        chunks.insert(chunks.end(), d.split.test_chunks.begin(), d.split.test_chunks.end());
        std::sort(chunks.begin(), chunks.end(), [](const Range& a, const Range& b) { return a.begin < b.begin; });
        auto map = local_likelihood_map(models, d.seq.symbols, cfg_.analysis.heatmap_window, chunks);
        map.trace_id = d.trace_id;
        atomic_write_file(out("heatmap.csv"), heatmap_to_csv(map));

        std::size_t n_max = 1;
        for (const auto& a : cfg_.model.architectures()) n_max = std::max(n_max, a.parameter_count());
        std::string bounds = kBoundsHeader;
        bounds += '\n';
        for (const auto& p : curve.points)
            bounds += std::to_string(p.cost_J) + ',' + format_shortest(p.loss_train) + ',' +
                      format_shortest(p.loss_test) + ',' +
                      format_shortest(description_length(static_cast<double>(p.cost_J), cfg_.analysis.dl_a,
                                                         cfg_.analysis.dl_b, static_cast<double>(n_max),
                                                         cfg_.analysis.dl_c)) +
                      '\n';
        atomic_write_file(out("description_length.csv"), bounds);

        record_stage(Stage::Analyze, {"frontier.csv", "phases.csv", "heatmap.csv", "description_length.csv"});
        std::string msg = "analyze: frontier of " + std::to_string(curve.points.size()) + " points";
        if (seg) msg += ", b1 = " + format_shortest(seg->b1_cost) + ", b2 = " + format_shortest(seg->b2_cost);
        log(msg + " -> frontier.csv phases.csv heatmap.csv description_length.csv");
    }

    const RunConfig& cfg_;
    RunOptions opts_;
    std::string config_digest_;
    ojson manifest_;
    std::optional<std::vector<double>> model_rates_;
    std::optional<Dataset> data_;
    std::optional<std::vector<ModelRecord>> records_;
};

}  // namespace

void run_stage(const RunConfig& cfg, Stage target, const RunOptions& opts) {
    Pipeline(cfg, opts).run(target);
}

void run_all(const RunConfig& cfg, const RunOptions& opts) { Pipeline(cfg, opts).run_all(); }

}  // namespace cbound::cli
