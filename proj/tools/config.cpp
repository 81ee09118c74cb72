#include "config.hpp"

#include "cbound/errors.hpp"
#include "cbound/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace cbound::cli {

namespace {

using nlohmann::json;

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError("missing required key " + name(key));
        return j_.at(key);
    }

    Section child(const std::string& key) { return Section(raw(key), name(key)); }

    std::optional<Section> optional_child(const std::string& key) {
        if (!has(key)) {
            seen_.insert(key);
            return std::nullopt;
        }
        return child(key);
    }

    double number(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(name(key) + " must be a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) {
        return has(key) ? number(key) : (seen_.insert(key), fallback);
    }

    std::int64_t integer(const std::string& key) {
        const auto& v = raw(key);
        return as_integer(v, name(key));
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        return has(key) ? integer(key) : (seen_.insert(key), fallback);
    }

    std::uint64_t unsigned_int(const std::string& key, std::uint64_t min = 0) {
        const auto& v = raw(key);
        return as_unsigned(v, name(key), min);
    }
    std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback, std::uint64_t min) {
        return has(key) ? unsigned_int(key, min) : (seen_.insert(key), fallback);
    }

    std::string string(const std::string& key) {
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(name(key) + " must be a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : (seen_.insert(key), fallback);
    }

    std::vector<std::uint64_t> unsigned_list(const std::string& key, std::uint64_t min) {
        const auto& v = raw(key);
        if (!v.is_array() || v.empty()) throw ConfigError(name(key) + " must be a non-empty array");
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(as_unsigned(v[i], name(key) + "[" + std::to_string(i) + "]", min));
        return out;
    }

    /// An explicit array, or {"scale": "log"|"linear", "lo", "hi", "count"}.
    std::vector<double> grid(const std::string& key) {
        const auto& v = raw(key);
        std::vector<double> out;
        if (v.is_array()) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!v[i].is_number()) throw ConfigError(name(key) + "[" + std::to_string(i) + "] must be a number");
                out.push_back(v[i].get<double>());
            }
            return out;
        }
        Section g(v, name(key));
        const std::string scale = g.string("scale");
        const double lo = g.number("lo");
        const double hi = g.number("hi");
        const auto count = g.unsigned_int("count", 1);
        g.finish();
        if (scale != "log" && scale != "linear")
            throw ConfigError(name(key) + ".scale must be \"log\" or \"linear\"");
        if (scale == "log" && !(lo > 0 && hi > 0))
            throw ConfigError(name(key) + ": log grid bounds must be > 0");
        if (count == 1) return {lo};
        for (std::uint64_t k = 0; k < count; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(count - 1);
            out.push_back(scale == "log" ? std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)))
                                         : lo + t * (hi - lo));
        }
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key " + name(it.key()));
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    static std::int64_t as_integer(const json& v, const std::string& label) {
        if (v.is_number_integer()) return v.get<std::int64_t>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
        }
        throw ConfigError(label + " must be an integer");
    }

    static std::uint64_t as_unsigned(const json& v, const std::string& label, std::uint64_t min) {
        std::uint64_t out = 0;
        if (v.is_number_unsigned()) out = v.get<std::uint64_t>();
        else {
            const auto i = as_integer(v, label);
            if (i < 0) throw ConfigError(label + " must be >= " + std::to_string(min));
            out = static_cast<std::uint64_t>(i);
        }
        if (out < min) throw ConfigError(label + " must be >= " + std::to_string(min));
        return out;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

int to_int(std::uint64_t v, const std::string& label) {
    if (v > 1u << 30) throw ConfigError(label + " is too large");
    return static_cast<int>(v);
}

TraceConfig parse_trace(Section s, const std::filesystem::path& base) {
    TraceConfig t;
    t.kind = s.string("kind");
    t.id = s.string("id", t.kind);
    if (t.kind == "lackey") {
        t.path = s.string("path");
        if (t.path.is_relative() && !base.empty()) t.path = base / t.path;
        s.finish();
        return t;
    }
    auto& sp = t.synthetic;
    sp.instr_per_access = static_cast<std::uint32_t>(s.unsigned_int("instr_per_access", 4, 0));
    sp.line_bytes = static_cast<std::uint32_t>(s.unsigned_int("line_bytes", 64, 1));
    sp.access_size = static_cast<std::uint32_t>(s.unsigned_int("access_size", 8, 1));
    sp.noise = s.number("noise", 0.0);
    if (t.kind == "constant_loop") {
        sp.kind = ConstantLoop{s.unsigned_int("lines", 1), s.unsigned_int("iters", 1)};
    } else if (t.kind == "periodic_phases") {
        PeriodicPhases p;
        p.phase_lines = s.unsigned_list("phase_lines", 1);
        p.phase_len = s.unsigned_int("phase_len", 1);
        p.cycles = s.unsigned_int("cycles", 1);
        sp.kind = p;
    } else if (t.kind == "random_walk") {
        RandomWalk p;
        p.span = s.unsigned_int("span", p.span, 1);
        p.n = s.unsigned_int("n", 1);
        p.center_step = s.number("center_step", p.center_step);
        p.log_spread_step = s.number("log_spread_step", p.log_spread_step);
        p.min_spread = s.number("min_spread", p.min_spread);
        p.max_spread = s.number("max_spread", p.max_spread);
        sp.kind = p;
    } else {
        throw ConfigError("trace.kind must be one of lackey, constant_loop, periodic_phases, random_walk");
    }
    s.finish();
    return t;
}

void check_ascending(const std::vector<double>& v, const std::string& label) {
    if (v.empty()) throw ConfigError(label + " must not be empty");
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i - 1] < v[i])) throw ConfigError(label + " must be strictly ascending");
}

}  // namespace

std::vector<Architecture> ModelConfig::architectures() const {
    std::vector<Architecture> out;
    for (int w : widths) {
        Architecture a = make_architecture(d_in, w, h);
        if (ff_widths) a.ff = *ff_widths;
        a.validate();
        out.push_back(a);
    }
    return out;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& source_path) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    RunConfig cfg;
    cfg.source_path = source_path;
    cfg.source_bytes = text;
    Section root(doc, "");
    const auto base = source_path.empty() ? std::filesystem::path{} : source_path.parent_path();

    cfg.trace = parse_trace(root.child("trace"), base);

    {
        Section s = root.child("cache");
        auto& c = cfg.cache;
        c.line_size = static_cast<std::uint32_t>(s.unsigned_int("line_size", 64, 1));
        c.capacities = s.unsigned_list("capacities", 1);
        c.window_instructions = s.unsigned_int("window_instructions", 100000, 1);
        c.model_capacity = s.unsigned_int("model_capacity", 1);
        s.finish();
        if ((c.line_size & (c.line_size - 1)) != 0) throw ConfigError("cache.line_size must be a power of two");
        std::sort(c.capacities.begin(), c.capacities.end());
        if (std::adjacent_find(c.capacities.begin(), c.capacities.end()) != c.capacities.end())
            throw ConfigError("cache.capacities must be distinct");
        if (!std::binary_search(c.capacities.begin(), c.capacities.end(), c.model_capacity))
            throw ConfigError("cache.model_capacity must be one of cache.capacities");
    }

    if (auto s = root.optional_child("preprocess")) {
        auto& p = cfg.preprocess;
        p.epsilon = s->number("epsilon", p.epsilon);
        p.bins = to_int(s->unsigned_int("bins", 100, 2), "preprocess.bins");
        p.chunk_length = s->unsigned_int("chunk_length", p.chunk_length, 1);
        p.train_fraction = s->number("train_fraction", p.train_fraction);
        s->finish();
        if (!(p.epsilon > 0 && p.epsilon < 1e-5)) throw ConfigError("preprocess.epsilon must lie in (0, 1e-5)");
        if (p.bins != kVocab) throw ConfigError("preprocess.bins must be 100 (the model's output alphabet)");
        if (!(p.train_fraction > 0 && p.train_fraction < 1))
            throw ConfigError("preprocess.train_fraction must lie in (0, 1)");
    }

    if (auto s = root.optional_child("model")) {
        auto& m = cfg.model;
        m.d_in = to_int(s->unsigned_int("d_in", 8, 1), "model.d_in");
        if (s->has("widths")) {
            m.widths.clear();
            for (auto w : s->unsigned_list("widths", 1)) m.widths.push_back(to_int(w, "model.widths"));
        }
        if (s->has("ff_widths")) {
            const auto ff = s->unsigned_list("ff_widths", 1);
            if (ff.size() != 4) throw ConfigError("model.ff_widths must have 4 entries");
            m.ff_widths = std::array<int, 4>{to_int(ff[0], "model.ff_widths"), to_int(ff[1], "model.ff_widths"),
                                             to_int(ff[2], "model.ff_widths"), to_int(ff[3], "model.ff_widths")};
        }
        m.h = to_int(s->unsigned_int("h", 8, 1), "model.h");
        s->finish();
    }

    {
        auto& w = cfg.sweep;
        w.beta_grid.clear();
        for (int k = 0; k < 12; ++k) w.beta_grid.push_back(std::pow(10.0, -6.0 + 5.0 * k / 11.0));
        for (int k = 0; k < 20; ++k) w.gmin_grid.push_back(0.05 + 0.94 * k / 19.0);
        if (auto s = root.optional_child("sweep")) {
            if (s->has("beta_grid")) w.beta_grid = s->grid("beta_grid");
            if (s->has("gmin_grid")) w.gmin_grid = s->grid("gmin_grid");
            if (s->has("seeds")) w.seeds = s->unsigned_list("seeds", 0);
            if (auto b = s->optional_child("budget")) {
                w.epochs = to_int(b->unsigned_int("epochs", static_cast<std::uint64_t>(w.epochs), 1), "sweep.budget.epochs");
                b->finish();
            }
            w.adam.learning_rate = s->number("learning_rate", w.adam.learning_rate);
            if (auto a = s->optional_child("adam")) {
                w.adam.beta1 = a->number("beta1", w.adam.beta1);
                w.adam.beta2 = a->number("beta2", w.adam.beta2);
                w.adam.epsilon = a->number("epsilon", w.adam.epsilon);
                a->finish();
            }
            s->finish();
        }
        check_ascending(w.beta_grid, "sweep.beta_grid");
        check_ascending(w.gmin_grid, "sweep.gmin_grid");
        if (!(w.adam.learning_rate > 0)) throw ConfigError("sweep.learning_rate must be > 0");
        if (!(w.adam.beta1 >= 0 && w.adam.beta1 < 1) || !(w.adam.beta2 >= 0 && w.adam.beta2 < 1))
            throw ConfigError("sweep.adam.beta1 and beta2 must lie in [0, 1)");
        if (!(w.adam.epsilon > 0)) throw ConfigError("sweep.adam.epsilon must be > 0");
    }

    if (auto s = root.optional_child("analysis")) {
        auto& a = cfg.analysis;
        a.heatmap_window = s->unsigned_int("heatmap_window", a.heatmap_window, 1);
        const auto loss = s->string("boundary_loss", "train");
        if (loss == "train") a.boundary_loss = LossKind::Train;
        else if (loss == "test") a.boundary_loss = LossKind::Test;
        else throw ConfigError("analysis.boundary_loss must be \"train\" or \"test\"");
        if (auto dl = s->optional_child("dl")) {
            a.dl_a = dl->number("a", a.dl_a);
            a.dl_b = dl->number("b", a.dl_b);
            a.dl_c = dl->number("c", a.dl_c);
            dl->finish();
            if (!(a.dl_a >= 0 && a.dl_b >= 0 && a.dl_c >= 0))
                throw ConfigError("analysis.dl coefficients must be >= 0");
        }
        s->finish();
    }

    cfg.output_dir = root.string("output_dir", "out");
    cfg.seed = root.unsigned_int("seed", 0, 0);
    root.finish();

    // Semantic checks that need the whole document.
    if (cfg.trace.kind != "lackey") {
        SyntheticSpec probe = cfg.trace.synthetic;
        if (probe.line_bytes == 0 || (probe.line_bytes & (probe.line_bytes - 1)) != 0)
            throw ConfigError("trace.line_bytes must be a power of two");
        if (!(probe.noise >= 0 && probe.noise < 1)) throw ConfigError("trace.noise must lie in [0, 1)");
    }
    make_sweep_config(cfg, 1).validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw ConfigError("config file not found: " + path.string());
    std::string text;
    try {
        text = read_file(path);
    } catch (const InputError&) {
        throw ConfigError("cannot read config file: " + path.string());
    }
    return parse_config(text, path);
}

SweepConfig make_sweep_config(const RunConfig& cfg, unsigned threads) {
    SweepConfig s;
    s.beta_grid = cfg.sweep.beta_grid;
    s.gmin_grid = cfg.sweep.gmin_grid;
    s.seeds = cfg.sweep.seeds;
    s.architectures = cfg.model.architectures();
    s.train.epochs = cfg.sweep.epochs;
    s.train.adam = cfg.sweep.adam;
    s.threads = threads;
    return s;
}

}  // namespace cbound::cli
