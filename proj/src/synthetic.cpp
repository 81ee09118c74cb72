#include "cbound/errors.hpp"
#include "cbound/rng.hpp"
#include "cbound/trace.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace cbound {

namespace {

constexpr std::uint64_t kCodeBase = 0x04000000;
constexpr std::uint64_t kDataBase = 0;
constexpr std::uint64_t kPhaseRegionLines = std::uint64_t{1} << 32;
constexpr std::uint64_t kColdRegionLines = std::uint64_t{1} << 40;

class Emitter {
public:
    Emitter(AccessTrace& trace, const SyntheticSpec& spec, std::uint64_t seed)
        : trace_(trace), spec_(spec), noise_eng_(rng::make_engine(seed, 0x4015e)) {}

    void data(std::uint64_t line, AccessKind kind = AccessKind::Load) {
        if (spec_.noise > 0.0 && rng::uniform01(noise_eng_) < spec_.noise) emit(kColdRegionLines + cold_++, kind);
        emit(line, kind);
    }

    void reserve(std::uint64_t accesses) {
        trace_.events.reserve(accesses * (spec_.instr_per_access + 1));
    }

private:
    void emit(std::uint64_t line, AccessKind kind) {
        for (std::uint32_t i = 0; i < spec_.instr_per_access; ++i)
            trace_.events.push_back({AccessKind::InstrFetch, kCodeBase + 4 * (pc_++ % 256), 4});
        trace_.events.push_back({kind, kDataBase + line * spec_.line_bytes, spec_.access_size});
    }

    AccessTrace& trace_;
    const SyntheticSpec& spec_;
    rng::Engine noise_eng_;
    std::uint64_t pc_ = 0;
    std::uint64_t cold_ = 0;
};

void validate(const SyntheticSpec& spec) {
    if (spec.line_bytes == 0 || !std::has_single_bit(spec.line_bytes))
        throw ConfigError("synthetic: line_bytes must be a power of two");
    if (spec.access_size == 0) throw ConfigError("synthetic: access_size must be >= 1");
    if (!(spec.noise >= 0.0 && spec.noise < 1.0)) throw ConfigError("synthetic: noise must be in [0, 1)");
}

AccessTrace constant_loop(const ConstantLoop& p, const SyntheticSpec& spec, std::uint64_t seed) {
    if (p.lines < 1) throw ConfigError("constant_loop: lines must be >= 1");
    if (p.iters < 1) throw ConfigError("constant_loop: iters must be >= 1");
    AccessTrace trace;
    trace.source_id = "constant_loop";
    Emitter emit(trace, spec, seed);
    emit.reserve(p.lines * p.iters);
    for (std::uint64_t it = 0; it < p.iters; ++it)
        for (std::uint64_t l = 0; l < p.lines; ++l) emit.data(l);
    return trace;
}

AccessTrace periodic_phases(const PeriodicPhases& p, const SyntheticSpec& spec, std::uint64_t seed) {
    if (p.phase_lines.empty()) throw ConfigError("periodic_phases: need at least one phase");
    if (std::any_of(p.phase_lines.begin(), p.phase_lines.end(), [](auto w) { return w < 1; }))
        throw ConfigError("periodic_phases: phase working sets must be >= 1 line");
    if (p.phase_len < 1) throw ConfigError("periodic_phases: phase_len must be >= 1");
    if (p.cycles < 1) throw ConfigError("periodic_phases: cycles must be >= 1");

    // Each phase walks a fixed seeded permutation of its own line region, so
    // every re-reference inside a phase has stack distance equal to its set size.
    auto eng = rng::make_engine(seed, 0x9e71);
    std::vector<std::vector<std::uint64_t>> order(p.phase_lines.size());
    for (std::size_t ph = 0; ph < order.size(); ++ph) {
        auto& o = order[ph];
        o.resize(p.phase_lines[ph]);
        std::iota(o.begin(), o.end(), (ph + 1) * kPhaseRegionLines);
        for (std::size_t i = o.size(); i > 1; --i) std::swap(o[i - 1], o[rng::below(eng, i)]);
    }

    AccessTrace trace;
    trace.source_id = "periodic_phases";
    Emitter emit(trace, spec, seed);
    emit.reserve(p.phase_len * p.phase_lines.size() * p.cycles);
    std::vector<std::uint64_t> cursor(order.size(), 0);
    for (std::uint64_t c = 0; c < p.cycles; ++c) {
        for (std::size_t ph = 0; ph < order.size(); ++ph) {
            const auto& o = order[ph];
            for (std::uint64_t k = 0; k < p.phase_len; ++k) {
                emit.data(o[cursor[ph]]);
                cursor[ph] = (cursor[ph] + 1) % o.size();
            }
        }
    }
    return trace;
}

AccessTrace random_walk(const RandomWalk& p, const SyntheticSpec& spec, std::uint64_t seed) {
    if (p.span < 1) throw ConfigError("random_walk: span must be >= 1");
    if (p.n < 1) throw ConfigError("random_walk: n must be >= 1");
    if (!(p.center_step >= 0.0) || !(p.log_spread_step >= 0.0))
        throw ConfigError("random_walk: step sizes must be >= 0");
    if (!(p.min_spread >= 1.0) || !(p.max_spread >= p.min_spread))
        throw ConfigError("random_walk: need 1 <= min_spread <= max_spread");

    auto eng = rng::make_engine(seed, 0x3a1c);
    AccessTrace trace;
    trace.source_id = "random_walk";
    Emitter emit(trace, spec, seed);
    emit.reserve(p.n);

    const double span = static_cast<double>(p.span);
    const double lo = std::log2(p.min_spread);
    const double hi = std::log2(p.max_spread);
    double center = span / 2.0;
    double log_spread = 0.5 * (lo + hi);
    auto reflect = [](double x, double a, double b) {
        if (b <= a) return a;
        const double w = b - a;
        double t = std::fmod(x - a, 2.0 * w);
        if (t < 0) t += 2.0 * w;
        return a + (t <= w ? t : 2.0 * w - t);
    };
    for (std::uint64_t i = 0; i < p.n; ++i) {
        center = reflect(center + p.center_step * rng::normal(eng), 0.0, span);
        log_spread = reflect(log_spread + p.log_spread_step * rng::normal(eng), lo, hi);
        const double offset = std::exp2(log_spread) * rng::normal(eng);
        double pos = std::fmod(std::floor(center + offset), span);
        if (pos < 0) pos += span;
        emit.data(static_cast<std::uint64_t>(pos));
    }
    return trace;
}

}  // namespace

AccessTrace generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    validate(spec);
    return std::visit(
        [&](const auto& kind) -> AccessTrace {
            using K = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<K, ConstantLoop>) return constant_loop(kind, spec, seed);
            else if constexpr (std::is_same_v<K, PeriodicPhases>) return periodic_phases(kind, spec, seed);
            else return random_walk(kind, spec, seed);
        },
        spec.kind);
}

}  // namespace cbound
