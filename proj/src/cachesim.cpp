#include "cbound/cachesim.hpp"

#include "cbound/errors.hpp"

#include <algorithm>
#include <bit>
#include <unordered_map>

namespace cbound {

namespace {

/// Fenwick tree over access timestamps. A timestamp is marked while it is the
/// most recent access of some line, so the marks strictly between two
/// accesses to the same line count the distinct lines touched in between.
class RecencyIndex {
public:
    explicit RecencyIndex(std::size_t n) : tree_(n + 1, 0) {}

    void add(std::size_t pos, int delta) {
        for (std::size_t i = pos + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }

    /// Marks in [0, pos).
    std::int64_t prefix(std::size_t pos) const {
        std::int64_t s = 0;
        for (std::size_t i = pos; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<std::int64_t> tree_;
};

}  // namespace

std::vector<StackDistance> stack_distances(std::span<const std::uint64_t> lines) {
    std::vector<StackDistance> out(lines.size(), kInfiniteDistance);
    RecencyIndex index(lines.size());
    std::unordered_map<std::uint64_t, std::size_t> last;
    last.reserve(lines.size() / 4 + 16);
    for (std::size_t t = 0; t < lines.size(); ++t) {
        auto [it, fresh] = last.try_emplace(lines[t], t);
        if (!fresh) {
            const std::size_t prev = it->second;
            out[t] = static_cast<StackDistance>(1 + index.prefix(t) - index.prefix(prev + 1));
            index.add(prev, -1);
            it->second = t;
        }
        index.add(t, +1);
    }
    return out;
}

StackDistanceStream stack_distances(const AccessTrace& trace, std::uint32_t line_size) {
    if (line_size == 0 || !std::has_single_bit(line_size))
        throw ConfigError("line_size must be a power of two");
    const int shift = std::countr_zero(line_size);

    StackDistanceStream s;
    s.line_size = line_size;
    std::vector<std::uint64_t> lines;
    lines.reserve(trace.events.size());
    s.instructions_before.reserve(trace.events.size());
    for (const auto& ev : trace.events) {
        if (ev.kind == AccessKind::InstrFetch) {
            ++s.total_instructions;
            continue;
        }
        lines.push_back(ev.address >> shift);
        s.instructions_before.push_back(s.total_instructions);
    }
    s.distances = stack_distances(lines);
    return s;
}

std::vector<MissRateSeries> miss_rate_series(const StackDistanceStream& stream,
                                             std::span<const std::uint64_t> cache_sizes_lines,
                                             std::uint64_t window_instructions,
                                             const std::string& trace_id) {
    if (window_instructions < 1) throw ConfigError("window_instructions must be >= 1");
    if (std::any_of(cache_sizes_lines.begin(), cache_sizes_lines.end(), [](auto c) { return c < 1; }))
        throw ConfigError("cache capacities must be >= 1 line");

    auto window_of = [&](std::uint64_t instr_before) {
        return instr_before == 0 ? 0 : (instr_before - 1) / window_instructions;
    };
    std::uint64_t windows = stream.total_instructions / window_instructions;
    if (!stream.distances.empty())
        windows = std::max(windows, window_of(stream.instructions_before.back()) + 1);

    std::vector<MissRateSeries> out;
    out.reserve(cache_sizes_lines.size());
    for (auto c : cache_sizes_lines) {
        MissRateSeries m;
        m.cache_lines = c;
        m.window_instructions = window_instructions;
        m.trace_id = trace_id;
        m.accesses_per_window.assign(windows, 0);
        m.misses_per_window.assign(windows, 0);
        out.push_back(std::move(m));
    }
    if (out.empty() || windows == 0) {
        for (auto& m : out) m.accesses_per_window.clear(), m.misses_per_window.clear();
        return out;
    }

    // One pass over the distance stream feeds every capacity.
    for (std::size_t i = 0; i < stream.distances.size(); ++i) {
        const auto w = window_of(stream.instructions_before[i]);
        const auto d = stream.distances[i];
        for (auto& m : out) {
            ++m.accesses_per_window[w];
            if (d == kInfiniteDistance || d > m.cache_lines) ++m.misses_per_window[w];
        }
    }
    for (auto& m : out) {
        m.rates.resize(windows);
        double prev = 1.0;
        for (std::uint64_t w = 0; w < windows; ++w) {
            if (m.accesses_per_window[w] > 0)
                prev = static_cast<double>(m.misses_per_window[w]) /
                       static_cast<double>(m.accesses_per_window[w]);
            m.rates[w] = prev;
        }
    }
    return out;
}

std::vector<MissRateSeries> miss_rate_series(const AccessTrace& trace,
                                             std::span<const std::uint64_t> cache_sizes_lines,
                                             std::uint32_t line_size,
                                             std::uint64_t window_instructions) {
    return miss_rate_series(stack_distances(trace, line_size), cache_sizes_lines,
                            window_instructions, trace.source_id);
}

}  // namespace cbound
