#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cbound {

enum class AccessKind : std::uint8_t { InstrFetch, Load, Store, Modify };

struct AccessEvent {
    AccessKind kind = AccessKind::Load;
    std::uint64_t address = 0;
    std::uint32_t size = 1;

    bool is_data() const noexcept { return kind != AccessKind::InstrFetch; }
    friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

/// Events in program order.
struct AccessTrace {
    std::vector<AccessEvent> events;
    std::string source_id;
    /// Lines that did not look like Lackey records (banners, blank lines).
    std::size_t unrecognized_lines = 0;

    std::size_t instruction_count() const noexcept;
    std::size_t data_access_count() const noexcept;
};

/// Incremental Lackey line parser. Throws ParseError on a line that has a
/// record prefix (`I`, `L`, `S`, `M` followed by whitespace) but a bad
/// address or size.
class LackeyParser {
public:
    explicit LackeyParser(std::string source_id = {});

    void feed(std::string_view line);
    AccessTrace finish() &&;

private:
    AccessTrace trace_;
    std::size_t line_no_ = 0;
};

AccessTrace parse_lackey(std::istream& in, std::string source_id = {});
AccessTrace parse_lackey(std::string_view text, std::string source_id = {});

/// Reads a Lackey trace from disk; gzip input is detected by its magic bytes.
AccessTrace load_lackey_file(const std::filesystem::path& path);

/// Canonical Lackey line for one event (no trailing newline).
std::string to_lackey_line(const AccessEvent& ev);
void write_lackey(std::ostream& out, const AccessTrace& trace);

// Synthetic generators -------------------------------------------------------

/// One working set of `lines` cache lines, walked in order `iters` times.
struct ConstantLoop {
    std::uint64_t lines = 4;
    std::uint64_t iters = 1;
};

/// Cycles through phases; each phase walks its own working set for
/// `phase_len` data accesses.
struct PeriodicPhases {
    std::vector<std::uint64_t> phase_lines;
    std::uint64_t phase_len = 1;
    std::uint64_t cycles = 1;
};

/// Addresses drawn around a drifting centre with a drifting spread, so the
/// locality changes with no long-term period.
struct RandomWalk {
    std::uint64_t span = 1u << 20;  ///< address range, in lines
    std::uint64_t n = 1;            ///< number of data accesses
    double center_step = 4.0;       ///< std-dev of per-access centre drift, lines
    double log_spread_step = 0.02;  ///< std-dev of per-access log2(spread) drift
    double min_spread = 1.0;        ///< lines
    double max_spread = 4096.0;     ///< lines
};

using SyntheticKind = std::variant<ConstantLoop, PeriodicPhases, RandomWalk>;

struct SyntheticSpec {
    SyntheticKind kind;
    std::uint32_t instr_per_access = 4;
    std::uint32_t line_bytes = 64;
    std::uint32_t access_size = 8;
    /// Probability that a pattern access is preceded by an extra access to
    /// a never-before-touched line (an irregular compulsory miss).
    double noise = 0.0;
};

/// Deterministic in (spec, seed). Throws ConfigError on invalid parameters.
AccessTrace generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace cbound
