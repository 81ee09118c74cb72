#include "cbound/trace.hpp"

#include "cbound/errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

namespace cbound {

std::size_t AccessTrace::instruction_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(),
        [](const AccessEvent& e) { return e.kind == AccessKind::InstrFetch; }));
}

std::size_t AccessTrace::data_access_count() const noexcept {
    return events.size() - instruction_count();
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t'; }

std::string_view trim_right(std::string_view s) {
    while (!s.empty() && (is_space(s.back()) || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

LackeyParser::LackeyParser(std::string source_id) { trace_.source_id = std::move(source_id); }

void LackeyParser::feed(std::string_view line) {
    ++line_no_;
    line = trim_right(line);
    std::size_t pos = 0;
    while (pos < line.size() && is_space(line[pos])) ++pos;
    if (pos + 1 >= line.size() || !is_space(line[pos + 1])) {
        ++trace_.unrecognized_lines;
        return;
    }
    AccessEvent ev;
    switch (line[pos]) {
        case 'I': ev.kind = AccessKind::InstrFetch; break;
        case 'L': ev.kind = AccessKind::Load; break;
        case 'S': ev.kind = AccessKind::Store; break;
        case 'M': ev.kind = AccessKind::Modify; break;
        default: ++trace_.unrecognized_lines; return;
    }
    pos += 1;
    while (pos < line.size() && is_space(line[pos])) ++pos;
    std::string_view rest = line.substr(pos);

    const auto comma = rest.find(',');
    if (comma == std::string_view::npos) throw ParseError(line_no_, "missing ',' between address and size");
    const std::string_view addr = rest.substr(0, comma);
    const std::string_view size = rest.substr(comma + 1);

    auto [ap, aec] = std::from_chars(addr.data(), addr.data() + addr.size(), ev.address, 16);
    if (addr.empty() || aec != std::errc{} || ap != addr.data() + addr.size())
        throw ParseError(line_no_, "malformed hex address '" + std::string(addr) + "'");

    unsigned long sz = 0;
    auto [sp, sec] = std::from_chars(size.data(), size.data() + size.size(), sz, 10);
    if (size.empty() || sec != std::errc{} || sp != size.data() + size.size() || sz == 0 ||
        sz > 0xffffffffUL)
        throw ParseError(line_no_, "malformed access size '" + std::string(size) + "'");
    ev.size = static_cast<std::uint32_t>(sz);
    trace_.events.push_back(ev);
}

AccessTrace LackeyParser::finish() && { return std::move(trace_); }

AccessTrace parse_lackey(std::istream& in, std::string source_id) {
    LackeyParser parser(std::move(source_id));
    std::string line;
    while (std::getline(in, line)) parser.feed(line);
    return std::move(parser).finish();
}

AccessTrace parse_lackey(std::string_view text, std::string source_id) {
    LackeyParser parser(std::move(source_id));
    while (!text.empty()) {
        const auto nl = text.find('\n');
        parser.feed(text.substr(0, nl));
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return std::move(parser).finish();
}

AccessTrace load_lackey_file(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw InputError("cannot open trace file " + path.string());
    std::array<unsigned char, 2> magic{};
    probe.read(reinterpret_cast<char*>(magic.data()), 2);
    const bool gz = probe.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
    probe.close();

    const std::string id = path.stem().string();
    if (!gz) {
        std::ifstream in(path);
        return parse_lackey(in, id);
    }

    std::unique_ptr<gzFile_s, decltype(&gzclose)> gzf(gzopen(path.c_str(), "rb"), &gzclose);
    if (!gzf) throw InputError("cannot open gzip trace " + path.string());
    LackeyParser parser(id);
    std::string pending;
    std::array<char, 1 << 16> buf{};
    for (;;) {
        const int n = gzread(gzf.get(), buf.data(), static_cast<unsigned>(buf.size()));
        if (n < 0) throw InputError("gzip decompression failed for " + path.string());
        if (n == 0) break;
        pending.append(buf.data(), static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (std::size_t nl; (nl = pending.find('\n', start)) != std::string::npos; start = nl + 1)
            parser.feed(std::string_view(pending).substr(start, nl - start));
        pending.erase(0, start);
    }
    if (!pending.empty()) parser.feed(pending);
    return std::move(parser).finish();
}

std::string to_lackey_line(const AccessEvent& ev) {
    char buf[48];
    const char* prefix = "I  ";
    switch (ev.kind) {
        case AccessKind::InstrFetch: prefix = "I  "; break;
        case AccessKind::Load: prefix = " L "; break;
        case AccessKind::Store: prefix = " S "; break;
        case AccessKind::Modify: prefix = " M "; break;
    }
    std::snprintf(buf, sizeof buf, "%s%08llx,%u", prefix,
                  static_cast<unsigned long long>(ev.address), ev.size);
    return buf;
}

void write_lackey(std::ostream& out, const AccessTrace& trace) {
    for (const auto& ev : trace.events) out << to_lackey_line(ev) << '\n';
}

}  // namespace cbound
