#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cbound {

/// Writes `contents` to a sibling temp file and renames it over `path`, so
/// readers never see a partial file. Throws InputError on I/O failure.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// printf("%.<digits>g"); "nan" for NaN.
std::string format_g(double v, int digits);

/// Shortest text that parses back to exactly `v`; "nan" for NaN.
std::string format_shortest(double v);

}  // namespace cbound
