#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mlada {

// Shortest-safe round-trip text form of a double ("%.17g").
std::string format_real(double v);

void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mlada
