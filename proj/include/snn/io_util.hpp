#pragma once

#include <string>
#include <string_view>

namespace snn {

// Shortest decimal text that reads back to the same double.
std::string shortest(double v);
std::string fixed(double v, int decimals);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
void append_file(const std::string& path, std::string_view contents);

std::string trim(std::string_view s);

}  // namespace snn
