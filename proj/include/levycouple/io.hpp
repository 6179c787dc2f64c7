#pragma once

// File emission for experiment artifacts. Every write goes through a temp
// file in the destination directory followed by a rename, so a crashed run
// never leaves a half-written artifact behind. CSV output uses shortest
// round-trip number formatting, '.' decimals, and LF line endings on every
// platform, which keeps rerun artifacts byte-comparable.

#include <string>
#include <vector>

#include "levycouple/errors.hpp"

namespace levycouple::io {

struct IoError : Error {
    using Error::Error;
};

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows);

std::string read_file(const std::string& path);

void write_file_atomic(const std::string& path, const std::string& content);

} // namespace levycouple::io
