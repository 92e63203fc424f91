#pragma once

#include <string>
#include <string_view>

namespace rdcc {

// Reads a whole file; throws DataError if it cannot be opened.
std::string read_file(const std::string& path);

// Writes via a temp file in the same directory plus an atomic rename, so a
// failure never leaves a partial file at `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace rdcc
