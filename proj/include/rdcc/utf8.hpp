#pragma once

#include <string>
#include <string_view>

namespace rdcc {

// Decodes strict UTF-8 into code points. Throws DataError on malformed
// input, naming `what` and the byte offset of the bad sequence.
std::u32string utf8_decode(std::string_view bytes, const char* what = "input");

std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t cp);

}  // namespace rdcc
