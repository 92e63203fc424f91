#pragma once

#include <string>
#include <string_view>

#include "rdcc/config.hpp"

namespace rdcc {

// Flat "key = value" config file, '#' comments, UTF-8. Unknown keys are
// rejected; every key defaults to the TrainConfig default.
TrainConfig parse_run_config(std::string_view content,
                             const char* what = "config");
TrainConfig load_run_config(const std::string& path);

// Applies one key/value pair onto an existing config (used for file parsing
// and CLI overrides alike). Throws DataError on unknown keys or bad values.
void apply_config_entry(TrainConfig& cfg, std::string_view key,
                        std::string_view value, const std::string& where);

std::string run_config_keys_help();

}  // namespace rdcc
