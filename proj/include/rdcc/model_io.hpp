#pragma once

#include <string>

#include "rdcc/model.hpp"

namespace rdcc {

// Binary model file: "RDCC" magic, little-endian uint32 format version,
// uint32 byte length of a UTF-8 JSON header (hyperparameters, vocabularies
// in index order, ablation switches, tag list, parameter names), then for
// each parameter in header order a uint32 rank, uint32 extents and the
// row-major float64 values. Round-trips are bit-exact.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(Model& model);
void save_model(Model& model, const std::string& path);  // atomic write

Model deserialize_model(const std::string& bytes, const char* what = "model");
Model load_model(const std::string& path);

}  // namespace rdcc
