#include "rdcc/model_io.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "rdcc/errors.hpp"
#include "rdcc/files.hpp"
#include "rdcc/utf8.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts need byte swaps");

namespace rdcc {

namespace {

constexpr char kMagic[4] = {'R', 'D', 'C', 'C'};

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void put_f64(std::string& out, const double* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

class Reader {
 public:
  Reader(const std::string& bytes, const char* what)
      : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    std::string_view v(bytes_.data() + pos_, n);
    pos_ += n;
    return v;
  }

  void f64(double* out, std::size_t count) {
    need(count * sizeof(double));
    std::memcpy(out, bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(std::string(what_) + ": " + msg);
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated file");
  }

  const std::string& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"d_x", c.d_x},
          {"d_d", c.d_d},
          {"n_r", c.n_r},
          {"f_d", c.f_d},
          {"w_d", c.w_d},
          {"d_b", c.d_b},
          {"f_s", c.f_s},
          {"w_s", c.w_s},
          {"batch", c.batch},
          {"lr", c.lr},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"branches", std::string(branches_name(c.branches))},
          {"residual", c.residual},
          {"char_dropout", c.char_dropout},
          {"bn_momentum", c.bn_momentum},
          {"bn_eps", c.bn_eps},
          {"leaky_alpha", c.leaky_alpha},
          {"max_clause_len", c.max_clause_len}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.d_x = j.at("d_x").get<int>();
  c.d_d = j.at("d_d").get<int>();
  c.n_r = j.at("n_r").get<int>();
  c.f_d = j.at("f_d").get<int>();
  c.w_d = j.at("w_d").get<int>();
  c.d_b = j.at("d_b").get<int>();
  c.f_s = j.at("f_s").get<int>();
  c.w_s = j.at("w_s").get<int>();
  c.batch = j.at("batch").get<int>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const auto branches = branches_from_name(j.at("branches").get<std::string>());
  if (!branches) throw DataError("model header: bad branches value");
  c.branches = *branches;
  c.residual = j.at("residual").get<bool>();
  c.char_dropout = j.at("char_dropout").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_eps = j.at("bn_eps").get<double>();
  c.leaky_alpha = j.at("leaky_alpha").get<double>();
  c.max_clause_len = j.at("max_clause_len").get<int>();
  return c;
}

}  // namespace

std::string serialize_model(Model& model) {
  nlohmann::json header;
  header["config"] = config_to_json(model.cfg);
  header["chars"] = utf8_encode(
      std::u32string(model.vocab.chars().begin(), model.vocab.chars().end()));
  nlohmann::json tags = nlohmann::json::array();
  for (int t = 0; t < kTagCount; ++t) tags.push_back(tag_to_string(t));
  header["tags"] = std::move(tags);
  nlohmann::json features = nlohmann::json::array();
  features.push_back("PAD");
  features.push_back("None");
  for (int t = 0; t < kTagCount; ++t) features.push_back(tag_to_string(t));
  header["features"] = std::move(features);

  auto params = model.persistent();
  nlohmann::json names = nlohmann::json::array();
  for (const auto& p : params) names.push_back(p.name);
  header["params"] = std::move(names);

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kModelFormatVersion);
  const std::string header_bytes = header.dump();
  put_u32(out, static_cast<std::uint32_t>(header_bytes.size()));
  out += header_bytes;
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.value->rank()));
    for (std::size_t d = 0; d < p.value->rank(); ++d)
      put_u32(out, static_cast<std::uint32_t>(p.value->dim(d)));
    put_f64(out, p.value->data(), p.value->size());
  }
  return out;
}

void save_model(Model& model, const std::string& path) {
  write_file_atomic(path, serialize_model(model));
}

Model deserialize_model(const std::string& bytes, const char* what) {
  Reader r(bytes, what);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    r.fail("bad magic (not a model file)");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    r.fail("format version mismatch: expected " +
           std::to_string(kModelFormatVersion) + ", found " +
           std::to_string(version));
  const std::uint32_t header_len = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad JSON header: ") + e.what());
  }

  TrainConfig cfg;
  CharVocab vocab;
  try {
    cfg = config_from_json(header.at("config"));
    for (char32_t c : utf8_decode(header.at("chars").get<std::string>(), what))
      vocab.add(c);
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad JSON header: ") + e.what());
  }

  Model model = make_model(cfg, std::move(vocab));
  auto params = model.persistent();
  const auto& names = header.at("params");
  if (names.size() != params.size())
    r.fail("header lists " + std::to_string(names.size()) +
           " parameters, model has " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (names[i].get<std::string>() != params[i].name)
      r.fail("parameter order mismatch: expected " + params[i].name +
             ", found " + names[i].get<std::string>());
    const std::uint32_t rank = r.u32();
    if (rank != params[i].value->rank())
      r.fail("parameter " + params[i].name + ": rank mismatch");
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t extent = r.u32();
      if (extent != params[i].value->dim(d))
        r.fail("parameter " + params[i].name + ": shape mismatch");
    }
    r.f64(params[i].value->data(), params[i].value->size());
  }
  if (!r.done()) r.fail("trailing bytes after parameter blob");
  return model;
}

Model load_model(const std::string& path) {
  return deserialize_model(read_file(path), path.c_str());
}

}  // namespace rdcc
