#include "rdcc/run_config.hpp"

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>

#include "rdcc/errors.hpp"
#include "rdcc/files.hpp"

namespace rdcc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view value, const std::string& where) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw DataError(where + ": cannot parse \"" + std::string(value) + "\"");
  return out;
}

bool parse_bool(std::string_view value, const std::string& where) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw DataError(where + ": expected on/off, got \"" + std::string(value) +
                  "\"");
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, std::string_view key,
                        std::string_view value, const std::string& where) {
  using Setter = std::function<void(TrainConfig&, std::string_view)>;
  static const std::map<std::string_view, Setter> setters = {
      {"d_x", [](TrainConfig& c, std::string_view v) { c.d_x = parse_number<int>(v, "d_x"); }},
      {"d_d", [](TrainConfig& c, std::string_view v) { c.d_d = parse_number<int>(v, "d_d"); }},
      {"n_r", [](TrainConfig& c, std::string_view v) { c.n_r = parse_number<int>(v, "n_r"); }},
      {"f_d", [](TrainConfig& c, std::string_view v) { c.f_d = parse_number<int>(v, "f_d"); }},
      {"w_d", [](TrainConfig& c, std::string_view v) { c.w_d = parse_number<int>(v, "w_d"); }},
      {"d_b", [](TrainConfig& c, std::string_view v) { c.d_b = parse_number<int>(v, "d_b"); }},
      {"f_s", [](TrainConfig& c, std::string_view v) { c.f_s = parse_number<int>(v, "f_s"); }},
      {"w_s", [](TrainConfig& c, std::string_view v) { c.w_s = parse_number<int>(v, "w_s"); }},
      {"batch", [](TrainConfig& c, std::string_view v) { c.batch = parse_number<int>(v, "batch"); }},
      {"lr", [](TrainConfig& c, std::string_view v) { c.lr = parse_number<double>(v, "lr"); }},
      {"beta1", [](TrainConfig& c, std::string_view v) { c.beta1 = parse_number<double>(v, "beta1"); }},
      {"beta2", [](TrainConfig& c, std::string_view v) { c.beta2 = parse_number<double>(v, "beta2"); }},
      {"adam_epsilon", [](TrainConfig& c, std::string_view v) { c.adam_epsilon = parse_number<double>(v, "adam_epsilon"); }},
      {"epochs", [](TrainConfig& c, std::string_view v) { c.epochs = parse_number<int>(v, "epochs"); }},
      {"seed", [](TrainConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>(v, "seed"); }},
      {"branches",
       [](TrainConfig& c, std::string_view v) {
         const auto b = branches_from_name(v);
         if (!b) throw DataError("branches: expected left/right/both, got \"" + std::string(v) + "\"");
         c.branches = *b;
       }},
      {"residual", [](TrainConfig& c, std::string_view v) { c.residual = parse_bool(v, "residual"); }},
      {"char_dropout", [](TrainConfig& c, std::string_view v) { c.char_dropout = parse_number<double>(v, "char_dropout"); }},
      {"bn_momentum", [](TrainConfig& c, std::string_view v) { c.bn_momentum = parse_number<double>(v, "bn_momentum"); }},
      {"bn_eps", [](TrainConfig& c, std::string_view v) { c.bn_eps = parse_number<double>(v, "bn_eps"); }},
      {"leaky_alpha", [](TrainConfig& c, std::string_view v) { c.leaky_alpha = parse_number<double>(v, "leaky_alpha"); }},
      {"max_clause_len", [](TrainConfig& c, std::string_view v) { c.max_clause_len = parse_number<int>(v, "max_clause_len"); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end())
    throw DataError(where + ": unknown config key \"" + std::string(key) + "\"");
  try {
    it->second(cfg, value);
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
}

TrainConfig parse_run_config(std::string_view content, const char* what) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t nl = content.find('\n', pos);
    std::string_view line = content.substr(
        pos, nl == std::string_view::npos ? content.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where =
        std::string(what) + " line " + std::to_string(line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw DataError(where + ": expected \"key = value\"");
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                       where);
  }
  return cfg;
}

TrainConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path), path.c_str());
}

std::string run_config_keys_help() {
  return "d_x d_d n_r f_d w_d d_b f_s w_s batch lr beta1 beta2 adam_epsilon "
         "epochs seed branches residual char_dropout bn_momentum bn_eps "
         "leaky_alpha max_clause_len";
}

}  // namespace rdcc
