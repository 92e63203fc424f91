#include "rdcc/config.hpp"

#include <stdexcept>

namespace rdcc {

std::string_view branches_name(Branches b) {
  switch (b) {
    case Branches::Left: return "left";
    case Branches::Right: return "right";
    case Branches::Both: return "both";
  }
  return "both";
}

std::optional<Branches> branches_from_name(std::string_view name) {
  if (name == "left") return Branches::Left;
  if (name == "right") return Branches::Right;
  if (name == "both") return Branches::Both;
  return std::nullopt;
}

void validate_config(const TrainConfig& cfg) {
  auto positive = [](long v, const char* name) {
    if (v < 1)
      throw std::invalid_argument(std::string("config: ") + name +
                                  " must be >= 1");
  };
  positive(cfg.d_x, "d_x");
  positive(cfg.d_d, "d_d");
  positive(cfg.n_r, "n_r");
  positive(cfg.f_d, "f_d");
  positive(cfg.w_d, "w_d");
  positive(cfg.d_b, "d_b");
  positive(cfg.f_s, "f_s");
  positive(cfg.w_s, "w_s");
  positive(cfg.batch, "batch");
  positive(cfg.epochs, "epochs");
  positive(cfg.max_clause_len, "max_clause_len");
  if (cfg.lr < 0.0) throw std::invalid_argument("config: lr must be >= 0");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw std::invalid_argument("config: betas must be in [0, 1)");
  if (cfg.adam_epsilon <= 0.0)
    throw std::invalid_argument("config: adam_epsilon must be > 0");
  if (cfg.char_dropout < 0.0 || cfg.char_dropout >= 1.0)
    throw std::invalid_argument("config: char_dropout must be in [0, 1)");
  if (cfg.bn_momentum <= 0.0 || cfg.bn_momentum >= 1.0)
    throw std::invalid_argument("config: bn_momentum must be in (0, 1)");
  if (cfg.bn_eps <= 0.0)
    throw std::invalid_argument("config: bn_eps must be > 0");
  if (!(cfg.leaky_alpha > 0.0 && cfg.leaky_alpha < 1.0))
    throw std::invalid_argument("config: leaky_alpha must be in (0, 1)");
  if (cfg.branches != Branches::Right && cfg.residual &&
      cfg.f_d != cfg.d_x + cfg.d_d)
    throw std::invalid_argument(
        "config: the residual skip needs f_d == d_x + d_d (got f_d = " +
        std::to_string(cfg.f_d) + ", d_x + d_d = " +
        std::to_string(cfg.d_x + cfg.d_d) + ")");
  if (cfg.branches == Branches::Both && cfg.f_d != cfg.f_s)
    throw std::invalid_argument("config: summing both branches needs f_d == f_s");
}

}  // namespace rdcc
