#include "rdcc/model.hpp"

namespace rdcc {

namespace {

void add_block_params(std::vector<ParamRef>& out, ResidualBlock& blk,
                      const std::string& prefix, bool with_running) {
  out.push_back({prefix + ".conv1.w", &blk.conv1.w, &blk.conv1.gw});
  out.push_back({prefix + ".conv1.b", &blk.conv1.b, &blk.conv1.gb});
  out.push_back({prefix + ".bn1.gamma", &blk.bn1.gamma, &blk.bn1.ggamma});
  out.push_back({prefix + ".bn1.beta", &blk.bn1.beta, &blk.bn1.gbeta});
  out.push_back({prefix + ".conv2.w", &blk.conv2.w, &blk.conv2.gw});
  out.push_back({prefix + ".conv2.b", &blk.conv2.b, &blk.conv2.gb});
  out.push_back({prefix + ".bn2.gamma", &blk.bn2.gamma, &blk.bn2.ggamma});
  out.push_back({prefix + ".bn2.beta", &blk.bn2.beta, &blk.bn2.gbeta});
  if (with_running) {
    out.push_back({prefix + ".bn1.run_mean", &blk.bn1.run_mean, nullptr});
    out.push_back({prefix + ".bn1.run_var", &blk.bn1.run_var, nullptr});
    out.push_back({prefix + ".bn2.run_mean", &blk.bn2.run_mean, nullptr});
    out.push_back({prefix + ".bn2.run_var", &blk.bn2.run_var, nullptr});
  }
}

std::vector<ParamRef> collect(Model& m, bool with_running) {
  std::vector<ParamRef> out;
  out.push_back({"emb.char", &m.emb.char_table, &m.emb.gchar});
  out.push_back({"emb.feat", &m.emb.feat_table, &m.emb.gfeat});
  for (std::size_t i = 0; i < m.enc.blocks.size(); ++i)
    add_block_params(out, m.enc.blocks[i], "enc.block" + std::to_string(i),
                     with_running);
  if (m.enc.cfg.branches != Branches::Left) {
    out.push_back({"enc.right.w", &m.enc.right_conv.w, &m.enc.right_conv.gw});
    out.push_back({"enc.right.b", &m.enc.right_conv.b, &m.enc.right_conv.gb});
    out.push_back({"enc.right.bn.gamma", &m.enc.right_bn.gamma,
                   &m.enc.right_bn.ggamma});
    out.push_back({"enc.right.bn.beta", &m.enc.right_bn.beta,
                   &m.enc.right_bn.gbeta});
    if (with_running) {
      out.push_back({"enc.right.bn.run_mean", &m.enc.right_bn.run_mean,
                     nullptr});
      out.push_back({"enc.right.bn.run_var", &m.enc.right_bn.run_var,
                     nullptr});
    }
  }
  out.push_back({"enc.proj.w", &m.enc.proj_w, &m.enc.gproj_w});
  out.push_back({"enc.proj.b", &m.enc.proj_b, &m.enc.gproj_b});
  out.push_back({"crf.trans", &m.trans, &m.gtrans});
  return out;
}

}  // namespace

std::vector<ParamRef> Model::learnable() { return collect(*this, false); }

std::vector<ParamRef> Model::persistent() { return collect(*this, true); }

void Model::zero_grad() {
  for (auto& p : learnable()) p.grad->fill(0.0);
}

Model make_model(const TrainConfig& cfg, CharVocab vocab) {
  validate_config(cfg);
  Model m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  Rng rng(cfg.seed);
  m.emb = make_embeddings(static_cast<std::size_t>(m.vocab.size()),
                          static_cast<std::size_t>(cfg.d_x),
                          static_cast<std::size_t>(cfg.d_d), rng);
  m.enc = make_encoder(encoder_config(cfg), rng);
  const std::size_t k = static_cast<std::size_t>(m.enc.cfg.tag_count);
  m.trans = Tensor({k + 1, k});
  m.gtrans = Tensor({k + 1, k});
  return m;
}

}  // namespace rdcc
