// rdcc — character-level clinical entity tagger with dictionary features.
// Subcommands: train, predict, eval, dict-tag.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rdcc/corpus.hpp"
#include "rdcc/dictionary.hpp"
#include "rdcc/errors.hpp"
#include "rdcc/files.hpp"
#include "rdcc/model_io.hpp"
#include "rdcc/run_config.hpp"
#include "rdcc/trainer.hpp"
#include "rdcc/utf8.hpp"

namespace {

using namespace rdcc;

Lexicon load_lexicon_or_empty(const std::string& path) {
  if (path.empty()) return Lexicon{};
  return Lexicon::load_tsv(path);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

struct TrainCli {
  std::string config_path, train_path, dict_path, out_path, history_path;
  TrainConfig cfg;

  // CLI overrides recorded as (key, value) pairs applied on top of the
  // config file, reusing the config-key parser.
  std::vector<std::pair<std::string, std::string>> overrides;
};

int cmd_train(TrainCli& t) {
  TrainConfig cfg =
      t.config_path.empty() ? TrainConfig{} : load_run_config(t.config_path);
  for (const auto& [key, value] : t.overrides)
    apply_config_entry(cfg, key, value, "--" + key);
  validate_config(cfg);

  const auto corpus = load_corpus_jsonl(t.train_path);
  const Lexicon lexicon = load_lexicon_or_empty(t.dict_path);

  TrainResult result = train(corpus, lexicon, cfg);
  save_model(result.model, t.out_path);
  const std::string history_path =
      t.history_path.empty() ? t.out_path + ".history.csv" : t.history_path;
  write_file_atomic(history_path, history_to_csv(result.history));

  std::printf("trained %d epoch(s) on %zu record(s); final mean loss %.6f\n",
              cfg.epochs, corpus.size(), result.history.back().mean_loss);
  std::printf("model: %s\nhistory: %s\n", t.out_path.c_str(),
              history_path.c_str());
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& dict_path,
                const std::string& input_path, const std::string& output_path,
                bool jsonl, bool constrained) {
  Model model = load_model(model_path);
  const Lexicon lexicon = load_lexicon_or_empty(dict_path);

  std::vector<std::u32string> texts;
  if (jsonl) {
    for (const auto& rec : load_corpus_jsonl(input_path))
      texts.push_back(rec.text);
  } else {
    for (const auto& line : read_lines(input_path))
      texts.push_back(utf8_decode(line, input_path.c_str()));
  }

  std::string out;
  for (const auto& text : texts) {
    CorpusRecord rec;
    rec.text = text;
    rec.entities = predict(model, lexicon, text, constrained);
    out += corpus_record_to_json(rec);
    out += '\n';
  }
  write_file_atomic(output_path, out);
  std::printf("predicted %zu record(s) -> %s\n", texts.size(),
              output_path.c_str());
  return 0;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& csv_path) {
  const auto gold = load_corpus_jsonl(gold_path);
  const auto pred = load_corpus_jsonl(pred_path);
  if (gold.size() != pred.size())
    throw DataError("eval: " + std::to_string(gold.size()) +
                    " gold records vs " + std::to_string(pred.size()) +
                    " predicted records");
  std::vector<std::vector<EntitySpan>> g, p;
  for (const auto& r : gold) g.push_back(r.entities);
  for (const auto& r : pred) p.push_back(r.entities);
  const EvalReport rep = evaluate(g, p);

  auto row = [](const char* name, const PrCounts& c) {
    std::printf("%-10s %6ld %6ld %6ld   %8.4f %8.4f %8.4f\n", name, c.tp, c.fp,
                c.fn, c.precision(), c.recall(), c.f1());
  };
  std::printf("%-10s %6s %6s %6s   %8s %8s %8s\n", "type", "TP", "FP", "FN",
              "P", "R", "F1");
  for (int i = 0; i < kNumEntityTypes; ++i)
    row(std::string(entity_name(static_cast<EntityType>(i))).c_str(),
        rep.per_type[i]);
  row("micro", rep.micro);

  if (!csv_path.empty()) {
    std::ostringstream csv;
    csv << "type,tp,fp,fn,precision,recall,f1\n";
    csv.precision(6);
    csv << std::fixed;
    for (int i = 0; i < kNumEntityTypes; ++i) {
      const auto& c = rep.per_type[i];
      csv << entity_name(static_cast<EntityType>(i)) << ',' << c.tp << ','
          << c.fp << ',' << c.fn << ',' << c.precision() << ',' << c.recall()
          << ',' << c.f1() << '\n';
    }
    const auto& c = rep.micro;
    csv << "micro," << c.tp << ',' << c.fp << ',' << c.fn << ','
        << c.precision() << ',' << c.recall() << ',' << c.f1() << '\n';
    write_file_atomic(csv_path, csv.str());
  }
  return 0;
}

int cmd_dict_tag(const std::string& dict_path, const std::string& input_path,
                 const std::string& output_path) {
  const Lexicon lexicon = Lexicon::load_tsv(dict_path);
  std::string out;
  bool first_clause = true;
  for (const auto& line : read_lines(input_path)) {
    const auto text = utf8_decode(line, input_path.c_str());
    for (const auto& clause : split_clauses(text)) {
      if (!first_clause) out += '\n';
      first_clause = false;
      const auto features = dict_features(clause.chars, lexicon);
      for (std::size_t i = 0; i < clause.chars.size(); ++i) {
        out += utf8_encode(clause.chars[i]);
        out += '\t';
        out += dict_feature_to_string(features[i]);
        out += '\n';
      }
    }
  }
  if (output_path.empty())
    std::fwrite(out.data(), 1, out.size(), stdout);
  else
    write_file_atomic(output_path, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"character-level clinical named entity tagger"};
  app.require_subcommand(1);

  // train
  TrainCli t;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", t.config_path, "key = value config file");
  train_cmd->add_option("--train", t.train_path, "training corpus (JSON lines)")
      ->required();
  train_cmd->add_option("--dict", t.dict_path, "lexicon TSV (optional)");
  train_cmd->add_option("--out", t.out_path, "output model file")->required();
  train_cmd->add_option("--history", t.history_path,
                        "history CSV path (default <out>.history.csv)");
  // Every config key is also a flag; flags override the config file.
  for (const std::string key :
       {"seed", "epochs", "batch", "lr", "d_x", "d_d", "n_r", "f_d", "w_d",
        "d_b", "f_s", "w_s", "beta1", "beta2", "adam_epsilon", "branches",
        "char_dropout", "bn_momentum", "bn_eps", "leaky_alpha",
        "max_clause_len"}) {
    std::string flag = "--" + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    train_cmd
        ->add_option_function<std::string>(
            flag,
            [&t, key](const std::string& v) { t.overrides.emplace_back(key, v); },
            "override config key " + key)
        ->type_name("VALUE")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
  bool residual_flag = true;
  auto* residual_opt = train_cmd->add_flag(
      "--residual,!--no-residual", residual_flag, "toggle residual skips");

  // predict
  std::string model_path, dict_path, input_path, output_path;
  bool jsonl = false, constrained = false;
  auto* predict_cmd = app.add_subcommand("predict", "tag new text");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--dict", dict_path, "lexicon TSV (optional)");
  predict_cmd->add_option("--input", input_path, "input text, one document per line")
      ->required();
  predict_cmd->add_option("--output", output_path, "output JSON lines")
      ->required();
  predict_cmd->add_flag("--jsonl", jsonl,
                        "input is JSON lines; texts are taken from the "
                        "\"text\" field");
  predict_cmd->add_flag("--constrained", constrained,
                        "mask invalid tag transitions during decoding");

  // eval
  std::string gold_path, pred_path, csv_path;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold");
  eval_cmd->add_option("--gold", gold_path, "gold JSON lines")->required();
  eval_cmd->add_option("--pred", pred_path, "predicted JSON lines")->required();
  eval_cmd->add_option("--csv", csv_path, "also write the report as CSV");

  // dict-tag
  std::string dt_dict, dt_input, dt_output;
  auto* dict_cmd =
      app.add_subcommand("dict-tag", "emit per-character dictionary features");
  dict_cmd->add_option("--dict", dt_dict, "lexicon TSV")->required();
  dict_cmd->add_option("--input", dt_input, "input text, one document per line")
      ->required();
  dict_cmd->add_option("--output", dt_output, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) {
      if (residual_opt->count() > 0)
        t.overrides.emplace_back("residual", residual_flag ? "on" : "off");
      return cmd_train(t);
    }
    if (predict_cmd->parsed())
      return cmd_predict(model_path, dict_path, input_path, output_path, jsonl,
                         constrained);
    if (eval_cmd->parsed()) return cmd_eval(gold_path, pred_path, csv_path);
    if (dict_cmd->parsed()) return cmd_dict_tag(dt_dict, dt_input, dt_output);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
