// Command-line driver for the full pipeline: synthetic data generation,
// ingestion, collaborative-backbone training, base-LM pretraining, staged
// tuning, and evaluation. Stages communicate through a run directory:
//
//   <run>/data/ratings.dat, titles.dat, data-meta.txt
//   <run>/vocab.txt
//   <run>/lm.ckpt, pretrain-log.txt
//   <run>/collab.ckpt, collab-meta.txt, collab-log.txt
//   <run>/tune-<stage>.ckpt, tune-<stage>-log.txt
//   <run>/eval-<model>-<split>.txt
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include "collabrec/bridge.hpp"
#include "collabrec/checkpoint.hpp"
#include "collabrec/scorer.hpp"
#include "collabrec/synth.hpp"
#include "collabrec/train.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace collabrec;

namespace {

using Real = float;  // pipeline precision; tests exercise double

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- tiny key-value metadata files -----------------------------------------

using KeyValues = std::map<std::string, std::string>;

void write_keyvalues(const fs::path& path, const KeyValues& kv) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

KeyValues read_keyvalues(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path.string());
  KeyValues kv;
  std::string line;
  while (std::getline(f, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string& require(const KeyValues& kv, const std::string& key,
                           const fs::path& origin) {
  auto it = kv.find(key);
  if (it == kv.end())
    throw DataError("missing key '" + key + "' in " + origin.string());
  return it->second;
}

// ---- run-directory layout ---------------------------------------------------

struct RunPaths {
  fs::path run;
  fs::path data_dir() const { return run / "data"; }
  fs::path ratings() const { return data_dir() / "ratings.dat"; }
  fs::path titles() const { return data_dir() / "titles.dat"; }
  fs::path data_meta() const { return data_dir() / "data-meta.txt"; }
  fs::path vocab() const { return run / "vocab.txt"; }
  fs::path lm_ckpt() const { return run / "lm.ckpt"; }
  fs::path collab_ckpt() const { return run / "collab.ckpt"; }
  fs::path collab_meta() const { return run / "collab-meta.txt"; }
  fs::path tune_ckpt(const std::string& stage) const {
    return run / ("tune-" + stage + ".ckpt");
  }
  fs::path stage_log(const std::string& stage) const {
    return run / ("tune-" + stage + "-log.txt");
  }
  fs::path eval_out(const std::string& model, const std::string& split) const {
    return run / ("eval-" + model + "-" + split + ".txt");
  }
};

struct LoadedData {
  data::Catalog catalog;
  data::SplitDataset split;
  data::SplitSamples samples;
  data::WarmColdTags tags;
  uint64_t fingerprint = 0;
};

LoadedData load_run_data(const RunPaths& p) {
  if (!fs::exists(p.data_meta()))
    throw DataError("missing stage: ingest (no " + p.data_meta().string() + ")");
  auto meta = read_keyvalues(p.data_meta());
  double threshold = std::stod(require(meta, "threshold", p.data_meta()));
  std::string sep = require(meta, "sep", p.data_meta());
  Timestamp t1 = std::stoll(require(meta, "t1", p.data_meta()));
  Timestamp t2 = std::stoll(require(meta, "t2", p.data_meta()));

  LoadedData d;
  auto [catalog, interactions] =
      data::load_ratings(p.ratings().string(), p.titles().string(), threshold,
                         sep);
  d.catalog = std::move(catalog);
  d.fingerprint = data::fingerprint(interactions);
  uint64_t recorded =
      std::stoull(require(meta, "fingerprint", p.data_meta()));
  if (recorded != d.fingerprint)
    throw DataError("data fingerprint mismatch: expected " +
                    std::to_string(recorded) + ", got " +
                    std::to_string(d.fingerprint));
  d.split = data::temporal_split(std::move(interactions), t1, t2);
  d.samples = data::build_samples(d.split, d.catalog);
  d.tags = data::warm_cold_partition(d.split, d.catalog.n_users(),
                                     d.catalog.n_items());
  return d;
}

// ---- model (de)serialization -----------------------------------------------

fs::path lm_meta_path(const RunPaths& p) { return p.run / "lm-meta.txt"; }

void save_lm_meta(const RunPaths& p, const lm::LmConfig& cfg) {
  write_keyvalues(lm_meta_path(p),
                  {{"d1", std::to_string(cfg.d1)},
                   {"n_layers", std::to_string(cfg.n_layers)},
                   {"n_heads", std::to_string(cfg.n_heads)},
                   {"max_len", std::to_string(cfg.max_len)},
                   {"vocab_size", std::to_string(cfg.vocab_size)}});
}

lm::LmConfig load_lm_meta(const RunPaths& p) {
  auto path = lm_meta_path(p);
  if (!fs::exists(path))
    throw DataError("missing stage: pretrain-lm (no " + path.string() + ")");
  auto kv = read_keyvalues(path);
  lm::LmConfig cfg;
  cfg.d1 = std::stoi(require(kv, "d1", path));
  cfg.n_layers = std::stoi(require(kv, "n_layers", path));
  cfg.n_heads = std::stoi(require(kv, "n_heads", path));
  cfg.max_len = std::stoi(require(kv, "max_len", path));
  cfg.vocab_size = std::stoi(require(kv, "vocab_size", path));
  return cfg;
}

void save_params(const fs::path& path,
                 const std::vector<ad::Param<Real>*>& params,
                 KeyValues extra = {}) {
  io::TensorMap m;
  for (const auto* p : params) m[p->name] = io::to_tensor(p->value);
  for (const auto& [k, v] : extra) {
    io::Tensor t;
    t.dims = {1, 1};
    t.data = {std::stof(v)};
    m["meta." + k] = std::move(t);
  }
  io::save_checkpoint(path.string(), m);
}

void load_params(const fs::path& path, std::vector<ad::Param<Real>*> params,
                 const std::string& stage_hint) {
  if (!fs::exists(path))
    throw DataError("missing stage: " + stage_hint + " (no " + path.string() +
                    ")");
  io::restore_params<Real>(io::load_checkpoint(path.string()), std::move(params));
}

struct CollabArtifacts {
  collab::GraphModel<Real> model;
  int d2 = 0;
  int n_layers = 0;
};

CollabArtifacts load_collab(const RunPaths& p, const LoadedData& d) {
  if (!fs::exists(p.collab_ckpt()))
    throw DataError("missing stage: train-collab (no " +
                    p.collab_ckpt().string() + ")");
  auto meta = read_keyvalues(p.collab_meta());
  CollabArtifacts a;
  a.d2 = std::stoi(require(meta, "d2", p.collab_meta()));
  a.n_layers = std::stoi(require(meta, "n_layers", p.collab_meta()));
  a.model.base.user_emb.value =
      MatT<Real>::Zero(d.catalog.n_users(), a.d2);
  a.model.base.item_emb.value =
      MatT<Real>::Zero(d.catalog.n_items(), a.d2);
  load_params(p.collab_ckpt(),
              {&a.model.base.user_emb, &a.model.base.item_emb}, "train-collab");
  a.model.graph = collab::BipartiteGraph<Real>::from_train(
      d.split.train, d.catalog.n_users(), d.catalog.n_items());
  a.model.n_layers = a.n_layers;
  return a;
}

lm::TransformerLM<Real> load_lm(const RunPaths& p, const lm::Tokenizer& tok) {
  auto cfg = load_lm_meta(p);
  if (cfg.vocab_size != tok.vocab_size())
    throw DataError("lm-meta vocab size disagrees with vocab.txt");
  Rng rng(0);  // shapes only; weights are overwritten by the checkpoint
  auto model = lm::TransformerLM<Real>::init(cfg, rng);
  load_params(p.lm_ckpt(), model.params(), "pretrain-lm");
  model.set_trainable(false);
  return model;
}

lm::Tokenizer load_vocab(const RunPaths& p) {
  if (!fs::exists(p.vocab()))
    throw DataError("missing stage: pretrain-lm (no " + p.vocab().string() +
                    ")");
  return lm::Tokenizer::load(p.vocab().string());
}

void write_tune_log(const fs::path& path, const train::TuneResult& r) {
  std::ofstream f(path);
  f << "epoch\ttrain_loss\tvalid_auc\tvalid_uauc\n";
  for (const auto& e : r.log)
    f << e.epoch << "\t" << e.train_loss << "\t" << e.valid_auc << "\t"
      << e.valid_uauc << "\n";
  f << "# best_epoch=" << r.best_epoch << " best_valid_auc=" << r.best_valid_auc
    << "\n";
}

train::TuneData make_tune_data(const LoadedData& d, const lm::Tokenizer& tok) {
  train::TuneData td;
  td.tokenizer = &tok;
  td.catalog = &d.catalog;
  td.train = d.samples.train;
  td.valid = d.samples.valid;
  return td;
}

// ---- subcommand implementations ----------------------------------------------

struct SynthOptions {
  data::SynthConfig cfg;
  std::string mode = "collaborative";
  std::string out;
  double threshold = 4.0;
};

int cmd_synth(const SynthOptions& o) {
  auto cfg = o.cfg;
  cfg.signal_mode = data::signal_mode_from_string(o.mode);
  auto result = data::synth_generate(cfg);
  fs::create_directories(o.out);
  std::vector<data::Interaction> all = result.split.train;
  all.insert(all.end(), result.split.valid.begin(), result.split.valid.end());
  all.insert(all.end(), result.split.test.begin(), result.split.test.end());
  data::export_ratings((fs::path(o.out) / "ratings.dat").string(), all,
                       o.threshold);
  data::export_titles((fs::path(o.out) / "titles.dat").string(),
                      result.catalog);
  KeyValues kv{{"mode", o.mode},
               {"n_users", std::to_string(cfg.n_users)},
               {"n_items", std::to_string(cfg.n_items)},
               {"latent_rank", std::to_string(cfg.latent_rank)},
               {"noise_temperature", std::to_string(cfg.noise_temperature)},
               {"seed", std::to_string(cfg.seed)},
               {"n_events", std::to_string(cfg.n_events)},
               {"cold_item_fraction", std::to_string(cfg.cold_item_fraction)},
               {"user_factor_mean", std::to_string(cfg.user_factor_mean)},
               {"text_bonus", std::to_string(cfg.text_bonus)},
               {"t1", std::to_string(result.split.t1)},
               {"t2", std::to_string(result.split.t2)},
               {"fingerprint", std::to_string(data::fingerprint(all))}};
  write_keyvalues(fs::path(o.out) / "synth-meta.txt", kv);
  std::cout << "synth: wrote " << all.size() << " events ("
            << result.split.train.size() << "/" << result.split.valid.size()
            << "/" << result.split.test.size() << " train/valid/test) to "
            << o.out << "\n";
  return 0;
}

struct IngestOptions {
  std::string run;
  std::string ratings, titles;
  std::string sep = "::";
  double threshold = 4.0;
  double f1 = 0.8, f2 = 0.9;
  std::optional<int64_t> t1, t2;
};

int cmd_ingest(const IngestOptions& o) {
  RunPaths p{o.run};
  auto [catalog, interactions] = data::load_ratings(
      o.ratings, o.titles.empty() ? std::nullopt
                                  : std::optional<std::string>(o.titles),
      o.threshold, o.sep);
  Timestamp t1, t2;
  if (o.t1 && o.t2) {
    t1 = *o.t1;
    t2 = *o.t2;
  } else {
    std::tie(t1, t2) = data::percentile_boundaries(interactions, o.f1, o.f2);
  }
  std::string warning;
  auto split = data::temporal_split(interactions, t1, t2, &warning);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

  fs::create_directories(p.data_dir());
  data::export_ratings(p.ratings().string(), interactions, o.threshold, o.sep);
  data::export_titles(p.titles().string(), catalog, o.sep);
  KeyValues kv{{"threshold", std::to_string(o.threshold)},
               {"sep", o.sep},
               {"t1", std::to_string(t1)},
               {"t2", std::to_string(t2)},
               {"fingerprint", std::to_string(data::fingerprint(interactions))},
               {"n_users", std::to_string(catalog.n_users())},
               {"n_items", std::to_string(catalog.n_items())},
               {"n_train", std::to_string(split.train.size())},
               {"n_valid", std::to_string(split.valid.size())},
               {"n_test", std::to_string(split.test.size())}};
  write_keyvalues(p.data_meta(), kv);
  std::cout << "ingest: " << interactions.size() << " events, "
            << catalog.n_users() << " users, " << catalog.n_items()
            << " items -> " << p.data_dir().string() << "\n";
  return 0;
}

struct TrainCollabOptions {
  std::string run;
  collab::CollabTrainConfig cfg;
  uint64_t root_seed = 1;
};

int cmd_train_collab(const TrainCollabOptions& o) {
  RunPaths p{o.run};
  auto d = load_run_data(p);
  auto cfg = o.cfg;
  cfg.seed = stage_seed(o.root_seed, "train-collab");
  auto result = collab::train_backbone<Real>(d.split, d.catalog.n_users(),
                                             d.catalog.n_items(), cfg);
  save_params(p.collab_ckpt(), {&result.model.base.user_emb,
                                &result.model.base.item_emb});
  write_keyvalues(p.collab_meta(),
                  {{"d2", std::to_string(cfg.d2)},
                   {"n_layers", std::to_string(cfg.n_layers)},
                   {"best_epoch", std::to_string(result.best_epoch)},
                   {"best_valid_auc", std::to_string(result.best_valid_auc)}});
  std::ofstream log(p.run / "collab-log.txt");
  log << "epoch\ttrain_loss\tvalid_auc\n";
  for (const auto& e : result.log)
    log << e.epoch << "\t" << e.train_loss << "\t" << e.valid_auc << "\n";
  std::cout << "train-collab: best valid auc " << result.best_valid_auc
            << " at epoch " << result.best_epoch << "\n";
  return 0;
}

struct PretrainOptions {
  std::string run;
  lm::PretrainConfig cfg;
  lm::LmConfig lm;  // d1 64, 2 layers, 4 heads, max_len 160 by default
  uint64_t root_seed = 1;
};

int cmd_pretrain(const PretrainOptions& o) {
  RunPaths p{o.run};
  auto d = load_run_data(p);

  // Corpus: text-only prompts of the train split with the ground-truth
  // answer token appended; the tokenizer additionally sees the full-variant
  // template so the placeholder clauses are in vocabulary.
  std::vector<std::string> corpus_text;
  for (const auto& s : d.samples.train)
    corpus_text.push_back(
        bridge::build_prompt(s, d.catalog, bridge::PromptVariant::TextOnly));
  std::vector<std::string> tok_corpus = corpus_text;
  if (!d.samples.train.empty())
    tok_corpus.push_back(bridge::build_prompt(d.samples.train.front(),
                                              d.catalog,
                                              bridge::PromptVariant::Full));
  auto tok = lm::Tokenizer::build(tok_corpus);
  tok.save(p.vocab().string());

  auto encode_with_answer = [&](const data::Sample& s,
                                const std::string& text) {
    auto ids = tok.encode(text);
    ids.push_back(s.label ? lm::Tokenizer::kYes : lm::Tokenizer::kNo);
    return ids;
  };
  std::vector<std::vector<int>> train_corpus, valid_corpus;
  for (size_t i = 0; i < d.samples.train.size(); ++i)
    train_corpus.push_back(
        encode_with_answer(d.samples.train[i], corpus_text[i]));
  for (const auto& s : d.samples.valid)
    valid_corpus.push_back(encode_with_answer(
        s, bridge::build_prompt(s, d.catalog, bridge::PromptVariant::TextOnly)));

  Rng rng(stage_seed(o.root_seed, "lm-init"));
  auto lm_cfg = o.lm;
  lm_cfg.vocab_size = tok.vocab_size();
  auto model = lm::TransformerLM<Real>::init(lm_cfg, rng);
  auto cfg = o.cfg;
  cfg.seed = stage_seed(o.root_seed, "pretrain-lm");
  auto logs = lm::pretrain_base(model, train_corpus, valid_corpus, cfg);
  save_params(p.lm_ckpt(), model.params());
  save_lm_meta(p, lm_cfg);

  std::ofstream log(p.run / "pretrain-log.txt");
  log << "epoch\ttrain_loss\tvalid_perplexity\n";
  for (const auto& e : logs)
    log << e.epoch << "\t" << e.train_loss << "\t" << e.valid_perplexity
        << "\n";
  std::cout << "pretrain-lm: vocab " << tok.vocab_size() << ", final ppl "
            << (logs.empty() ? 0.0 : logs.back().valid_perplexity) << "\n";
  return 0;
}

struct TuneOptions {
  std::string run;
  std::string stage;
  train::TrainRunConfig cfg;
  uint64_t root_seed = 1;
  int d2 = 16;  // for step2-scratch's fresh backbone
};

int cmd_tune(const TuneOptions& o) {
  RunPaths p{o.run};
  auto d = load_run_data(p);
  auto tok = load_vocab(p);
  auto model = load_lm(p, tok);
  auto stage = train::tune_stage_from_string(o.stage);
  auto td = make_tune_data(d, tok);
  auto cfg = o.cfg;
  cfg.seed = stage_seed(o.root_seed, "tune-" + o.stage);

  Rng lora_rng(stage_seed(o.root_seed, "lora-init"));
  auto lora = lm::LoraAdapter<Real>::init(model.cfg, {}, lora_rng);
  Rng map_rng(stage_seed(o.root_seed, "mapping-init"));

  train::TuneResult result;
  switch (stage) {
    case train::TuneStage::Step1_Lora: {
      result = train::run_step1(model, lora, td, cfg);
      save_params(p.tune_ckpt(o.stage), lora.params());
      break;
    }
    case train::TuneStage::Step2_MappingOnly: {
      load_params(p.tune_ckpt("step1"), lora.params(), "tune --stage step1");
      auto collab_art = load_collab(p, d);
      auto mapping =
          bridge::MappingMlp<Real>::init(collab_art.d2, model.cfg.d1, map_rng);
      result = train::run_step2(model, lora, collab_art.model, mapping, td,
                                train::Step2Mode::MappingOnly, cfg);
      save_params(p.tune_ckpt(o.stage), mapping.params());
      break;
    }
    case train::TuneStage::Step2_FromScratch: {
      load_params(p.tune_ckpt("step1"), lora.params(), "tune --stage step1");
      collab::GraphModel<Real> backbone;
      Rng brng(stage_seed(o.root_seed, "backbone-scratch-init"));
      backbone.base = collab::FactorModel<Real>::init(
          d.catalog.n_users(), d.catalog.n_items(), o.d2, brng);
      backbone.graph = collab::BipartiteGraph<Real>::from_train(
          d.split.train, d.catalog.n_users(), d.catalog.n_items());
      auto mapping = bridge::MappingMlp<Real>::init(o.d2, model.cfg.d1, map_rng);
      result = train::run_step2(model, lora, backbone, mapping, td,
                                train::Step2Mode::FromScratch, cfg);
      auto params = mapping.params();
      params.push_back(&backbone.base.user_emb);
      params.push_back(&backbone.base.item_emb);
      save_params(p.tune_ckpt(o.stage), params,
                  {{"d2", std::to_string(o.d2)}});
      break;
    }
    case train::TuneStage::Joint_Ablation: {
      auto collab_art = load_collab(p, d);
      auto mapping =
          bridge::MappingMlp<Real>::init(collab_art.d2, model.cfg.d1, map_rng);
      result = train::run_joint(model, lora, collab_art.model, mapping, td, cfg);
      auto params = lora.params();
      for (auto* q : mapping.params()) params.push_back(q);
      params.push_back(&collab_art.model.base.user_emb);
      params.push_back(&collab_art.model.base.item_emb);
      save_params(p.tune_ckpt(o.stage), params);
      break;
    }
    case train::TuneStage::Personalized: {
      Rng trng(stage_seed(o.root_seed, "idtable-init"));
      auto idtable = bridge::IdTokenTable<Real>::init(
          d.catalog.n_users(), d.catalog.n_items(), model.cfg.d1, trng);
      result = train::run_personalized(model, lora, idtable, td, cfg);
      auto params = lora.params();
      for (auto* q : idtable.params()) params.push_back(q);
      save_params(p.tune_ckpt(o.stage), params);
      break;
    }
  }
  write_tune_log(p.stage_log(o.stage), result);
  std::cout << "tune " << o.stage << ": best valid auc " << result.best_valid_auc
            << " at epoch " << result.best_epoch << "\n";
  return 0;
}

struct EvalOptions {
  std::string run;
  std::string split = "test";
  std::string model = "step2-map";  // a tune stage, or "mf"
  std::string strata;               // "" or "warmcold"
  uint64_t root_seed = 1;
};

int cmd_eval(const EvalOptions& o) {
  RunPaths p{o.run};
  auto d = load_run_data(p);
  const auto& samples = o.split == "valid"  ? d.samples.valid
                        : o.split == "test" ? d.samples.test
                        : throw DataError("unknown split: " + o.split);

  eval::ScoredSet scored;
  if (o.model == "mf") {
    auto collab_art = load_collab(p, d);
    collab_art.model.refresh();
    for (const auto& s : samples)
      scored.push(s.user, s.target_item,
                  static_cast<double>(
                      collab_art.model.predict(s.user, s.target_item)),
                  s.label);
  } else {
    auto tok = load_vocab(p);
    auto model = load_lm(p, tok);
    Rng lora_rng(stage_seed(o.root_seed, "lora-init"));
    auto lora = lm::LoraAdapter<Real>::init(model.cfg, {}, lora_rng);
    Rng map_rng(stage_seed(o.root_seed, "mapping-init"));

    eval::ModelBundle<Real> bundle;
    bundle.model = &model;
    bundle.tags = &d.tags;

    auto stage = train::tune_stage_from_string(o.model);
    CollabArtifacts collab_art;
    collab::GraphModel<Real> scratch_backbone;
    bridge::MappingMlp<Real> mapping;
    bridge::IdTokenTable<Real> idtable;
    switch (stage) {
      case train::TuneStage::Step1_Lora:
        load_params(p.tune_ckpt("step1"), lora.params(), "tune --stage step1");
        bundle.lora = &lora;
        bundle.variant = bridge::PromptVariant::TextOnly;
        break;
      case train::TuneStage::Step2_MappingOnly: {
        load_params(p.tune_ckpt("step1"), lora.params(), "tune --stage step1");
        collab_art = load_collab(p, d);
        mapping = bridge::MappingMlp<Real>::init(collab_art.d2, model.cfg.d1,
                                                 map_rng);
        load_params(p.tune_ckpt(o.model), mapping.params(),
                    "tune --stage " + o.model);
        bundle.lora = &lora;
        bundle.backbone = &collab_art.model;
        bundle.mapping = &mapping;
        bundle.variant = bridge::PromptVariant::Full;
        break;
      }
      case train::TuneStage::Step2_FromScratch: {
        load_params(p.tune_ckpt("step1"), lora.params(), "tune --stage step1");
        auto m = io::load_checkpoint(p.tune_ckpt(o.model).string());
        int d2 = static_cast<int>(m.at("meta.d2").data.at(0));
        scratch_backbone.base.user_emb.name = "user_emb";
        scratch_backbone.base.item_emb.name = "item_emb";
        scratch_backbone.base.user_emb.value =
            io::to_matrix<Real>(m.at("user_emb"));
        scratch_backbone.base.item_emb.value =
            io::to_matrix<Real>(m.at("item_emb"));
        scratch_backbone.graph = collab::BipartiteGraph<Real>::from_train(
            d.split.train, d.catalog.n_users(), d.catalog.n_items());
        mapping = bridge::MappingMlp<Real>::init(d2, model.cfg.d1, map_rng);
        io::restore_params<Real>(m, mapping.params());
        bundle.lora = &lora;
        bundle.backbone = &scratch_backbone;
        bundle.mapping = &mapping;
        bundle.variant = bridge::PromptVariant::Full;
        break;
      }
      case train::TuneStage::Joint_Ablation: {
        collab_art = load_collab(p, d);
        mapping = bridge::MappingMlp<Real>::init(collab_art.d2, model.cfg.d1,
                                                 map_rng);
        auto params = lora.params();
        for (auto* q : mapping.params()) params.push_back(q);
        params.push_back(&collab_art.model.base.user_emb);
        params.push_back(&collab_art.model.base.item_emb);
        load_params(p.tune_ckpt(o.model), params, "tune --stage " + o.model);
        collab_art.model.invalidate();
        bundle.lora = &lora;
        bundle.backbone = &collab_art.model;
        bundle.mapping = &mapping;
        bundle.variant = bridge::PromptVariant::Full;
        break;
      }
      case train::TuneStage::Personalized: {
        Rng trng(stage_seed(o.root_seed, "idtable-init"));
        idtable = bridge::IdTokenTable<Real>::init(
            d.catalog.n_users(), d.catalog.n_items(), model.cfg.d1, trng);
        auto params = lora.params();
        for (auto* q : idtable.params()) params.push_back(q);
        load_params(p.tune_ckpt(o.model), params, "tune --stage " + o.model);
        bundle.lora = &lora;
        bundle.idtable = &idtable;
        bundle.variant = bridge::PromptVariant::Full;
        break;
      }
    }
    scored = eval::score_model(bundle, tok, d.catalog,
                               std::span<const data::Sample>(samples));
  }

  eval::EvalReport report;
  if (o.strata == "warmcold") {
    report = eval::warm_cold_report(scored, d.tags);
  } else {
    report.overall = eval::stratum_report(scored);
  }
  report.model_id = o.model;
  report.split = o.split;
  report.seed = o.root_seed;

  std::ofstream out(p.eval_out(o.model, o.split));
  out << eval::to_keyvalue(report);
  std::cout << eval::to_table(report);
  return 0;
}

int cmd_report(const std::string& run) {
  RunPaths p{run};
  bool any = false;
  for (const auto& entry : fs::directory_iterator(p.run)) {
    auto name = entry.path().filename().string();
    if (name.rfind("eval-", 0) != 0 || entry.path().extension() != ".txt")
      continue;
    any = true;
    std::cout << "== " << name << " ==\n";
    std::ifstream f(entry.path());
    std::cout << f.rdbuf() << "\n";
  }
  if (!any) {
    std::cerr << "report: no eval outputs in " << p.run.string() << "\n";
    return kExitData;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-representation injection pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read defaults from an INI file");

  // synth
  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", so.out, "Output directory")->required();
  synth->add_option("--users", so.cfg.n_users);
  synth->add_option("--items", so.cfg.n_items);
  synth->add_option("--rank", so.cfg.latent_rank);
  synth->add_option("--mode", so.mode)
      ->check(CLI::IsMember({"collaborative", "textual", "mixed"}));
  synth->add_option("--temperature", so.cfg.noise_temperature);
  synth->add_option("--seed", so.cfg.seed);
  synth->add_option("--events", so.cfg.n_events);
  synth->add_option("--cold-fraction", so.cfg.cold_item_fraction);
  synth->add_option("--user-mean", so.cfg.user_factor_mean,
                    "Mean of the user factors (popularity skew)");
  synth->add_option("--text-bonus", so.cfg.text_bonus,
                    "Keyword logit bonus in mixed mode");

  // ingest
  IngestOptions io_;
  auto* ingest = app.add_subcommand("ingest", "Load and split a ratings file");
  ingest->add_option("--run", io_.run, "Run directory")->required();
  ingest->add_option("--ratings", io_.ratings)->required();
  ingest->add_option("--titles", io_.titles);
  ingest->add_option("--sep", io_.sep);
  ingest->add_option("--threshold", io_.threshold);
  ingest->add_option("--frac-train", io_.f1);
  ingest->add_option("--frac-valid", io_.f2);
  int64_t t1_opt = -1, t2_opt = -1;
  ingest->add_option("--t1", t1_opt, "Explicit train/valid boundary");
  ingest->add_option("--t2", t2_opt, "Explicit valid/test boundary");

  // train-collab
  TrainCollabOptions tco;
  auto* tc = app.add_subcommand("train-collab",
                                "Train the collaborative backbone");
  tc->add_option("--run", tco.run)->required();
  tc->add_option("--layers", tco.cfg.n_layers);
  tc->add_option("--d2", tco.cfg.d2);
  tc->add_option("--lr", tco.cfg.learning_rate);
  tc->add_option("--wd", tco.cfg.weight_decay);
  tc->add_option("--epochs", tco.cfg.epochs);
  tc->add_option("--batch", tco.cfg.batch_size);
  tc->add_option("--seed", tco.root_seed);

  // pretrain-lm
  PretrainOptions po;
  auto* pt = app.add_subcommand("pretrain-lm", "Pretrain the base model");
  pt->add_option("--run", po.run)->required();
  pt->add_option("--lr", po.cfg.learning_rate);
  pt->add_option("--epochs", po.cfg.epochs);
  pt->add_option("--batch", po.cfg.batch_size);
  pt->add_option("--seed", po.root_seed);
  pt->add_option("--d1", po.lm.d1, "Model width");
  pt->add_option("--layers", po.lm.n_layers);
  pt->add_option("--heads", po.lm.n_heads);
  pt->add_option("--max-len", po.lm.max_len);

  // tune
  TuneOptions to;
  auto* tu = app.add_subcommand("tune", "Run a tuning stage");
  tu->add_option("--run", to.run)->required();
  tu->add_option("--stage", to.stage)
      ->required()
      ->check(CLI::IsMember({"step1", "step2-map", "step2-scratch", "joint",
                             "personalized"}));
  tu->add_option("--lr", to.cfg.learning_rate);
  tu->add_option("--wd", to.cfg.weight_decay);
  tu->add_option("--epochs", to.cfg.epochs);
  tu->add_option("--batch", to.cfg.batch_size);
  tu->add_option("--patience", to.cfg.patience);
  tu->add_option("--seed", to.root_seed);
  tu->add_option("--d2", to.d2, "Embedding width for step2-scratch");

  // eval
  EvalOptions eo;
  auto* ev = app.add_subcommand("eval", "Score a tuned model");
  ev->add_option("--run", eo.run)->required();
  ev->add_option("--split", eo.split)
      ->check(CLI::IsMember({"valid", "test"}));
  ev->add_option("--model", eo.model)
      ->check(CLI::IsMember({"mf", "step1", "step2-map", "step2-scratch",
                             "joint", "personalized"}));
  ev->add_option("--strata", eo.strata)->check(CLI::IsMember({"warmcold"}));
  ev->add_option("--seed", eo.root_seed);

  // report
  std::string report_run;
  auto* rp = app.add_subcommand("report", "Print collected eval reports");
  rp->add_option("--run", report_run)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(so);
    if (ingest->parsed()) {
      if (t1_opt >= 0) io_.t1 = t1_opt;
      if (t2_opt >= 0) io_.t2 = t2_opt;
      return cmd_ingest(io_);
    }
    if (tc->parsed()) return cmd_train_collab(tco);
    if (pt->parsed()) return cmd_pretrain(po);
    if (tu->parsed()) return cmd_tune(to);
    if (ev->parsed()) return cmd_eval(eo);
    if (rp->parsed()) return cmd_report(report_run);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const data::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const io::CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
