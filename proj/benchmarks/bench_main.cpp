#include "collabrec/checkpoint.hpp"
#include "collabrec/collab.hpp"
#include "collabrec/eval.hpp"
#include "collabrec/lm.hpp"

#include <benchmark/benchmark.h>

#include <cstdio>
#include <filesystem>
#include <random>

namespace cr = collabrec;

static void BM_LmForward(benchmark::State& state) {
  cr::lm::LmConfig cfg;
  cfg.vocab_size = 200;
  cr::Rng rng(7);
  auto model = cr::lm::TransformerLM<float>::init(cfg, rng);
  std::vector<int> ids(static_cast<size_t>(state.range(0)));
  std::uniform_int_distribution<int> tok(0, cfg.vocab_size - 1);
  for (auto& t : ids) t = tok(rng);
  for (auto _ : state) {
    auto E = cr::lm::embed_tokens(model, ids);
    auto logits = cr::lm::forward_logits(model, E);
    benchmark::DoNotOptimize(logits);
  }
}
BENCHMARK(BM_LmForward)->Arg(32)->Arg(96)->Arg(160);

static void BM_Auc(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0, 1);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (size_t i = 0; i < n; ++i) {
    scores[i] = uni(rng);
    labels[i] = uni(rng) < 0.5 ? 0 : 1;
  }
  for (auto _ : state) {
    auto a = cr::eval::auc(scores, labels);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

static void BM_FactorEpoch(benchmark::State& state) {
  std::mt19937_64 rng(13);
  const int n_users = 300, n_items = 300;
  cr::data::SplitDataset split;
  std::uniform_int_distribution<int> du(0, n_users - 1), di(0, n_items - 1);
  std::uniform_real_distribution<double> uni(0, 1);
  for (int k = 0; k < 10000; ++k)
    split.train.push_back({du(rng), di(rng), uni(rng) < 0.5 ? 0 : 1,
                           static_cast<cr::Timestamp>(k)});
  for (auto _ : state) {
    cr::collab::CollabTrainConfig cfg;
    cfg.epochs = 1;
    cfg.d2 = 16;
    cfg.n_layers = static_cast<int>(state.range(0));
    auto result = cr::collab::train_backbone<float>(split, n_users, n_items,
                                                    cfg);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_FactorEpoch)->Arg(0)->Arg(2);

static void BM_CheckpointRoundTrip(benchmark::State& state) {
  cr::Rng rng(17);
  cr::io::TensorMap m;
  m["a"] = cr::io::to_tensor(cr::gaussian_matrix<float>(rng, 512, 64, 1.f));
  m["b"] = cr::io::to_tensor(cr::gaussian_matrix<float>(rng, 64, 512, 1.f));
  auto path = std::filesystem::temp_directory_path() / "bench.ckpt";
  for (auto _ : state) {
    cr::io::save_checkpoint(path.string(), m);
    auto back = cr::io::load_checkpoint(path.string());
    benchmark::DoNotOptimize(back);
  }
  std::filesystem::remove(path);
}
BENCHMARK(BM_CheckpointRoundTrip);

BENCHMARK_MAIN();
