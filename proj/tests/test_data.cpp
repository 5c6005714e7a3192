#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "collabrec/data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace collabrec;

namespace {

struct TmpFile {
  std::filesystem::path path;
  explicit TmpFile(const std::string& name, const std::string& content) {
    path = std::filesystem::temp_directory_path() / name;
    std::ofstream f(path);
    f << content;
  }
  ~TmpFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("load_ratings assigns dense ids in first-appearance order") {
  TmpFile ratings("r1.dat",
                  "u9::i7::5::100\n"
                  "u2::i7::1::200\n"
                  "u9::i3::4::300\n");
  auto [catalog, inter] = data::load_ratings(ratings.path.string(),
                                             std::nullopt, 4.0);
  CHECK(catalog.n_users() == 2);
  CHECK(catalog.n_items() == 2);
  CHECK(catalog.user_id_map.at("u9") == 0);
  CHECK(catalog.user_id_map.at("u2") == 1);
  CHECK(catalog.item_id_map.at("i7") == 0);
  CHECK(catalog.item_id_map.at("i3") == 1);
  REQUIRE(inter.size() == 3);
  CHECK(inter[0].label == 1);  // 5 >= 4
  CHECK(inter[1].label == 0);  // 1 < 4
  CHECK(inter[2].label == 1);  // 4 >= 4
  // no titles file: fallback naming
  CHECK(catalog.item_titles[0] == "item i7");
}

TEST_CASE("load_ratings keeps the latest duplicate (user,item) pair") {
  TmpFile ratings("r2.dat",
                  "u1::i1::5::100\n"
                  "u1::i2::3::150\n"
                  "u1::i1::1::200\n");
  auto [catalog, inter] = data::load_ratings(ratings.path.string(),
                                             std::nullopt, 4.0);
  REQUIRE(inter.size() == 2);
  bool found = false;
  for (const auto& it : inter)
    if (it.item == catalog.item_id_map.at("i1")) {
      CHECK(it.label == 0);
      CHECK(it.timestamp == 200);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("load_ratings reports malformed lines with line numbers") {
  TmpFile ratings("r3.dat", "u1::i1::5::100\nbroken line\n");
  try {
    data::load_ratings(ratings.path.string(), std::nullopt, 4.0);
    FAIL("expected ParseError");
  } catch (const data::ParseError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("load_ratings rejects an empty file") {
  TmpFile ratings("r4.dat", "");
  CHECK_THROWS_AS(data::load_ratings(ratings.path.string(), std::nullopt, 4.0),
                  data::ParseError);
}

TEST_CASE("titles attach by raw id with fallback for missing items") {
  TmpFile ratings("r5.dat", "u1::i1::5::100\nu1::i2::5::200\n");
  TmpFile titles("t5.dat", "i1::The First Item::ignored\n");
  auto [catalog, inter] = data::load_ratings(
      ratings.path.string(), titles.path.string(), 4.0);
  CHECK(catalog.item_titles[catalog.item_id_map.at("i1")] == "The First Item");
  CHECK(catalog.item_titles[catalog.item_id_map.at("i2")] == "item i2");
}

TEST_CASE("temporal_split respects train < t1 <= valid < t2 <= test") {
  std::vector<data::Interaction> inter;
  for (int t = 0; t < 10; ++t)
    inter.push_back({0, 0, 5, 1, static_cast<Timestamp>(t * 10)});
  auto split = data::temporal_split(inter, 50, 80);
  CHECK(split.train.size() == 5);  // t = 0..40
  CHECK(split.valid.size() == 3);  // t = 50,60,70
  CHECK(split.test.size() == 2);   // t = 80,90
  for (const auto& it : split.train) CHECK(it.timestamp < 50);
  for (const auto& it : split.valid) {
    CHECK(it.timestamp >= 50);
    CHECK(it.timestamp < 80);
  }
  for (const auto& it : split.test) CHECK(it.timestamp >= 80);
}

TEST_CASE("temporal_split rejects inverted boundaries, warns on empty splits") {
  std::vector<data::Interaction> inter = {{0, 0, 5, 1, 100}};
  CHECK_THROWS(data::temporal_split(inter, 80, 50));
  std::string warning;
  auto split = data::temporal_split(inter, 200, 300, &warning);
  CHECK(split.train.size() == 1);
  CHECK(!warning.empty());
}

TEST_CASE("percentile_boundaries splits 80/10/10 on uniform timestamps") {
  std::vector<data::Interaction> inter;
  for (int t = 0; t < 100; ++t)
    inter.push_back({0, 0, 5, 1, static_cast<Timestamp>(t)});
  auto [t1, t2] = data::percentile_boundaries(inter, 0.8, 0.9);
  auto split = data::temporal_split(inter, t1, t2);
  CHECK(split.train.size() == 80);
  CHECK(split.valid.size() == 10);
  CHECK(split.test.size() == 10);
}

TEST_CASE("build_samples: liked-only histories, oldest first, capped") {
  data::SplitDataset split;
  // user 0 likes items 0..14 at t=0..14, dislikes item 15 at t=15
  for (int k = 0; k < 15; ++k)
    split.train.push_back({0, static_cast<ItemIdx>(k), 5, 1,
                           static_cast<Timestamp>(k)});
  split.train.push_back({0, 15, 1, 0, 15});
  // valid: one event at t=20
  split.valid.push_back({0, 16, 5, 1, 20});
  split.t1 = 16;
  split.t2 = 18;
  data::Catalog catalog;
  for (int i = 0; i < 17; ++i) {
    catalog.item_titles.push_back("x");
    catalog.item_id_map["i" + std::to_string(i)] = i;
  }
  catalog.user_id_map["u0"] = 0;

  auto samples = data::build_samples(split, catalog);
  REQUIRE(samples.train.size() == 16);
  REQUIRE(samples.valid.size() == 1);

  // the disliked-item sample at t=15 sees the 10 most recent likes, 5..14
  const auto& last_train = samples.train.back();
  CHECK(last_train.label == 0);
  REQUIRE(last_train.history.size() == data::kMaxHistory);
  CHECK(last_train.history.front() == 5);  // oldest first
  CHECK(last_train.history.back() == 14);

  // histories never contain the disliked item or anything at t >= sample time
  const auto& v = samples.valid[0];
  REQUIRE(v.history.size() == data::kMaxHistory);
  for (auto h : v.history) CHECK(h != 15);
  CHECK(v.history.back() == 14);

  // the first train sample has an empty history
  CHECK(samples.train.front().history.empty());
}

TEST_CASE("warm_cold_partition thresholds on train-split counts") {
  data::SplitDataset split;
  split.train.push_back({0, 0, 5, 1, 0});
  split.train.push_back({0, 0, 5, 1, 1});
  split.train.push_back({1, 1, 5, 1, 2});
  // user 2 / item 2 appear only outside train
  split.test.push_back({2, 2, 5, 1, 100});
  auto tags = data::warm_cold_partition(split, 3, 3, /*k=*/2);
  CHECK(tags.users[0] == data::WarmCold::Warm);   // 2 >= 2
  CHECK(tags.users[1] == data::WarmCold::Cold);   // 1 < 2
  CHECK(tags.users[2] == data::WarmCold::Cold);   // 0 < 2
  CHECK(tags.items[0] == data::WarmCold::Warm);
  CHECK(tags.items[1] == data::WarmCold::Cold);
  CHECK(tags.items[2] == data::WarmCold::Cold);
}

TEST_CASE("export/load round trip preserves interactions and fingerprint") {
  TmpFile ratings("r6.dat",
                  "u1::i1::5::100\n"
                  "u1::i2::2::200\n"
                  "u2::i1::4::300\n");
  TmpFile titles("t6.dat", "i1::Alpha\ni2::Beta\n");
  auto [catalog, inter] = data::load_ratings(
      ratings.path.string(), titles.path.string(), 4.0);
  uint64_t fp = data::fingerprint(inter);

  auto rpath = std::filesystem::temp_directory_path() / "r6_out.dat";
  auto tpath = std::filesystem::temp_directory_path() / "t6_out.dat";
  data::export_ratings(rpath.string(), inter, 4.0);
  data::export_titles(tpath.string(), catalog);
  auto [catalog2, inter2] = data::load_ratings(rpath.string(), tpath.string(),
                                               4.0);
  CHECK(data::fingerprint(inter2) == fp);
  CHECK(catalog2.n_users() == catalog.n_users());
  CHECK(catalog2.n_items() == catalog.n_items());
  std::filesystem::remove(rpath);
  std::filesystem::remove(tpath);
}

TEST_CASE("fingerprint is order- and content-sensitive") {
  std::vector<data::Interaction> a = {{0, 0, 5, 1, 10}, {1, 1, 1, 0, 20}};
  std::vector<data::Interaction> b = a;
  CHECK(data::fingerprint(a) == data::fingerprint(b));
  b[0].label = 0;
  CHECK(data::fingerprint(a) != data::fingerprint(b));
  std::vector<data::Interaction> c = {a[1], a[0]};
  CHECK(data::fingerprint(a) != data::fingerprint(c));
}

TEST_CASE("SplitDataset::split dispatches by name") {
  data::SplitDataset s;
  s.train.push_back({0, 0, 5, 1, 0});
  s.valid.push_back({0, 1, 5, 1, 1});
  CHECK(s.split("train").size() == 1);
  CHECK(s.split("valid").size() == 1);
  CHECK(s.split("test").empty());
  CHECK_THROWS(s.split("bogus"));
}
