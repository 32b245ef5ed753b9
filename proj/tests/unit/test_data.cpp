#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "linprobit/data.hpp"
#include "linprobit/errors.hpp"

using namespace linprobit;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("linprobit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const std::string& content) const {
    const fs::path p = path_ / name;
    std::ofstream(p) << content;
    return p;
  }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("triplets with zero-one labels") {
  TempDir dir;
  const auto p = dir.write("a.csv", "user,item,response\nu1,i1,1\nu2,i1,0\n");
  const ResponseSet set = load_triplets(p, LabelConvention::zero_one);
  CHECK(set.num_users() == 2);
  CHECK(set.num_items() == 1);
  REQUIRE(set.size() == 2);
  CHECK(set.observations()[0] == Observation{0, 0, 1});
  CHECK(set.observations()[1] == Observation{1, 0, -1});
  CHECK(set.users().id(1) == "u2");
  CHECK(set.users().find("u1") == 0);
  CHECK(set.users().find("nobody") == -1);
  CHECK_THROWS_AS(load_triplets(p, LabelConvention::pm_one), DataError);
}

TEST_CASE("triplet errors carry context") {
  TempDir dir;
  const auto dup = dir.write("dup.csv", "user,item,response\nu1,i1,1\nu2,i1,-1\nu1,i1,-1\n");
  const std::string msg = error_of([&] { load_triplets(dup, LabelConvention::pm_one); });
  CHECK(msg.find("(u1, i1)") != std::string::npos);
  CHECK(msg.find(":4:") != std::string::npos);

  const auto bad = dir.write("bad.csv", "user,item,response\nu1,i1,1\nu2,i1\n");
  CHECK(error_of([&] { load_triplets(bad, LabelConvention::pm_one); }).find(":3:") != std::string::npos);

  const auto value = dir.write("value.csv", "user,item,response\nu1,i1,2\n");
  CHECK(error_of([&] { load_triplets(value, LabelConvention::pm_one); }).find("'2'") != std::string::npos);

  const auto header = dir.write("header.csv", "u,i,r\n");
  CHECK_THROWS_AS(load_triplets(header, LabelConvention::pm_one), DataError);
  CHECK_THROWS_AS(load_triplets(dir.path() / "missing.csv", LabelConvention::pm_one), DataError);
}

TEST_CASE("triplets round-trip and stable densification") {
  TempDir dir;
  const auto p = dir.write("a.csv", "user,item,response\nbob,x,1\nann,y,-1\nbob,y,1\ncat,x,-1\n");
  const ResponseSet first = load_triplets(p, LabelConvention::pm_one);
  CHECK(first == load_triplets(p, LabelConvention::pm_one));
  save_triplets(dir.path() / "out.csv", first);
  CHECK(load_triplets(dir.path() / "out.csv", LabelConvention::pm_one) == first);
  CHECK(first.users().ids() == std::vector<std::string>{"bob", "ann", "cat"});
}

TEST_CASE("response set validation") {
  CHECK_THROWS_AS(ResponseSet({{0, 2, 1}}, 1, 2), DataError);
  CHECK_THROWS_AS(ResponseSet({{0, 0, 0}}, 1, 1), DataError);
  CHECK_THROWS_AS(ResponseSet({{0, 0, 1}, {0, 0, -1}}, 1, 1), DataError);
  const ResponseSet full = ResponseSet::from_matrix({{1, -1, 1}, {-1, -1, 1}});
  CHECK(full.size() == 6);
  CHECK(full.num_users() == 2);
  CHECK(full.num_items() == 3);
  CHECK(full.observations()[3] == Observation{1, 0, -1});
  const ResponseSet sub = full.subset({5, 0});
  CHECK(sub.size() == 2);
  CHECK(sub.num_items() == 3);
  CHECK(sub.observations()[0] == Observation{1, 2, 1});
}

TEST_CASE("MovieLens ratings") {
  TempDir dir;
  const auto p = dir.write("u.data", "196\t242\t3\t881250949\n186\t302\t3\t891717742\n\n22  377 1 878887116\n");
  const auto rows = load_movielens(p);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].user == "196");
  CHECK(rows[2].rating == 1);
  CHECK(rows[1].timestamp == 891717742);

  const auto bad = dir.write("bad.data", "1\t2\t3\t4\n1\t3\t6\t5\n");
  CHECK(error_of([&] { load_movielens(bad); }).find(":2:") != std::string::npos);
  CHECK_THROWS_AS(load_movielens(dir.write("short.data", "1\t2\t3\n")), DataError);
  CHECK(load_movielens(dir.write("empty.data", "")).empty());
}

TEST_CASE("binarization against the global mean") {
  BinarizeReport report;
  const ResponseSet two = binarize_ratings({{"a", "x", 5, 0}, {"b", "x", 1, 0}}, &report);
  CHECK(report.mean_rating == 3.0);
  REQUIRE(two.size() == 2);
  CHECK(two.observations()[0].response == 1);
  CHECK(two.observations()[1].response == -1);

  const ResponseSet ties = binarize_ratings({{"a", "x", 4, 0}, {"b", "x", 4, 0}}, &report);
  CHECK(ties.empty());
  CHECK(report.dropped_ties == 2);

  const ResponseSet mixed =
      binarize_ratings({{"a", "x", 1, 0}, {"b", "y", 2, 0}, {"c", "x", 3, 0}, {"a", "y", 4, 0}, {"d", "z", 5, 0}},
                       &report);
  CHECK(report.dropped_ties == 1);
  CHECK(mixed.size() == 4);
  CHECK(mixed.num_users() == 3);
  bool pos = false, neg = false;
  for (const auto& o : mixed.observations()) (o.response > 0 ? pos : neg) = true;
  CHECK(pos);
  CHECK(neg);
}
