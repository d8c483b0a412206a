#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "ngvi/data.hpp"
#include "ngvi/errors.hpp"

using namespace ngvi;

namespace {

const std::filesystem::path kSource = NGVI_SOURCE_DIR;
const std::filesystem::path kFixtures = kSource / "tests" / "fixtures";

Dataset from_rows(const std::vector<std::vector<double>>& xs, const std::vector<double>& ys) {
  Dataset ds{"rows", static_cast<Index>(xs.front().size()), {}};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ds.examples.push_back({Eigen::Map<const Vector>(xs[i].data(), xs[i].size()), ys[i]});
  }
  return ds;
}

bool same(const Dataset& a, const Dataset& b) {
  if (a.feature_dim != b.feature_dim || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.examples[i].target != b.examples[i].target) return false;
    if (a.examples[i].features != b.examples[i].features) return false;
  }
  return true;
}

}  // namespace

TEST(Libsvm, ParsesSingleLine) {
  std::istringstream in("+1 1:0.5 3:2.0\n");
  const Dataset ds = parse_libsvm(in, "one", TargetKind::real);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.feature_dim, 3);
  EXPECT_EQ(ds.examples[0].target, 1.0);
  EXPECT_EQ(ds.examples[0].features, (Vector(3) << 0.5, 0.0, 2.0).finished());
}

TEST(Libsvm, FixtureSkipsCommentsAndRemapsLabels) {
  const Dataset ds = load_libsvm(kFixtures / "tiny.libsvm");
  EXPECT_EQ(ds.name, "tiny");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.feature_dim, 3);
  EXPECT_EQ(ds.examples[0].target, 1.0);
  EXPECT_EQ(ds.examples[1].target, 0.0);
  EXPECT_EQ(ds.examples[1].features, (Vector(3) << 0.0, 1.5, 0.0).finished());
  EXPECT_EQ(ds.examples[2].features, (Vector(3) << -1.0, 0.25, 1e-3).finished());
}

TEST(Libsvm, BenchmarkShapes) {
  const Dataset au = load_libsvm(kSource / "data" / "australian.libsvm");
  EXPECT_EQ(au.size(), 690u);
  EXPECT_EQ(au.feature_dim, 14);
  const Dataset bc = load_libsvm(kSource / "data" / "breast_cancer.libsvm");
  EXPECT_EQ(bc.size(), 569u);
  EXPECT_EQ(bc.feature_dim, 10);
  for (const Dataset* ds : {&au, &bc}) {
    std::set<double> labels;
    for (const Example& ex : ds->examples) labels.insert(ex.target);
    EXPECT_EQ(labels, (std::set<double>{0.0, 1.0}));
  }
}

TEST(Libsvm, ErrorsCarryLineNumbers) {
  try {
    load_libsvm(kFixtures / "bad_feature.libsvm");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream bad_label("1 1:1\nabc 1:1\n");
  try {
    parse_libsvm(bad_label, "x");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad_index("1 0:1\n");
  EXPECT_THROW(parse_libsvm(bad_index, "x"), ParseError);
  std::istringstream three_labels("0 1:1\n1 1:2\n2 1:3\n");
  EXPECT_THROW(parse_libsvm(three_labels, "x"), DataError);
  EXPECT_THROW(load_libsvm(kFixtures / "missing.libsvm"), DataError);
}

TEST(Libsvm, WriteThenLoadIsIdentity) {
  const Dataset ds = from_rows({{0.1, 0.0, -3.0}, {1.0 / 3.0, 2.0, 0.0}, {0.0, 0.0, 0.0}}, {1.0, 0.0, 1.0});
  std::stringstream buf;
  write_libsvm(ds, buf);
  const Dataset back = parse_libsvm(buf, "rows");
  EXPECT_TRUE(same(ds, back));
  std::stringstream again;
  write_libsvm(back, again);
  std::stringstream first;
  write_libsvm(ds, first);
  EXPECT_EQ(first.str(), again.str());
}

TEST(Csv, FixtureWithLabelColumnInMiddle) {
  const Dataset ds = load_csv(kFixtures / "tiny.csv", "label");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.feature_dim, 2);
  EXPECT_EQ(ds.examples[1].features, (Vector(2) << -0.5, 3.5).finished());
  EXPECT_EQ(ds.examples[0].target, 1.0);
  EXPECT_EQ(ds.examples[1].target, 0.0);
  EXPECT_EQ(ds.examples[2].target, 1.0);
}

TEST(Csv, Errors) {
  try {
    load_csv(kFixtures / "ragged.csv", "label");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    load_csv(kFixtures / "bad_cell.csv", "label");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 2u);
  }
  EXPECT_THROW(load_csv(kFixtures / "tiny.csv", "target"), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(parse_csv(empty, "x", "label"), ParseError);
}

TEST(Csv, WriteThenLoadIsIdentity) {
  const Dataset ds = from_rows({{0.1, -2.5}, {1e-300, 7.0}}, {0.0, 1.0});
  std::stringstream buf;
  write_csv(ds, buf);
  EXPECT_TRUE(same(ds, parse_csv(buf, "rows", "label")));
}

TEST(Standardize, TrainMomentsAndConstantFeature) {
  const Dataset train = from_rows({{1.0, 5.0, 2.0}, {3.0, 5.0, 4.0}, {5.0, 5.0, 9.0}}, {0, 1, 0});
  const Dataset test = from_rows({{7.0, 6.0, 0.0}}, {1});
  const Standardization s = standardize(train, {test});
  EXPECT_EQ(s.stds(1), 1.0);
  Vector mean = Vector::Zero(3), sq = Vector::Zero(3);
  for (const Example& ex : s.datasets[0].examples) mean += ex.features;
  mean /= 3.0;
  for (const Example& ex : s.datasets[0].examples) sq += (ex.features - mean).cwiseAbs2();
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(std::sqrt(sq(0) / 3.0), 1.0, 1e-14);
  EXPECT_NEAR(std::sqrt(sq(2) / 3.0), 1.0, 1e-14);
  for (const Example& ex : s.datasets[0].examples) EXPECT_EQ(ex.features(1), 0.0);
  // Test data uses train statistics only.
  EXPECT_NEAR(s.datasets[1].examples[0].features(0), (7.0 - 3.0) / std::sqrt(8.0 / 3.0), 1e-14);
  EXPECT_EQ(s.datasets[1].examples[0].features(1), 1.0);
}

TEST(Standardize, IsIdempotent) {
  const Dataset train = from_rows({{1.0, -2.0}, {4.0, 0.5}, {-3.0, 7.0}, {0.0, 0.0}}, {0, 1, 0, 1});
  const Standardization once = standardize(train, {});
  const Standardization twice = standardize(once.datasets[0], {});
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_LT((once.datasets[0].examples[i].features - twice.datasets[0].examples[i].features).norm(), 1e-14);
  }
}

TEST(Standardize, TestDataDoesNotLeak) {
  const Dataset train = from_rows({{1.0}, {2.0}, {4.0}}, {0, 1, 0});
  const Dataset test_a = from_rows({{0.0}}, {1});
  const Dataset test_b = from_rows({{100.0}}, {1});
  const Standardization a = standardize(train, {test_a});
  const Standardization b = standardize(train, {test_b});
  EXPECT_EQ(a.means, b.means);
  EXPECT_EQ(a.stds, b.stds);
  EXPECT_THROW(standardize(Dataset{}, {}), ContractError);
}

TEST(Split, DeterministicPartition) {
  const Dataset ds = load_libsvm(kSource / "data" / "australian.libsvm");
  const Split a = split(ds, {0.1, 7});
  const Split b = split(ds, {0.1, 7});
  const Split c = split(ds, {0.1, 8});
  EXPECT_EQ(a.test.size(), 69u);
  EXPECT_EQ(a.train.size(), 621u);
  EXPECT_TRUE(same(a.train, b.train));
  EXPECT_TRUE(same(a.test, b.test));
  EXPECT_FALSE(same(a.test, c.test));
  // Every example lands on exactly one side.
  auto key = [](const Example& ex) {
    std::vector<double> k(ex.features.data(), ex.features.data() + ex.features.size());
    k.push_back(ex.target);
    return k;
  };
  std::multiset<std::vector<double>> all, parts;
  for (const Example& ex : ds.examples) all.insert(key(ex));
  for (const Example& ex : a.train.examples) parts.insert(key(ex));
  for (const Example& ex : a.test.examples) parts.insert(key(ex));
  EXPECT_EQ(all, parts);
  EXPECT_THROW(split(ds, {0.0, 0}), ContractError);
  EXPECT_THROW(split(from_rows({{1.0}, {2.0}}, {0, 1}), {0.1, 0}), ContractError);
}

TEST(Synthetic, LogisticDeterministicAndConsistent) {
  const SyntheticLogistic a = synth_logistic(4000, 3, 11);
  const SyntheticLogistic b = synth_logistic(4000, 3, 11);
  EXPECT_TRUE(same(a.data, b.data));
  EXPECT_EQ(a.true_z, b.true_z);
  std::size_t agree = 0, confident = 0, ones = 0;
  for (const Example& ex : a.data.examples) {
    ones += ex.target == 1.0;
    const double s = a.true_z.dot(ex.features);
    if (std::abs(s) > 4.0) {
      ++confident;
      agree += (s > 0.0) == (ex.target == 1.0);
    }
  }
  ASSERT_GT(confident, 50u);
  EXPECT_GT(double(agree) / double(confident), 0.95);
  EXPECT_NEAR(double(ones) / 4000.0, 0.5, 0.05);
  EXPECT_THROW(synth_logistic(0, 3, 0), ContractError);
}

TEST(Synthetic, LinearResidualVariance) {
  const SyntheticLinear s = synth_linear_gaussian(20000, 2, 0.25, 3);
  double sum = 0.0, sq = 0.0;
  for (const Example& ex : s.data.examples) {
    const double r = ex.target - s.true_z.dot(ex.features);
    sum += r;
    sq += r * r;
  }
  EXPECT_NEAR(sum / 20000.0, 0.0, 0.02);
  EXPECT_NEAR(sq / 20000.0, 0.25, 0.02);
  EXPECT_TRUE(same(s.data, synth_linear_gaussian(20000, 2, 0.25, 3).data));
  EXPECT_THROW(synth_linear_gaussian(10, 2, 0.0, 3), ContractError);
}
