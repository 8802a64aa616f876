// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "midg/errors.hpp"
#include "midg/harness/dataset.hpp"
#include "midg/harness/synthetic.hpp"
#include "support.hpp"

using namespace midg;
using namespace midg::harness;

namespace {

std::string serialize(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(ds, os);
  return os.str();
}

Dataset parse(const std::string& text) {
  std::istringstream is(text);
  return read_dataset(is);
}

std::vector<double> features(const Sample& s) {
  std::vector<double> x(s.t);
  x.insert(x.end(), s.a.begin(), s.a.end());
  x.insert(x.end(), s.v.begin(), s.v.end());
  return x;
}

// Multinomial logistic regression by full-batch gradient descent on standardized features.
double linear_probe_accuracy(const Dataset& ds, std::size_t classes) {
  const std::size_t n = ds.samples.size(), d = ds.dims.total();
  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = features(ds.samples[i]);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0, s = 0;
    for (auto& r : x) m += r[j];
    m /= n;
    for (auto& r : x) s += (r[j] - m) * (r[j] - m);
    s = std::sqrt(s / n) + 1e-12;
    for (auto& r : x) r[j] = (r[j] - m) / s;
  }
  std::vector<double> w(classes * (d + 1), 0.0);
  const double lr = 0.5;
  for (int it = 0; it < 300; ++it) {
    std::vector<double> grad(w.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> z(classes);
      for (std::size_t c = 0; c < classes; ++c) {
        double s = w[c * (d + 1) + d];
        for (std::size_t j = 0; j < d; ++j) s += w[c * (d + 1) + j] * x[i][j];
        z[c] = s;
      }
      const double mx = *std::max_element(z.begin(), z.end());
      double tot = 0;
      for (double& v : z) tot += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < classes; ++c) {
        const double err = z[c] / tot - (static_cast<std::size_t>(ds.samples[i].domain) == c ? 1.0 : 0.0);
        for (std::size_t j = 0; j < d; ++j) grad[c * (d + 1) + j] += err * x[i][j];
        grad[c * (d + 1) + d] += err;
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * grad[k] / n;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t c = 0; c < classes; ++c) {
      double s = w[c * (d + 1) + d];
      for (std::size_t j = 0; j < d; ++j) s += w[c * (d + 1) + j] * x[i][j];
      if (s > best_score) best_score = s, best = c;
    }
    correct += best == static_cast<std::size_t>(ds.samples[i].domain);
  }
  return static_cast<double>(correct) / n;
}

}  // namespace

TEST(Generate, LabelsWithinRange) {
  for (auto [lo, hi] : {std::pair{-3.0, 3.0}, std::pair{-1.0, 1.0}}) {
    SyntheticSpec spec;
    spec.n_samples = 2000;
    spec.label_lo = lo;
    spec.label_hi = hi;
    for (const auto& s : generate(spec).samples) {
      EXPECT_GE(s.label, lo);
      EXPECT_LE(s.label, hi);
    }
  }
}

TEST(Generate, SameSeedIsByteIdentical) {
  SyntheticSpec spec;
  spec.n_samples = 300;
  spec.seed = 7;
  EXPECT_EQ(serialize(generate(spec)), serialize(generate(spec)));
  auto other = spec;
  other.seed = 8;
  EXPECT_NE(serialize(generate(spec)), serialize(generate(other)));
}

TEST(Generate, ShapesIdsAndSplits) {
  SyntheticSpec spec;
  spec.n_samples = 500;
  spec.dims = {5, 2, 3};
  spec.test_domain = 1;
  const auto ds = generate(spec);
  ASSERT_EQ(ds.samples.size(), 500u);
  EXPECT_EQ(ds.samples[12].id, "s000012");
  for (const auto& s : ds.samples) {
    EXPECT_EQ(s.t.size(), 5u);
    EXPECT_EQ(s.a.size(), 2u);
    EXPECT_EQ(s.v.size(), 3u);
    EXPECT_EQ(s.split == Split::Test, s.domain == 1);
  }
  EXPECT_FALSE(ds.select(Split::Valid).empty());
}

TEST(Generate, ZeroShiftDomainMeansCoincide) {
  SyntheticSpec spec;
  spec.n_samples = 10000;
  spec.n_domains = 2;
  spec.domain_shift_scale = 0.0;
  spec.seed = 3;
  const auto ds = generate(spec);
  const std::size_t d = ds.dims.total();
  std::vector<double> sum[2], sq[2];
  std::size_t count[2] = {0, 0};
  for (int k = 0; k < 2; ++k) sum[k].assign(d, 0.0), sq[k].assign(d, 0.0);
  for (const auto& s : ds.samples) {
    const auto x = features(s);
    for (std::size_t j = 0; j < d; ++j) {
      sum[s.domain][j] += x[j];
      sq[s.domain][j] += x[j] * x[j];
    }
    ++count[s.domain];
  }
  std::size_t outside = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean[2], var[2];
    for (int k = 0; k < 2; ++k) {
      mean[k] = sum[k][j] / count[k];
      var[k] = sq[k][j] / count[k] - mean[k] * mean[k];
    }
    const double sigma = std::sqrt(var[0] / count[0] + var[1] / count[1]);
    outside += std::abs(mean[0] - mean[1]) > 2 * sigma;
  }
  // Under equal means roughly 5% of coordinates exceed 2 sigma by chance.
  EXPECT_LE(outside, 2u) << "of " << d;
}

TEST(Generate, ShiftedDomainsAreLinearlySeparable) {
  for (std::size_t domains : {2u, 3u}) {
    for (double scale : {1.0, 2.0}) {
      SyntheticSpec spec;
      spec.n_samples = 1500;
      spec.n_domains = domains;
      spec.domain_shift_scale = scale;
      spec.seed = 11 + domains;
      EXPECT_GT(linear_probe_accuracy(generate(spec), domains), 0.9) << domains << " domains, scale " << scale;
    }
  }
}

TEST(Generate, InvalidSpecsThrow) {
  SyntheticSpec spec;
  spec.dims.t = 0;
  EXPECT_THROW(generate(spec), ConfigError);
  spec = SyntheticSpec{};
  spec.n_domains = 0;
  EXPECT_THROW(generate(spec), ConfigError);
  spec = SyntheticSpec{};
  spec.label_lo = 1;
  spec.label_hi = 1;
  EXPECT_THROW(generate(spec), ConfigError);
  spec = SyntheticSpec{};
  spec.noise_std = -1;
  EXPECT_THROW(generate(spec), ConfigError);
  spec = SyntheticSpec{};
  spec.domain_shift_scale = -0.5;
  EXPECT_THROW(generate(spec), ConfigError);
}

TEST(Dataset, RoundTripOnRandomSpecs) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    SyntheticSpec spec;
    spec.n_samples = 1 + rng.below(60);
    spec.dims = {1 + rng.below(9), 1 + rng.below(9), 1 + rng.below(9)};
    spec.n_domains = 1 + rng.below(4);
    spec.domain_shift_scale = rng.uniform(0, 3);
    spec.noise_std = rng.uniform(0, 2);
    spec.seed = rng.next();
    const auto ds = generate(spec);
    EXPECT_EQ(parse(serialize(ds)), ds);
  }
}

TEST(Dataset, FileRoundTripLeavesNoTemporary) {
  SyntheticSpec spec;
  spec.n_samples = 20;
  const auto ds = generate(spec);
  const auto path = std::filesystem::temp_directory_path() / "midg_harness_rt.txt";
  write_dataset(ds, path);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_EQ(read_dataset(path), ds);
  std::filesystem::remove(path);
}

TEST(Dataset, TruncatedFileIsParseError) {
  SyntheticSpec spec;
  spec.n_samples = 5;
  const auto text = serialize(generate(spec));
  const auto cut = text.substr(0, text.size() / 2);
  try {
    parse(cut);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 1u);
  }
  EXPECT_THROW(parse(""), ParseError);
}

TEST(Dataset, CutInsideFinalTokenIsParseError) {
  SyntheticSpec spec;
  spec.n_samples = 3;
  const auto text = serialize(generate(spec));
  EXPECT_THROW(parse(text.substr(0, text.size() - 2)), ParseError);
  EXPECT_THROW(parse(text.substr(0, text.size() - 1)), ParseError);
  EXPECT_NO_THROW(parse(text));
}

TEST(Dataset, ShortVectorRowIsDataErrorNamingRow) {
  std::string row = "x1 train 0 0.5";
  for (int i = 0; i < 17; ++i) row += " 0.1";
  try {
    parse("MIDG1 8 4 6\n" + row + "\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("row 2"), std::string::npos) << what;
    EXPECT_NE(what.find("x1"), std::string::npos) << what;
  }
}

TEST(Dataset, MalformedFieldsAreParseErrorsWithLine) {
  const std::string good = "MIDG1 1 1 1\nok train 0 0.5 1 2 3\n";
  EXPECT_NO_THROW(parse(good));
  const std::pair<std::string, std::size_t> cases[] = {
      {"MIDG2 1 1 1\n", 1},
      {"MIDG1 1 x 1\n", 1},
      {"MIDG1 1 0 1\n", 1},
      {"MIDG1 1 1\n", 1},
      {good + "b test 0 0.5 1 abc 3\n", 3},
      {good + "b holdout 0 0.5 1 2 3\n", 3},
      {good + "b train 1.5 0.5 1 2 3\n", 3},
      {good + "b train 0 nan 1 2 3\n", 3},
      {good + "b train 0 0.5 1 inf 3\n", 3},
      {good + "b train\n", 3},
  };
  for (const auto& [text, line] : cases) {
    try {
      parse(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << text;
    }
  }
}

TEST(Dataset, ValidateCatchesInconsistentSamples) {
  SyntheticSpec spec;
  spec.n_samples = 3;
  auto ds = generate(spec);
  EXPECT_NO_THROW(validate(ds));
  ds.samples[1].a.push_back(0.0);
  EXPECT_THROW(validate(ds), DataError);
}
