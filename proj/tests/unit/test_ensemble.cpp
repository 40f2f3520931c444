// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "qselect/ensemble.hpp"

using namespace qselect;

namespace {

ScoreVector vec(Method m, std::vector<double> v) { return ScoreVector(std::move(m), std::move(v)); }

void expect_values(const ScoreVector& v, const std::vector<double>& expected) {
  ASSERT_EQ(v.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(v[i], expected[i], 1e-12) << i;
}

}  // namespace

TEST(MinMax, WorkedExamples) {
  expect_values(minmax_normalize(vec(Method::aps(), {0.2, 0.6, 1.0})), {0.0, 0.5, 1.0});
  expect_values(minmax_normalize(vec(Method::aps(), {3, 3, 3})), {0.5, 0.5, 0.5});
  expect_values(minmax_normalize(vec(Method::aps(), {1, 2})), {0.0, 1.0});
}

TEST(MinMax, ExcludedEntriesIgnored) {
  const auto n = minmax_normalize(vec(Method::aps(), {9.0, 1.0, 3.0}), {true, false, false});
  expect_values(n, {0.0, 0.0, 1.0});
  EXPECT_THROW(minmax_normalize(vec(Method::aps(), {1.0}), {true, false}), InvalidArgument);
}

TEST(Combine, WorkedExamples) {
  const auto a = Method::ngram(2);
  const auto b = Method::roundtrip();
  const EnsembleSpec uniform{{a, b}, {}};
  expect_values(combine({vec(a, {0, 1, 0.5}), vec(b, {1, 0, 0.5})}, uniform), {0.5, 0.5, 0.5});
  const EnsembleSpec weighted{{a, b}, {0.75, 0.25}};
  expect_values(combine({vec(a, {0, 1}), vec(b, {1, 0})}, weighted), {0.25, 0.75});
  expect_values(combine({vec(a, {2, 4, 3}), vec(b, {2, 4, 3})}, uniform), {0.0, 1.0, 0.5});
}

TEST(Combine, WeightsNormalizedInternally) {
  const auto a = Method::ngram(2);
  const auto b = Method::roundtrip();
  const auto x = combine({vec(a, {0, 1}), vec(b, {1, 0})}, EnsembleSpec{{a, b}, {3.0, 1.0}});
  expect_values(x, {0.25, 0.75});
}

TEST(Combine, RejectsMismatches) {
  const auto a = Method::ngram(2);
  const auto b = Method::roundtrip();
  const EnsembleSpec spec{{a, b}, {}};
  EXPECT_THROW(combine({vec(a, {0, 1}), vec(b, {1, 0, 2})}, spec), InvalidArgument);
  EXPECT_THROW(combine({vec(a, {0, 1})}, spec), InvalidArgument);
  EXPECT_THROW(combine({vec(b, {0, 1}), vec(a, {1, 0})}, spec), InvalidArgument);
  EXPECT_THROW(combine({vec(a, {0, 1}), vec(a, {1, 0})}, EnsembleSpec{{a, a}, {}}), InvalidArgument);
}

TEST(Select, WorkedExamples) {
  const auto r1 = select(vec(Method::aps(), {0.1, 0.9, 0.3}));
  EXPECT_EQ(r1.selected_index, 1u);
  EXPECT_FALSE(r1.tie_broken);
  const auto r2 = select(vec(Method::aps(), {0.5, 0.5}));
  EXPECT_EQ(r2.selected_index, 0u);
  EXPECT_TRUE(r2.tie_broken);
  EXPECT_EQ(select(vec(Method::aps(), {1.0})).selected_index, 0u);
}

TEST(Select, ExcludedNeverChosen) {
  const auto r = select(vec(Method::aps(), {5.0, 1.0, 1.0}), {true, false, false});
  EXPECT_EQ(r.selected_index, 1u);
  EXPECT_TRUE(r.tie_broken);
  EXPECT_THROW(select(vec(Method::aps(), {1.0}), {true}), InvalidArgument);
}

TEST(SelectEnsemble, CarriesRawAndNormalized) {
  const auto a = Method::ngram(2);
  const auto b = Method::aps();
  const EnsembleSpec spec{{a, b}, {}};
  const auto r = select_ensemble({vec(a, {0.2, 0.4}), vec(b, {3.0, 1.0})}, spec);
  EXPECT_EQ(r.method, spec.method());
  ASSERT_TRUE(r.normalized_scores.has_value());
  expect_values(*r.normalized_scores, {0.5, 0.5});
  expect_values(r.raw_scores, {1.6, 0.7});
  EXPECT_EQ(r.selected_index, 0u);
  EXPECT_TRUE(r.tie_broken);
}

TEST(EnsembleProperties, RandomizedChecks) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_int_distribution<int> small(0, 3);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = len(rng);
    std::vector<double> v(static_cast<std::size_t>(n));
    // Small integers produce ties often enough to exercise the tie rule.
    const bool tied = trial % 3 == 0;
    for (auto& x : v) x = tied ? small(rng) : val(rng);
    const ScoreVector sv(Method::aps(), v);
    const ScoreVector norm = minmax_normalize(sv);
    for (double x : norm.values()) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
    const double a = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const double b = val(rng);
    std::vector<double> w;
    for (double x : v) w.push_back(a * x + b);
    const auto base = select(norm);
    EXPECT_EQ(select(minmax_normalize(ScoreVector(Method::aps(), w))).selected_index, base.selected_index);
    const auto single = select_ensemble({sv}, EnsembleSpec{{Method::aps()}, {}});
    EXPECT_EQ(single.selected_index, select(sv).selected_index);
    const auto best = *std::max_element(v.begin(), v.end());
    const auto first = static_cast<std::size_t>(std::find(v.begin(), v.end(), best) - v.begin());
    EXPECT_EQ(select(sv).selected_index, first);
  }
}
