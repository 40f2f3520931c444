// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/ensemble.hpp"

#include <algorithm>
#include <numeric>

namespace qselect {

namespace {

bool is_excluded(const std::vector<bool>& excluded, std::size_t i) { return i < excluded.size() && excluded[i]; }

void check_mask(const std::vector<bool>& excluded, std::size_t n) {
  if (!excluded.empty() && excluded.size() != n) throw InvalidArgument("exclusion mask length mismatch");
}

}  // namespace

EnsembleSpec EnsembleSpec::from_method(const Method& ensemble) {
  if (ensemble.kind != MethodKind::ensemble) {
    return EnsembleSpec{{ensemble}, {}};
  }
  return EnsembleSpec{ensemble.members, ensemble.weights};
}

Method EnsembleSpec::method() const { return Method::ensemble(members, weights); }

std::vector<double> EnsembleSpec::normalized_weights() const {
  if (members.empty()) throw InvalidArgument("ensemble needs at least one member");
  if (weights.empty()) return std::vector<double>(members.size(), 1.0 / static_cast<double>(members.size()));
  if (weights.size() != members.size()) throw InvalidArgument("ensemble weights must align with members");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> out;
  for (double w : weights) {
    if (!(w > 0.0)) throw InvalidArgument("ensemble weights must be positive");
    out.push_back(w / total);
  }
  return out;
}

ScoreVector minmax_normalize(const ScoreVector& v, const std::vector<bool>& excluded) {
  check_mask(excluded, v.size());
  bool any = false;
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (is_excluded(excluded, i)) continue;
    lo = any ? std::min(lo, v[i]) : v[i];
    hi = any ? std::max(hi, v[i]) : v[i];
    any = true;
  }
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (is_excluded(excluded, i)) continue;
    out[i] = hi == lo ? 0.5 : std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
  }
  return ScoreVector(v.method(), std::move(out));
}

ScoreVector combine(const std::vector<ScoreVector>& vectors, const EnsembleSpec& spec,
                    const std::vector<bool>& excluded) {
  if (vectors.size() != spec.members.size()) {
    throw InvalidArgument("ensemble expects " + std::to_string(spec.members.size()) + " member vectors, got " +
                          std::to_string(vectors.size()));
  }
  const Method method = spec.method();  // validates distinct members
  const std::vector<double> weights = spec.normalized_weights();
  const std::size_t n = vectors.front().size();
  for (std::size_t m = 0; m < vectors.size(); ++m) {
    if (vectors[m].size() != n) throw InvalidArgument("ensemble member vectors differ in length");
    if (!(vectors[m].method() == spec.members[m])) {
      throw InvalidArgument("vector " + std::to_string(m) + " carries " + vectors[m].method().name() +
                            ", expected " + spec.members[m].name());
    }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t m = 0; m < vectors.size(); ++m) {
    const ScoreVector norm = minmax_normalize(vectors[m], excluded);
    for (std::size_t i = 0; i < n; ++i) out[i] += weights[m] * norm[i];
  }
  for (double& x : out) x = std::clamp(x, 0.0, 1.0);
  return ScoreVector(method, std::move(out));
}

SelectionResult select(const ScoreVector& v, const std::vector<bool>& excluded) {
  check_mask(excluded, v.size());
  std::size_t best = v.size();
  std::size_t ties = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (is_excluded(excluded, i)) continue;
    if (best == v.size() || v[i] > v[best]) {
      best = i;
      ties = 1;
    } else if (v[i] == v[best]) {
      ++ties;
    }
  }
  if (best == v.size()) throw InvalidArgument("no eligible candidate to select");
  return SelectionResult{best, v.method(), v, std::nullopt, ties > 1};
}

SelectionResult select_ensemble(const std::vector<ScoreVector>& vectors, const EnsembleSpec& spec,
                                const std::vector<bool>& excluded) {
  const ScoreVector combined = combine(vectors, spec, excluded);
  const std::vector<double> weights = spec.normalized_weights();
  std::vector<double> raw(combined.size(), 0.0);
  for (std::size_t m = 0; m < vectors.size(); ++m) {
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] += weights[m] * vectors[m][i];
  }
  SelectionResult result = select(combined, excluded);
  result.raw_scores = ScoreVector(combined.method(), std::move(raw));
  result.normalized_scores = combined;
  return result;
}

}  // namespace qselect
