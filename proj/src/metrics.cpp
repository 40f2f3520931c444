// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>

#include "qselect/errors.hpp"

namespace qselect {

namespace {

constexpr int kMaxOrder = 4;

using GramCounts = std::map<NGram, std::size_t>;

GramCounts count_ngrams(const TokenSequence& seq, std::size_t n) {
  GramCounts counts;
  if (seq.tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.tokens.size(); ++i) {
    ++counts[NGram(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

struct BleuStats {
  std::array<std::size_t, kMaxOrder> matches{};
  std::array<std::size_t, kMaxOrder> totals{};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
};

// Closest reference length; equidistant ties go to the shorter reference.
std::size_t closest_ref_length(std::size_t cand_len, std::span<const TokenSequence> refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) {
      return len > cand_len ? len - cand_len : cand_len - len;
    };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

BleuStats bleu_stats(const TokenSequence& candidate, std::span<const TokenSequence> references) {
  if (references.empty()) throw InvalidArgument("BLEU needs at least one reference");
  BleuStats s;
  s.cand_len = candidate.size();
  s.ref_len = closest_ref_length(s.cand_len, references);
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const GramCounts cand = count_ngrams(candidate, n);
    GramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : count_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    std::size_t clipped = 0;
    std::size_t total = 0;
    for (const auto& [gram, count] : cand) {
      total += count;
      if (auto it = max_ref.find(gram); it != max_ref.end()) clipped += std::min(count, it->second);
    }
    s.matches[n - 1] = clipped;
    s.totals[n - 1] = total;
  }
  return s;
}

double brevity_penalty(std::size_t cand_len, std::size_t ref_len) {
  if (cand_len == 0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

MetricValue finish_bleu(const BleuStats& s, BleuSmoothing smoothing) {
  MetricValue mv;
  mv.name = MetricName::bleu4;
  mv.components["c_len"] = static_cast<double>(s.cand_len);
  mv.components["r_len"] = static_cast<double>(s.ref_len);
  if (s.cand_len == 0) {
    mv.degenerate = true;
    mv.components["bp"] = 0.0;
    return mv;
  }
  const double bp = brevity_penalty(s.cand_len, s.ref_len);
  mv.components["bp"] = bp;
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t i = 0; i < kMaxOrder; ++i) {
    double p = 0.0;
    const auto m = static_cast<double>(s.matches[i]);
    const auto t = static_cast<double>(s.totals[i]);
    if (s.matches[i] > 0) {
      p = m / t;
    } else if (smoothing == BleuSmoothing::add_one && i >= 1) {
      p = 1.0 / (t + 1.0);
    }
    mv.components["p" + std::to_string(i + 1)] = p;
    if (p <= 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  mv.value = zero ? 0.0 : std::clamp(bp * std::exp(log_sum / kMaxOrder), 0.0, 1.0);
  return mv;
}

}  // namespace

std::string_view to_string(MetricName m) {
  switch (m) {
    case MetricName::bleu4:
      return "bleu4";
    case MetricName::rouge_l:
      return "rouge_l";
    case MetricName::token_f1:
      return "token_f1";
  }
  return "unknown";
}

MetricName parse_metric(std::string_view text) {
  if (text == "bleu4" || text == "bleu-4" || text == "bleu") return MetricName::bleu4;
  if (text == "rouge_l" || text == "rouge-l" || text == "rougel") return MetricName::rouge_l;
  if (text == "token_f1" || text == "f1") return MetricName::token_f1;
  throw InvalidArgument("unknown metric '" + std::string(text) + "'");
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  const auto& x = a.tokens;
  const auto& y = b.tokens;
  if (x.empty() || y.empty()) return 0;
  // Two rolling rows over the shorter sequence.
  const auto& outer = x.size() >= y.size() ? x : y;
  const auto& inner = x.size() >= y.size() ? y : x;
  std::vector<std::size_t> prev(inner.size() + 1, 0);
  std::vector<std::size_t> cur(inner.size() + 1, 0);
  for (std::size_t i = 1; i <= outer.size(); ++i) {
    for (std::size_t j = 1; j <= inner.size(); ++j) {
      cur[j] = outer[i - 1] == inner[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[inner.size()];
}

MetricValue rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  MetricValue mv;
  mv.name = MetricName::rouge_l;
  const std::size_t lcs = lcs_length(candidate, reference);
  mv.components["lcs"] = static_cast<double>(lcs);
  if (candidate.empty() || reference.empty() || lcs == 0) {
    mv.components["p"] = 0.0;
    mv.components["r"] = 0.0;
    mv.degenerate = candidate.empty() || reference.empty();
    return mv;
  }
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  mv.components["p"] = p;
  mv.components["r"] = r;
  mv.value = 2.0 * p * r / (p + r);
  return mv;
}

MetricValue bleu4(const TokenSequence& candidate, std::span<const TokenSequence> references,
                  BleuSmoothing smoothing) {
  return finish_bleu(bleu_stats(candidate, references), smoothing);
}

MetricValue corpus_bleu4(std::span<const BleuPair> pairs) {
  if (pairs.empty()) throw InvalidArgument("corpus BLEU needs at least one pair");
  BleuStats total;
  for (const auto& pair : pairs) {
    const BleuStats s = bleu_stats(pair.candidate, pair.references);
    for (std::size_t i = 0; i < kMaxOrder; ++i) {
      total.matches[i] += s.matches[i];
      total.totals[i] += s.totals[i];
    }
    total.cand_len += s.cand_len;
    total.ref_len += s.ref_len;
  }
  return finish_bleu(total, BleuSmoothing::none);
}

MetricValue token_f1(const TokenSequence& predicted, const TokenSequence& gold) {
  MetricValue mv;
  mv.name = MetricName::token_f1;
  if (predicted.empty() && gold.empty()) {
    mv.value = 1.0;
    mv.components = {{"p", 1.0}, {"r", 1.0}, {"overlap", 0.0}};
    mv.degenerate = true;
    return mv;
  }
  std::map<std::string, std::size_t> gold_counts;
  for (const auto& t : gold.tokens) ++gold_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : predicted.tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  mv.components["overlap"] = static_cast<double>(overlap);
  if (overlap == 0) {
    mv.components["p"] = 0.0;
    mv.components["r"] = 0.0;
    mv.degenerate = predicted.empty() || gold.empty();
    return mv;
  }
  const double p = static_cast<double>(overlap) / static_cast<double>(predicted.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(gold.size());
  mv.components["p"] = p;
  mv.components["r"] = r;
  mv.value = 2.0 * p * r / (p + r);
  return mv;
}

}  // namespace qselect
