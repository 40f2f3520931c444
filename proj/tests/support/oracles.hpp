// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations used to cross-check the metrics.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace qselect::oracle {

using Tokens = std::vector<std::string>;

// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_exhaustive(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  const std::size_t n = a.size();
  for (unsigned long mask = 0; mask < (1UL << n); ++mask) {
    Tokens sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1UL << i)) sub.push_back(a[i]);
    }
    if (sub.size() <= best) continue;
    std::size_t j = 0;
    for (const auto& t : b) {
      if (j < sub.size() && sub[j] == t) ++j;
    }
    if (j == sub.size()) best = sub.size();
  }
  return best;
}

inline std::size_t count_occurrences(const Tokens& seq, const Tokens& gram) {
  std::size_t c = 0;
  if (seq.size() < gram.size()) return 0;
  for (std::size_t i = 0; i + gram.size() <= seq.size(); ++i) {
    if (std::equal(gram.begin(), gram.end(), seq.begin() + static_cast<long>(i))) ++c;
  }
  return c;
}

struct ClippedCounts {
  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
};

// Walks each candidate position; a gram is clipped the first time it is seen.
inline ClippedCounts clipped_counts(const Tokens& cand, const std::vector<Tokens>& refs) {
  ClippedCounts c;
  c.cand_len = cand.size();
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  c.ref_len = best;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (cand.size() < n) continue;
    c.totals[n - 1] = cand.size() - n + 1;
    std::vector<Tokens> seen;
    for (std::size_t i = 0; i + n <= cand.size(); ++i) {
      Tokens gram(cand.begin() + static_cast<long>(i), cand.begin() + static_cast<long>(i + n));
      if (std::find(seen.begin(), seen.end(), gram) != seen.end()) continue;
      seen.push_back(gram);
      std::size_t ref_max = 0;
      for (const auto& r : refs) ref_max = std::max(ref_max, count_occurrences(r, gram));
      c.matches[n - 1] += std::min(count_occurrences(cand, gram), ref_max);
    }
  }
  return c;
}

inline double bleu_from_counts(const ClippedCounts& c, bool smooth) {
  if (c.cand_len == 0) return 0.0;
  double product = 1.0;
  for (int i = 0; i < 4; ++i) {
    double p;
    if (c.matches[i] > 0) {
      p = static_cast<double>(c.matches[i]) / static_cast<double>(c.totals[i]);
    } else if (smooth && i >= 1) {
      p = 1.0 / (static_cast<double>(c.totals[i]) + 1.0);
    } else {
      return 0.0;
    }
    product *= p;
  }
  const double bp = c.cand_len > c.ref_len ? 1.0 : std::exp(1.0 - double(c.ref_len) / double(c.cand_len));
  return bp * std::pow(product, 0.25);
}

inline double sentence_bleu(const Tokens& cand, const std::vector<Tokens>& refs) {
  return bleu_from_counts(clipped_counts(cand, refs), true);
}

inline double corpus_bleu(const std::vector<std::pair<Tokens, std::vector<Tokens>>>& pairs) {
  ClippedCounts total;
  for (const auto& [cand, refs] : pairs) {
    const ClippedCounts c = clipped_counts(cand, refs);
    for (int i = 0; i < 4; ++i) {
      total.matches[i] += c.matches[i];
      total.totals[i] += c.totals[i];
    }
    total.cand_len += c.cand_len;
    total.ref_len += c.ref_len;
  }
  return bleu_from_counts(total, false);
}

// Multiset overlap by deleting matched tokens from a copy of gold.
inline double f1_multiset(const Tokens& pred, const Tokens& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  Tokens pool = gold;
  std::size_t overlap = 0;
  for (const auto& t : pred) {
    auto it = std::find(pool.begin(), pool.end(), t);
    if (it != pool.end()) {
      pool.erase(it);
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = double(overlap) / double(pred.size());
  const double r = double(overlap) / double(gold.size());
  return 2 * p * r / (p + r);
}

inline double rouge_l_f(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const std::size_t lcs = lcs_exhaustive(cand.size() <= ref.size() ? cand : ref, cand.size() <= ref.size() ? ref : cand);
  if (lcs == 0) return 0.0;
  const double p = double(lcs) / double(cand.size());
  const double r = double(lcs) / double(ref.size());
  return 2 * p * r / (p + r);
}

// Unique n-grams of q found in c over unique n-grams of q, by pairwise scan.
inline double ngram_sim(const Tokens& c, const Tokens& q, std::size_t n) {
  std::vector<Tokens> qs;
  for (std::size_t i = 0; i + n <= q.size(); ++i) {
    Tokens g(q.begin() + static_cast<long>(i), q.begin() + static_cast<long>(i + n));
    if (std::find(qs.begin(), qs.end(), g) == qs.end()) qs.push_back(g);
  }
  if (qs.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& g : qs) hit += count_occurrences(c, g) > 0 ? 1 : 0;
  return double(hit) / double(qs.size());
}

// Random sequences over a small vocabulary so matches are frequent.
inline Tokens random_tokens(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  Tokens out(len(rng));
  for (auto& t : out) t = "w" + std::to_string(word(rng));
  return out;
}

}  // namespace qselect::oracle
