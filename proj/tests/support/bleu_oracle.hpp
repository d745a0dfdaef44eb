// Copyright 2026 The attr2style Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

// Brute-force corpus BLEU written directly from the n-gram definition, kept
// separate from the library implementation so the two can be compared.
namespace attr2style::testing {

using Sentence = std::vector<std::string>;

struct OracleBleu {
  std::vector<double> matched;
  std::vector<double> total;
  double score = 0.0;
};

inline Sentence ngram_at(const Sentence& s, size_t pos, int n) {
  return Sentence(s.begin() + static_cast<long>(pos), s.begin() + static_cast<long>(pos) + n);
}

inline int occurrences(const Sentence& s, const Sentence& gram) {
  int c = 0;
  const size_t n = gram.size();
  for (size_t i = 0; i + n <= s.size(); ++i)
    if (ngram_at(s, i, static_cast<int>(n)) == gram) ++c;
  return c;
}

inline OracleBleu oracle_bleu(const std::vector<Sentence>& cands, const std::vector<Sentence>& refs, int max_n,
                              bool add_one) {
  OracleBleu out;
  out.matched.assign(static_cast<size_t>(max_n), 0.0);
  out.total.assign(static_cast<size_t>(max_n), 0.0);
  double c_len = 0, r_len = 0;
  for (size_t k = 0; k < cands.size(); ++k) {
    const Sentence& c = cands[k];
    const Sentence& r = refs[k];
    c_len += static_cast<double>(c.size());
    r_len += static_cast<double>(r.size());
    for (int n = 1; n <= max_n; ++n) {
      std::vector<Sentence> seen;
      for (size_t i = 0; i + static_cast<size_t>(n) <= c.size(); ++i) {
        const Sentence g = ngram_at(c, i, n);
        out.total[static_cast<size_t>(n - 1)] += 1;
        if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
        seen.push_back(g);
        out.matched[static_cast<size_t>(n - 1)] += std::min(occurrences(c, g), occurrences(r, g));
      }
    }
  }
  double log_sum = 0;
  for (int n = 0; n < max_n; ++n) {
    double m = out.matched[static_cast<size_t>(n)], t = out.total[static_cast<size_t>(n)];
    if (add_one) {
      m += 1;
      t += 1;
    }
    if (m == 0 || t == 0) return out;
    log_sum += std::log(m / t);
  }
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  out.score = bp * std::exp(log_sum / max_n);
  return out;
}

}  // namespace attr2style::testing
