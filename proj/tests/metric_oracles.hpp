// Copyright 2026 The evotod Authors.
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


// Independent metric oracles shared by unit tests and the acceptance run.

#ifndef EVOTOD_TESTS_METRIC_ORACLES_HPP_
#define EVOTOD_TESTS_METRIC_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace evotod::testing {

using Tokens = std::vector<std::string>;

// Independent corpus BLEU-4: clipped n-gram counts summed over the corpus,
// add-one smoothing above unigrams, 0.1 for a zero unigram match count,
// brevity penalty against the summed reference length.
inline double oracle_bleu(const std::vector<Tokens>& cands, const std::vector<Tokens>& refs) {
  double match[5] = {0, 0, 0, 0, 0};
  double total[5] = {0, 0, 0, 0, 0};
  double c_len = 0, r_len = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const Tokens& c = cands[k];
    const Tokens& r = refs[k];
    c_len += static_cast<double>(c.size());
    r_len += static_cast<double>(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::string, int> rc, cc;
      auto key = [&](const Tokens& t, std::size_t i) {
        std::string s;
        for (std::size_t j = i; j < i + n; ++j) s += t[j] + '\x1f';
        return s;
      };
      for (std::size_t i = 0; i + n <= r.size(); ++i) rc[key(r, i)]++;
      for (std::size_t i = 0; i + n <= c.size(); ++i) cc[key(c, i)]++;
      for (auto& [g, cnt] : cc) match[n] += std::min(cnt, rc.count(g) ? rc[g] : 0);
      if (c.size() >= n) total[n] += static_cast<double>(c.size() - n + 1);
    }
  }
  if (c_len == 0) return 0;
  double logp = std::log((match[1] == 0 ? 0.1 : match[1]) / total[1]);
  for (int n = 2; n <= 4; ++n) logp += std::log((match[n] + 1) / (total[n] + 1));
  const double bp = c_len > r_len ? 1.0 : std::exp(1 - r_len / c_len);
  return 100 * bp * std::exp(logp / 4);
}

// Shannon entropy in bits of a token list, straight from the definition.
inline double oracle_entropy(const Tokens& tokens) {
  if (tokens.empty()) return 0.0;
  std::map<std::string, double> freq;
  for (const auto& t : tokens) freq[t] += 1.0;
  double h = 0.0;
  for (const auto& [_, c] : freq) {
    const double p = c / static_cast<double>(tokens.size());
    h -= p * std::log2(p);
  }
  return h;
}

}  // namespace evotod::testing

#endif  // EVOTOD_TESTS_METRIC_ORACLES_HPP_
