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

#include "evotod/embedding.hpp"

#include <cctype>
#include <cstdlib>
#include <numeric>

#include "evotod/rng.hpp"
#include "json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace evotod {

EmbeddingVector HashEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("text", "cannot embed empty text");
  Rng rng(mix_seed(fnv1a64(text)));
  Eigen::VectorXd v(dim_);
  // Box-Muller pairs
  for (Eigen::Index i = 0; i < dim_; i += 2) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    v[i] = r * std::cos(2.0 * M_PI * u2);
    if (i + 1 < dim_) v[i + 1] = r * std::sin(2.0 * M_PI * u2);
  }
  v.normalize();
  return {std::move(v), model_tag()};
}

EmbeddingVector TokenHashEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("text", "cannot embed empty text");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::uint64_t h = fnv1a64(token);
    for (int k = 0; k < kSlotsPerToken; ++k) {
      h = mix_seed(h + static_cast<std::uint64_t>(k));
      v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))] += (h >> 63) ? -1.0 : 1.0;
    }
    token.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  if (v.norm() == 0.0) {
    // punctuation-only text: fall back to a hashed direction
    return {HashEmbedder(dim_).embed(text).values, model_tag()};
  }
  v.normalize();
  return {std::move(v), model_tag()};
}

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string model, Eigen::Index dimension,
                               std::string api_key_env)
    : endpoint_(std::move(endpoint)),
      model_(std::move(model)),
      dim_(dimension),
      api_key_env_(std::move(api_key_env)) {}

EmbeddingVector RemoteEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("text", "cannot embed empty text");
  const auto scheme_end = endpoint_.find("://");
  const auto path_start = endpoint_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  const std::string host = endpoint_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);
  httplib::Client client(host);
  httplib::Headers headers;
  if (const char* key = std::getenv(api_key_env_.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const nlohmann::json body = {{"input", text}, {"model", model_}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("embedding request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw TransportError("embedding endpoint returned HTTP " + std::to_string(res->status));
  std::vector<double> values;
  try {
    const auto j = nlohmann::json::parse(res->body);
    const auto& arr = j.contains("data") ? j["data"].at(0).at("embedding") : j.at("embedding");
    values = arr.get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed embedding response: ") + e.what());
  }
  if (static_cast<Eigen::Index>(values.size()) != dim_) {
    throw ValidationError("dimension", "embedding has " + std::to_string(values.size()) +
                                           " values, expected " + std::to_string(dim_));
  }
  return {Eigen::Map<Eigen::VectorXd>(values.data(), dim_), model_};
}

std::unique_ptr<Embedder> make_embedder(const std::string& kind, Eigen::Index dimension,
                                        const std::string& model) {
  if (kind == "hash") return std::make_unique<HashEmbedder>(dimension);
  if (kind == "token-hash") return std::make_unique<TokenHashEmbedder>(dimension);
  if (kind.rfind("http://", 0) == 0 || kind.rfind("https://", 0) == 0) {
    return std::make_unique<RemoteEmbedder>(kind, model, dimension);
  }
  throw ValidationError("embedder", "unknown embedder '" + kind + "'");
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.model_tag != b.model_tag) throw ValidationError("model_tag", "embeddings come from different models");
  return cosine_similarity(a.values, b.values);
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::vector<std::vector<std::size_t>> similar_groups(const Eigen::MatrixXd& similarity, double threshold) {
  const auto n = static_cast<std::size_t>(similarity.rows());
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= threshold) {
        const auto a = find_root(parent, i);
        const auto b = find_root(parent, j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<std::vector<std::size_t>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) by_root[find_root(parent, i)].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& g : by_root) {
    if (g.size() >= 2) groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<std::vector<std::size_t>> similar_groups(const std::vector<Strategy>& strategies,
                                                     Embedder& embedder, double threshold) {
  if (strategies.size() < 2) return {};
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(strategies.size()), embedder.dimension());
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = embedder.embed(strategies[i].content).values.transpose();
  }
  return similar_groups(similarity_matrix(rows), threshold);
}

}  // namespace evotod
