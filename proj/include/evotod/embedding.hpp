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

// Text embeddings and similarity grouping.

#ifndef EVOTOD_EMBEDDING_HPP_
#define EVOTOD_EMBEDDING_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "evotod/errors.hpp"
#include "evotod/strategy_bank.hpp"

namespace evotod {

struct EmbeddingVector {
  Eigen::VectorXd values;
  std::string model_tag;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(const std::string& text) = 0;
  virtual std::string model_tag() const = 0;
  virtual Eigen::Index dimension() const = 0;
};

// Unit-norm Gaussian vector seeded by the FNV-1a hash of the text. Unrelated
// texts are close to orthogonal; only identical texts coincide.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(Eigen::Index dimension = 384) : dim_(dimension) {}
  EmbeddingVector embed(const std::string& text) override;
  std::string model_tag() const override { return "hash-" + std::to_string(dim_); }
  Eigen::Index dimension() const override { return dim_; }

 private:
  Eigen::Index dim_;
};

// Bag of lower-cased word tokens, each hashed to a few signed coordinates,
// then normalised. Texts sharing most of their words come out similar.
class TokenHashEmbedder : public Embedder {
 public:
  static constexpr int kSlotsPerToken = 4;

  explicit TokenHashEmbedder(Eigen::Index dimension = 384) : dim_(dimension) {}
  EmbeddingVector embed(const std::string& text) override;
  std::string model_tag() const override { return "token-hash-" + std::to_string(dim_); }
  Eigen::Index dimension() const override { return dim_; }

 private:
  Eigen::Index dim_;
};

// POST {"input": text, "model": model} to `endpoint`; accepts either
// {"data": [{"embedding": [...]}]} or {"embedding": [...]}.
class RemoteEmbedder : public Embedder {
 public:
  RemoteEmbedder(std::string endpoint, std::string model, Eigen::Index dimension,
                 std::string api_key_env = "EVOTOD_EMBED_API_KEY");
  EmbeddingVector embed(const std::string& text) override;
  std::string model_tag() const override { return model_; }
  Eigen::Index dimension() const override { return dim_; }

 private:
  std::string endpoint_;
  std::string model_;
  Eigen::Index dim_;
  std::string api_key_env_;
};

// kind: "hash" | "token-hash" | an http(s) URL.
std::unique_ptr<Embedder> make_embedder(const std::string& kind, Eigen::Index dimension = 384,
                                        const std::string& model = "bge-small-en-v1.5");

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw ValidationError("dimension", "embedding dimensions differ");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw ValidationError("norm", "zero-norm embedding");
  const Scalar s = a.dot(b) / (na * nb);
  return std::max(Scalar(-1), std::min(Scalar(1), s));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Pairwise cosine similarities of the rows of `rows`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> similarity_matrix(
    const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto norms = rows.rowwise().norm().eval();
  if ((norms.array() == Scalar(0)).any()) throw ValidationError("norm", "zero-norm embedding");
  const Matrix unit = norms.asDiagonal().inverse() * rows;
  Matrix s = unit * unit.transpose();
  // make symmetry exact regardless of summation order
  s = ((s + s.transpose()) / Scalar(2)).eval();
  return s.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
}

// Connected components (size >= 2) of the graph joining i and j when
// similarity(i, j) >= threshold. Groups hold ascending indices and are ordered
// by their smallest member.
std::vector<std::vector<std::size_t>> similar_groups(const Eigen::MatrixXd& similarity, double threshold);

// Embeds every content and groups the strategies; indices refer to `strategies`.
std::vector<std::vector<std::size_t>> similar_groups(const std::vector<Strategy>& strategies,
                                                     Embedder& embedder, double threshold);

}  // namespace evotod

#endif  // EVOTOD_EMBEDDING_HPP_
