#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "visex/corpus.hpp"
#include "visex/mlp.hpp"
#include "visex/rng.hpp"

namespace visex::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("visex-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Sentence sentence(const std::string& cls, std::size_t pos, const std::string& section,
                         std::vector<double> embedding, std::optional<std::string> text = std::nullopt) {
  Sentence s;
  s.sentence_id = cls + "/" + std::to_string(pos);
  s.class_id = cls;
  s.section = section;
  s.position = pos;
  s.embedding = std::move(embedding);
  s.text = std::move(text);
  return s;
}

inline Corpus corpus_of(const std::vector<Sentence>& sentences, std::size_t d) {
  std::map<std::string, Document> docs;
  for (const auto& s : sentences) {
    auto& doc = docs[s.class_id];
    doc.class_id = s.class_id;
    doc.sentences.push_back(s);
  }
  return Corpus(std::move(docs), d);
}

inline std::vector<double> random_vector(Rng& rng, std::size_t d, double sd = 1.0) {
  std::vector<double> v(d);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = sd * rng.normal();
  }
  return m;
}

// Central differences of f around x with the given step.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double step = 1e-5) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = f(probe);
    probe[i] = x[i] - step;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||); 0 when both are at rounding level.
inline double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale < 1e-12 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace visex::test
