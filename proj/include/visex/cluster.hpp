#pragma once

#include <cstdint>
#include <functional>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "visex/corpus.hpp"

namespace visex {

struct KMeansOptions {
  std::size_t k = 100;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  // Scale every embedding to unit length before clustering.
  bool normalize = false;
  // Called with the objective after every Lloyd iteration (and once after seeding).
  std::function<void(std::size_t iteration, double objective)> on_iteration;
};

struct ClusterModel {
  std::size_t k = 0;
  std::size_t dimension = 0;
  std::vector<std::vector<double>> centroids;
  std::map<std::string, std::size_t> assignment;
  double objective = 0.0;
  std::uint64_t seed = 0;
  std::size_t iterations_run = 0;
  bool normalized = false;
  // Objective after seeding and after every iteration; non-increasing.
  std::vector<double> objective_trace;

  // Content hash of the persisted form; binds triage labels to this model.
  std::string model_id() const;
  std::size_t cluster_size(std::size_t index) const;
};

// Lloyd iterations from k-means++ seeding; deterministic given (corpus, options).
ClusterModel kmeans_fit(const Corpus& corpus, const KMeansOptions& options);

// Lower-level entry on raw points; ids label the points in the assignment map.
ClusterModel kmeans_fit_points(const std::vector<std::vector<double>>& points,
                               const std::vector<std::string>& ids, const KMeansOptions& options);

// k-means++ seeding alone, exposed so independent Lloyd runs can start from the same centroids.
std::vector<std::vector<double>> kmeanspp_seed(const std::vector<std::vector<double>>& points,
                                               std::size_t k, std::uint64_t seed);

// Embedding as seen by the model (normalized when the model was fit that way).
std::vector<double> model_space(const ClusterModel& model, const std::vector<double>& embedding);

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

// Sum of squared distances of each assigned sentence to its centroid.
double recompute_objective(const ClusterModel& model, const Corpus& corpus);

struct Exemplar {
  std::string sentence_id;
  std::string class_id;
  std::optional<std::string> text;
  double distance = 0.0;
};

struct ClusterSummary {
  std::size_t cluster_index = 0;
  std::size_t size = 0;
  std::vector<Exemplar> exemplars;
  std::map<std::string, std::size_t> top_sections;
};

std::vector<ClusterSummary> summarize_clusters(const ClusterModel& model, const Corpus& corpus,
                                               std::size_t n_exemplars);

std::string serialize_cluster_model(const ClusterModel& model);
ClusterModel parse_cluster_model(const std::string& contents);
void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_cluster_model(const std::filesystem::path& path);

}  // namespace visex
