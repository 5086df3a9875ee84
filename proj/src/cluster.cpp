#include "visex/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"
#include "visex/rng.hpp"

namespace visex {

using nlohmann::json;

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

std::vector<double> unit(const std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n == 0.0) return v;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

// Nearest centroid; ties go to the lower index.
std::pair<std::size_t, double> nearest(const std::vector<std::vector<double>>& centroids,
                                       const std::vector<double>& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {best, best_d};
}

}  // namespace

std::vector<std::vector<double>> kmeanspp_seed(const std::vector<std::vector<double>>& points,
                                               std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ValidationError("K must be positive");
  if (k > points.size()) {
    throw ValidationError("K=" + std::to_string(k) + " exceeds point count " +
                          std::to_string(points.size()));
  }
  Rng rng(seed);
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = squared_distance(points[i], centroids[0]);

  while (centroids.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total <= 0.0) {
      // Remaining points coincide with chosen centroids; take the first unused index.
      pick = centroids.size() % points.size();
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = points.size() - 1;
      while (d2[pick] == 0.0) --pick;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (r < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
  }
  return centroids;
}

ClusterModel kmeans_fit_points(const std::vector<std::vector<double>>& points,
                               const std::vector<std::string>& ids, const KMeansOptions& options) {
  if (options.k == 0) throw ValidationError("K must be positive");
  if (options.max_iter == 0) throw ValidationError("max_iter must be at least 1");
  if (points.empty()) throw ValidationError("no points to cluster");
  if (options.k > points.size()) {
    throw ValidationError("K=" + std::to_string(options.k) + " exceeds sentence count " +
                          std::to_string(points.size()));
  }
  if (ids.size() != points.size()) throw ValidationError("id count does not match point count");

  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();

  ClusterModel model;
  model.k = options.k;
  model.dimension = dim;
  model.seed = options.seed;
  model.normalized = options.normalize;
  model.centroids = kmeanspp_seed(points, options.k, options.seed);

  std::vector<std::size_t> assign(n);
  auto assign_all = [&]() {
    double objective = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto [c, d] = nearest(model.centroids, points[i]);
      if (c != assign[i]) changed = true;
      assign[i] = c;
      objective += d;
    }
    return std::make_pair(objective, changed);
  };

  auto [objective, ignored] = assign_all();
  (void)ignored;
  model.objective_trace.push_back(objective);
  if (options.on_iteration) options.on_iteration(0, objective);

  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    std::vector<std::vector<double>> sums(options.k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(options.k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) s[j] += points[i][j];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < options.k; ++c) {
      if (counts[c] == 0) continue;  // empty clusters keep their centroid
      for (std::size_t j = 0; j < dim; ++j) {
        model.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
    const auto [next_objective, changed] = assign_all();
    const double prev = model.objective_trace.back();
    if (next_objective > prev + 1e-12 * std::max(1.0, prev)) {
      throw RuntimeError("k-means objective increased at iteration " + std::to_string(it));
    }
    objective = next_objective;
    model.objective_trace.push_back(objective);
    model.iterations_run = it;
    if (options.on_iteration) options.on_iteration(it, objective);
    if (!changed) break;
  }

  model.objective = objective;
  for (std::size_t i = 0; i < n; ++i) model.assignment[ids[i]] = assign[i];
  return model;
}

std::vector<double> model_space(const ClusterModel& model, const std::vector<double>& embedding) {
  return model.normalized ? unit(embedding) : embedding;
}

ClusterModel kmeans_fit(const Corpus& corpus, const KMeansOptions& options) {
  std::vector<std::vector<double>> points;
  std::vector<std::string> ids;
  points.reserve(corpus.sentence_count());
  ids.reserve(corpus.sentence_count());
  for (const Sentence* s : corpus.all_sentences()) {
    points.push_back(options.normalize ? unit(s->embedding) : s->embedding);
    ids.push_back(s->sentence_id);
  }
  return kmeans_fit_points(points, ids, options);
}

double recompute_objective(const ClusterModel& model, const Corpus& corpus) {
  double total = 0.0;
  for (const Sentence* s : corpus.all_sentences()) {
    auto it = model.assignment.find(s->sentence_id);
    if (it == model.assignment.end()) {
      throw ValidationError("sentence " + s->sentence_id + " is not assigned by the cluster model");
    }
    total += squared_distance(model.centroids[it->second], model_space(model, s->embedding));
  }
  return total;
}

std::size_t ClusterModel::cluster_size(std::size_t index) const {
  std::size_t n = 0;
  for (const auto& [id, c] : assignment) n += (c == index);
  return n;
}

std::vector<ClusterSummary> summarize_clusters(const ClusterModel& model, const Corpus& corpus,
                                               std::size_t n_exemplars) {
  if (n_exemplars == 0) throw ValidationError("n_exemplars must be positive");
  if (model.dimension != corpus.dimension()) {
    throw ValidationError("cluster model dimension does not match corpus");
  }
  std::vector<ClusterSummary> out(model.k);
  std::vector<std::vector<Exemplar>> members(model.k);
  for (std::size_t c = 0; c < model.k; ++c) out[c].cluster_index = c;

  for (const Sentence* s : corpus.all_sentences()) {
    auto it = model.assignment.find(s->sentence_id);
    if (it == model.assignment.end()) {
      throw ValidationError("cluster model is not bound to this corpus (missing " +
                            s->sentence_id + ")");
    }
    const std::size_t c = it->second;
    const double d = std::sqrt(squared_distance(model.centroids[c], model_space(model, s->embedding)));
    members[c].push_back(Exemplar{s->sentence_id, s->class_id, s->text, d});
    ++out[c].top_sections[s->section];
    ++out[c].size;
  }
  for (std::size_t c = 0; c < model.k; ++c) {
    auto& m = members[c];
    std::sort(m.begin(), m.end(), [](const Exemplar& a, const Exemplar& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      return a.sentence_id < b.sentence_id;
    });
    if (m.size() > n_exemplars) m.resize(n_exemplars);
    out[c].exemplars = std::move(m);
  }
  return out;
}

std::string serialize_cluster_model(const ClusterModel& model) {
  json obj;
  obj["k"] = model.k;
  obj["dimension"] = model.dimension;
  obj["seed"] = model.seed;
  obj["objective"] = model.objective;
  obj["iterations_run"] = model.iterations_run;
  obj["normalized"] = model.normalized;
  obj["objective_trace"] = model.objective_trace;
  obj["centroids"] = model.centroids;
  json assign = json::object();
  for (const auto& [id, c] : model.assignment) assign[id] = c;
  obj["assignment"] = assign;
  return obj.dump() + "\n";
}

ClusterModel parse_cluster_model(const std::string& contents) {
  try {
    const json obj = json::parse(contents);
    ClusterModel m;
    m.k = obj.at("k").get<std::size_t>();
    m.dimension = obj.at("dimension").get<std::size_t>();
    m.seed = obj.at("seed").get<std::uint64_t>();
    m.objective = obj.at("objective").get<double>();
    m.iterations_run = obj.at("iterations_run").get<std::size_t>();
    m.normalized = obj.value("normalized", false);
    m.objective_trace = obj.value("objective_trace", std::vector<double>{});
    m.centroids = obj.at("centroids").get<std::vector<std::vector<double>>>();
    for (auto it = obj.at("assignment").begin(); it != obj.at("assignment").end(); ++it) {
      m.assignment[it.key()] = it.value().get<std::size_t>();
    }
    if (m.centroids.size() != m.k) throw ValidationError("centroid count does not match K");
    for (const auto& c : m.centroids) {
      if (c.size() != m.dimension) throw ValidationError("centroid dimension mismatch");
    }
    for (const auto& [id, c] : m.assignment) {
      if (c >= m.k) throw ValidationError("assignment of " + id + " out of range");
    }
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed cluster model: ") + e.what());
  }
}

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_cluster_model(model));
}

ClusterModel load_cluster_model(const std::filesystem::path& path) {
  return parse_cluster_model(io::read_file(path));
}

std::string ClusterModel::model_id() const {
  return io::sha256_hex(serialize_cluster_model(*this)).substr(0, 16);
}

}  // namespace visex
