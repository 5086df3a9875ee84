#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "visex/corpus.hpp"
#include "visex/filter.hpp"
#include "visex/mlp.hpp"

namespace visex {

// Scores sentences; a softmax over a document's scores gives the sentence weights.
struct WeightNet {
  Mlp mlp;
  // Multiply the weighted sum by 1/|document|, as in the weighted-average formula.
  // Cosine objectives do not depend on it; downstream alignment does.
  bool scale_by_count = true;

  std::size_t input_width() const { return mlp.input_width(); }
};

// widths = {d, hidden..., 1}. Weights ~ N(0, (init_scale^2)/fan_in), biases zero, so
// the initial weights are close to uniform.
WeightNet make_weightnet(std::size_t dimension, const std::vector<std::size_t>& hidden,
                         std::uint64_t seed, double init_scale = 0.01);

std::string serialize_weightnet(const WeightNet& net);
WeightNet parse_weightnet(const std::string& contents);
void save_weightnet(const WeightNet& net, const std::filesystem::path& path);
WeightNet load_weightnet(const std::filesystem::path& path);

// Kept sentence embeddings of one filtered document, one row per sentence.
struct ClassSentences {
  std::string class_id;
  std::vector<std::string> sentence_ids;
  Matrix embeddings;
};

ClassSentences gather_sentences(const FilteredDocument& doc, const Corpus& corpus);
// Sorted by class id.
std::vector<ClassSentences> gather_sentences(const FilteredCorpus& filtered, const Corpus& corpus);

Vector average_vector(const Matrix& sentences);
Vector softmax_weights(const WeightNet& net, const Matrix& sentences);
Vector weighted_vector(const WeightNet& net, const Matrix& sentences);

// 0 when either vector is zero.
double cosine(const Vector& a, const Vector& b);
// d cos(a, b) / d a; zero when either vector is zero.
Vector cosine_gradient(const Vector& a, const Vector& b);

Representation average_repr(const FilteredDocument& doc, const Corpus& corpus);
std::map<std::string, double> lambda_weights(const WeightNet& net, const FilteredDocument& doc,
                                             const Corpus& corpus);
Representation weighted_repr(const WeightNet& net, const FilteredDocument& doc,
                             const Corpus& corpus);

// Adds dLoss/dParams of the weight net to grad, given dLoss/dRepresentation of one class.
void accumulate_weighted_gradient(const WeightNet& net, const Matrix& sentences,
                                  const Vector& d_repr, Eigen::Ref<Vector> grad);

struct Objective {
  double loss = 0.0;
  Vector grad;
};

// sum_c max(0, epsilon - cos(a_c, mean_c)) over the given class indices (all when empty).
Objective init_objective(const WeightNet& net, const std::vector<ClassSentences>& docs,
                         double epsilon, const std::vector<std::size_t>& classes = {});

// sum over ordered pairs (c, c'), c != c', of max(0, cos(a_c, a_c') - tau). Each
// entry of `pairs` is an unordered pair {i, j}, i != j, contributing both orders.
// Empty `pairs` means every pair.
Objective margin_objective(const WeightNet& net, const std::vector<ClassSentences>& docs,
                           double tau, const std::vector<std::pair<std::size_t, std::size_t>>& pairs = {});

struct ReprTrainConfig {
  double epsilon = 0.9;
  double tau = 0.95;
  double step_size = 2e-4;
  std::size_t init_epochs = 200;
  std::size_t margin_epochs = 200;
  // 0 means every class per step.
  std::size_t class_batch_size = 0;
  // 0 means every pair per step.
  std::size_t pair_batch_size = 0;
  std::uint64_t seed = 0;
  Optimizer::Kind optimizer = Optimizer::Kind::adam;
  // Stop a phase as soon as its full objective reaches zero.
  bool stop_when_satisfied = true;

  void validate() const;
};

struct ReprTrainLog {
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
  bool satisfied = false;
};

WeightNet train_weightnet_init(WeightNet net, const std::vector<ClassSentences>& docs,
                               const ReprTrainConfig& config, ReprTrainLog* log = nullptr);
WeightNet train_weightnet_margin(WeightNet net, const std::vector<ClassSentences>& docs,
                                 const ReprTrainConfig& config, ReprTrainLog* log = nullptr);

// weighted_direct: the weight net was learned jointly with the alignment objective
// (see zsl::train_devise); representations are built the same way as `weighted`.
enum class BuildKind { average, weighted, weighted_direct };

std::string to_string(BuildKind kind);
BuildKind build_kind_from_string(const std::string& s);

RepresentationSet build_representations(const Corpus& corpus, const FilteredCorpus& filtered,
                                        BuildKind kind, const WeightNet* net = nullptr);

// Pairwise cosine of all representations, keyed by ordered (class, class) with first < second.
std::map<std::pair<std::string, std::string>, double> pairwise_cosines(const RepresentationSet& reps);

}  // namespace visex
