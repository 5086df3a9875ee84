#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "visex/corpus.hpp"
#include "visex/mlp.hpp"
#include "visex/repr.hpp"

namespace visex {

// Bilinear alignment s(x, a) = f(x)^T M g(a) between image features and class
// representations, trained with the hinge ranking loss.
struct DeviseModel {
  Mlp f;  // image side
  Mlp g;  // representation side
  Matrix M;
  double margin = 0.2;

  std::size_t image_width() const { return f.input_width(); }
  std::size_t repr_width() const { return g.input_width(); }

  // f parameters, then g parameters, then M row-major.
  std::size_t parameter_count() const;
  Vector parameters() const;
  void set_parameters(const Eigen::Ref<const Vector>& flat);
};

struct DeviseArch {
  // false: f and g are identities and M is image_dim x repr_dim.
  bool mlp = true;
  // 0 selects min(512, image_dim).
  std::size_t latent = 0;
  // Width of both hidden layers; 0 selects twice the latent width, which leaves
  // room for the identity path.
  std::size_t hidden = 0;
  double margin = 0.2;
  // Scale of the random f and g weights (relative to He initialization).
  double init_scale = 0.1;
  // Start f and g near the identity so training departs from plain DeViSE.
  bool identity_init = true;
  // Standard deviation of M entries times sqrt(columns); small values start all scores near 0.
  double matrix_init_scale = 0.01;
};

DeviseModel make_devise(std::size_t image_dim, std::size_t repr_dim, const DeviseArch& arch,
                        std::uint64_t seed);

std::string serialize_devise(const DeviseModel& model);
DeviseModel parse_devise(const std::string& contents);
void save_devise(const DeviseModel& model, const std::filesystem::path& path);
DeviseModel load_devise(const std::filesystem::path& path);

double score(const DeviseModel& model, const std::vector<double>& x, const Representation& a);

// Candidate classes in a fixed order with their representations stacked as rows.
struct ClassTable {
  std::vector<std::string> ids;
  Matrix reps;

  std::size_t index_of(const std::string& id) const;
};

ClassTable make_class_table(const std::vector<std::string>& ids, const RepresentationSet& reps);

struct DeviseObjective {
  double loss = 0.0;
  Vector grad;    // model parameters
  Matrix d_reps;  // dLoss / d class representation rows
};

// Sum over examples n and negatives c of max(0, margin - s(x_n, a_{y_n}) + s(x_n, a_c)).
// negatives[n] lists class-table indices; an empty list means every other class.
DeviseObjective devise_objective(const DeviseModel& model, const Matrix& x,
                                 const std::vector<std::size_t>& labels, const ClassTable& classes,
                                 const std::vector<std::vector<std::size_t>>& negatives = {});

// Loss of a labelled batch against every other class in `negative_pool` (all
// classes with representations when empty).
double devise_loss(const DeviseModel& model, const std::vector<ImageRecord>& batch,
                   const RepresentationSet& reps, const std::vector<std::string>& negative_pool = {});

struct ZslTrainConfig {
  double margin = 0.2;
  double step_size = 2e-4;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  // 0 means all other seen classes.
  std::size_t negatives = 0;
  std::uint64_t seed = 0;
  Optimizer::Kind optimizer = Optimizer::Kind::adam;

  void validate() const;
};

struct ZslTrainLog {
  // Mean loss per image over each epoch.
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

// Learns the weight net together with the alignment; representations of seen
// classes are recomputed from the net at every step.
struct JointWeighting {
  WeightNet* net = nullptr;
  const std::vector<ClassSentences>* docs = nullptr;
};

// Trains on images of seen classes only; any unseen-class image is rejected.
DeviseModel train_devise(DeviseModel model, const std::vector<ImageRecord>& images,
                         const RepresentationSet& reps, const ClassSplit& split,
                         const ZslTrainConfig& config, ZslTrainLog* log = nullptr,
                         JointWeighting* joint = nullptr);

// Highest-scoring candidate; ties go to the lexicographically smallest class id.
std::string predict(const DeviseModel& model, const std::vector<double>& x,
                    const std::vector<std::string>& candidates, const RepresentationSet& reps);

std::vector<std::string> predict_batch(const DeviseModel& model,
                                       const std::vector<ImageRecord>& images,
                                       const std::vector<std::string>& candidates,
                                       const RepresentationSet& reps);

}  // namespace visex
