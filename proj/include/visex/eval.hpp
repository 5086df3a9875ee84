#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "visex/corpus.hpp"
#include "visex/zsl.hpp"

namespace visex {

struct GzslScores {
  double unseen = 0.0;  // U
  double seen = 0.0;    // S
  double harmonic = 0.0;  // H
};

// 2US / (U + S), or 0 when U + S = 0.
double harmonic_mean(double unseen, double seen);

struct EvalReport {
  std::string split;
  std::map<std::string, double> per_class;
  std::map<std::string, std::size_t> per_class_total;
  std::map<std::string, std::size_t> per_class_correct;
  // Mean of per-class accuracies.
  double per_class_top1 = 0.0;
  // Mean over images.
  double per_sample_top1 = 0.0;
  std::size_t images = 0;
  // Candidate classes without test images (excluded from the mean).
  std::vector<std::string> excluded_classes;
  std::optional<GzslScores> gzsl;
};

// (true class, predicted class) pairs; candidates only feed the exclusion list.
EvalReport report_from_predictions(const std::vector<std::pair<std::string, std::string>>& outcomes,
                                   const std::vector<std::string>& candidates,
                                   const std::string& split_name);

EvalReport evaluate(const DeviseModel& model, const std::vector<ImageRecord>& images,
                    const RepresentationSet& reps, const std::vector<std::string>& candidates,
                    const std::string& split_name);

// Candidate set is seen and unseen classes for both image sets.
EvalReport evaluate_gzsl(const DeviseModel& model, const std::vector<ImageRecord>& seen_images,
                         const std::vector<ImageRecord>& unseen_images,
                         const RepresentationSet& reps, const ClassSplit& split);

// Nested hop sets: 2-hop classes also count as 3-hop and all, 3-hop as all. Each
// report restricts images and candidates to that hop's unseen classes; hops with
// no classes are omitted.
std::map<Hop, EvalReport> hop_breakdown(const DeviseModel& model,
                                        const std::vector<ImageRecord>& unseen_images,
                                        const RepresentationSet& reps, const ClassSplit& split);

std::vector<std::string> hop_classes(const ClassSplit& split, Hop hop);

std::string eval_report_json(const EvalReport& report);

}  // namespace visex
