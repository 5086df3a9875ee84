#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "visex/eval.hpp"
#include "visex/filter.hpp"
#include "visex/repr.hpp"
#include "visex/zsl.hpp"

namespace visex {

enum class CandidateSet { unseen, all };

struct PipelineConfig {
  // Inputs.
  std::filesystem::path corpus;
  std::filesystem::path train_images;
  std::filesystem::path test_images;
  std::filesystem::path split;
  std::filesystem::path labels;          // required for vis-* modes
  std::filesystem::path cluster_model;   // fitted when empty and needed
  std::filesystem::path external_repr;   // for repr_kind = external
  std::filesystem::path out_dir = "visex-out";

  // Clustering.
  std::size_t k = 100;
  std::uint64_t cluster_seed = 0;
  std::size_t cluster_max_iter = 100;
  bool cluster_normalize = false;

  FilterMode mode = FilterMode::vis_sec_clu;

  // Representations: average, weighted, weighted-direct, or external.
  std::string repr_kind = "weighted";
  std::vector<std::size_t> weightnet_hidden{256, 256};
  double weightnet_init_scale = 0.01;
  bool weightnet_scale_by_count = true;
  std::uint64_t weightnet_seed = 0;
  ReprTrainConfig repr_train;

  // Alignment.
  DeviseArch arch;
  ZslTrainConfig zsl_train;
  std::uint64_t model_seed = 0;

  // Evaluation.
  CandidateSet candidates = CandidateSet::unseen;
  bool hops = true;
  bool gzsl = true;

  void validate() const;
};

std::string to_string(CandidateSet c);
CandidateSet candidate_set_from_string(const std::string& s);

// JSON mirror of every flag. Keys absent from the JSON keep their defaults.
nlohmann::json pipeline_config_json(const PipelineConfig& config, bool include_out_dir = true);
PipelineConfig parse_pipeline_config(const nlohmann::json& obj, PipelineConfig base = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct PipelineResult {
  EvalReport report;                  // candidates per config
  std::optional<EvalReport> validation;  // seen test images among seen classes
  std::optional<EvalReport> gzsl;
  std::map<Hop, EvalReport> hops;
  FilterStats filter_stats;
  std::filesystem::path manifest;
};

// ingest -> cluster -> filter -> representations -> train -> eval. Every artifact
// lands in out_dir; manifest.json records config, seeds, and input/output hashes.
PipelineResult run_pipeline(const PipelineConfig& config);

struct SweepPoint {
  double tau = 0.0;
  double margin = 0.0;
  double step_size = 0.0;
  double unseen_top1 = 0.0;
  std::optional<double> validation_top1;
};

// Runs the pipeline over every (tau, margin, step size) combination; empty grids
// keep the config value. Results are written to out_dir/sweep.json.
std::vector<SweepPoint> run_sweep(const PipelineConfig& config, const std::vector<double>& taus,
                                  const std::vector<double>& margins,
                                  const std::vector<double>& step_sizes);

}  // namespace visex
