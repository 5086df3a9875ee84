#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "visex/cluster.hpp"
#include "visex/corpus.hpp"
#include "visex/triage.hpp"

namespace visex {

// Synthetic classes built around latent prototypes. Visual sentences and image
// features are prototype + noise; non-visual sentences scatter (`nonvisual_spread`)
// around a per-class topic drawn near one shared mean (`topic_scale`).
struct FixtureSpec {
  std::size_t classes = 20;
  std::size_t seen = 15;
  std::size_t sentences_per_class = 30;
  double visual_fraction = 0.4;
  double noise = 0.3;
  double nonvisual_spread = 0.5;
  double topic_scale = 2.0;
  std::size_t dimension = 32;
  // Prototypes span a random subspace of this rank (0: the full space), so seen
  // classes constrain the map applied to unseen ones.
  std::size_t prototype_rank = 6;
  std::size_t train_images_per_class = 20;
  std::size_t test_images_per_class = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FixtureTruth {
  std::set<std::string> visual_sentences;
  std::map<std::string, std::vector<double>> prototypes;
  std::map<std::string, std::size_t> train_images;
  std::map<std::string, std::size_t> test_images;
  std::map<std::string, std::size_t> visual_per_class;
};

struct Fixture {
  FixtureSpec spec;
  Corpus corpus;
  std::vector<ImageRecord> train_images;
  std::vector<ImageRecord> test_images;
  ClassSplit split;
  FixtureTruth truth;
};

Fixture generate_fixture(const FixtureSpec& spec);

// The demo/acceptance fixture: 20 classes (15 seen), 30 sentences, 40% visual.
FixtureSpec standard_fixture_spec(std::uint64_t seed = 7);

struct FixtureFiles {
  std::filesystem::path corpus;
  std::filesystem::path train_images;
  std::filesystem::path test_images;
  std::filesystem::path split;
  std::filesystem::path manifest;
};

FixtureFiles write_fixture(const Fixture& fixture, const std::filesystem::path& dir);
std::string fixture_manifest_json(const Fixture& fixture);
FixtureTruth load_fixture_truth(const std::filesystem::path& manifest);

// Stand-in for the human triage pass: a section or cluster is visual when most of
// its sentences are visual according to the ground truth.
TriageLabels oracle_labels(const Corpus& corpus, const FixtureTruth& truth,
                           const ClusterModel* model);

// Fraction of visual sentences that share a cluster with the majority class of
// that cluster's visual members.
double visual_cluster_purity(const ClusterModel& model, const Corpus& corpus,
                             const FixtureTruth& truth);

}  // namespace visex
