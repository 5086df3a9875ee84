#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>

#include "visex/cluster.hpp"
#include "visex/corpus.hpp"

namespace visex {

enum class Verdict { unlabeled, visual, nonvisual };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct TriageLabels {
  std::map<std::string, Verdict> sections;
  std::map<std::size_t, Verdict> clusters;
  std::string cluster_model_id;
  std::size_t cluster_count = 0;
  std::uint64_t revision = 0;

  Verdict section(const std::string& name) const;
  Verdict cluster(std::size_t index) const;
  std::set<std::string> visual_sections() const;
  std::set<std::size_t> visual_clusters() const;
  std::size_t count(Verdict v) const;

  bool operator==(const TriageLabels&) const = default;
};

// Fresh labels bound to a model: every section of the corpus and every cluster unlabeled.
TriageLabels make_labels(const Corpus& corpus, const ClusterModel* model);

// Rebinds to model; cluster verdicts reset to unlabeled when the model id differs.
TriageLabels bind_labels(TriageLabels labels, const ClusterModel& model);

// Each mutation returns the updated labels with revision + 1.
TriageLabels label_section(TriageLabels labels, const Corpus& corpus, const std::string& section,
                           Verdict verdict);
TriageLabels label_cluster(TriageLabels labels, std::size_t cluster_index, Verdict verdict);

std::string serialize_labels(const TriageLabels& labels);
TriageLabels parse_labels(const std::string& contents);
void save_labels(const TriageLabels& labels, const std::filesystem::path& path);
TriageLabels load_labels(const std::filesystem::path& path);

// Thread-safe holder of the current labels. Readers get immutable snapshots;
// mutations are serialized and persisted before the new snapshot is published.
class LabelStore {
 public:
  LabelStore(TriageLabels initial, std::filesystem::path path);

  std::shared_ptr<const TriageLabels> snapshot() const;

  // Applies fn to a copy of the current labels, persists, publishes. The mutator
  // must bump the revision (label_section / label_cluster do).
  std::shared_ptr<const TriageLabels> update(
      const std::function<TriageLabels(const TriageLabels&)>& fn);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex write_mutex_;
  std::shared_ptr<const TriageLabels> current_;
};

}  // namespace visex
