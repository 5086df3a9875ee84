#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "visex/cluster.hpp"
#include "visex/corpus.hpp"
#include "visex/triage.hpp"

namespace visex {

// no: every sentence. vis_sec: visual sections plus the first paragraph.
// vis_clu: visual clusters. vis_sec_clu: union of the two. par_1st: first
// paragraph only. cls_name: sentences whose text mentions the class name.
enum class FilterMode { no, vis_sec, vis_clu, vis_sec_clu, par_1st, cls_name };

std::string to_string(FilterMode mode);
FilterMode filter_mode_from_string(const std::string& s);
bool uses_sections(FilterMode mode);
bool uses_clusters(FilterMode mode);

struct KeptSentence {
  std::string sentence_id;
  bool by_section = false;
  bool by_cluster = false;
  bool fallback = false;

  bool operator==(const KeptSentence&) const = default;
};

struct FilteredDocument {
  std::string class_id;
  FilterMode mode = FilterMode::no;
  // Document order.
  std::vector<KeptSentence> kept;

  bool used_fallback() const { return !kept.empty() && kept.front().fallback; }
  std::vector<std::string> sentence_ids() const;

  bool operator==(const FilteredDocument&) const = default;
};

using FilteredCorpus = std::map<std::string, FilteredDocument>;

// Labels are required for the vis_* modes; the cluster model for vis_clu and
// vis_sec_clu, and the labels must be bound to it. An empty selection falls
// back to the first paragraph, then to the whole document.
FilteredCorpus apply_filter(const Corpus& corpus, const TriageLabels* labels,
                            const ClusterModel* model, FilterMode mode);

// One document, without the fallback chain (empty result allowed).
FilteredDocument select_sentences(const Document& doc, const TriageLabels* labels,
                                  const ClusterModel* model, FilterMode mode);

struct ClassRetention {
  std::string class_id;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t by_section = 0;
  std::size_t by_cluster = 0;
  bool fallback = false;
  double retention() const { return total ? static_cast<double>(kept) / total : 0.0; }
};

struct FilterStats {
  FilterMode mode = FilterMode::no;
  std::vector<ClassRetention> per_class;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t by_section = 0;
  std::size_t by_cluster = 0;
  std::vector<std::string> fallback_classes;

  double retention() const { return total ? static_cast<double>(kept) / total : 0.0; }
  double mean_class_retention() const;
};

FilterStats filter_stats(const FilteredCorpus& filtered, const Corpus& corpus);
std::string filter_stats_json(const FilterStats& stats);

std::string serialize_filtered(const FilteredCorpus& filtered);
FilteredCorpus parse_filtered(const std::string& contents, const Corpus& corpus);
void save_filtered(const FilteredCorpus& filtered, const std::filesystem::path& path);
FilteredCorpus load_filtered(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace visex
