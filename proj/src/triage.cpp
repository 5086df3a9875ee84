#include "visex/triage.hpp"

#include <atomic>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"

namespace visex {

using nlohmann::json;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::visual: return "visual";
    case Verdict::nonvisual: return "nonvisual";
    case Verdict::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "visual") return Verdict::visual;
  if (s == "nonvisual") return Verdict::nonvisual;
  if (s == "unlabeled") return Verdict::unlabeled;
  throw ValidationError("unknown verdict '" + s + "'");
}

Verdict TriageLabels::section(const std::string& name) const {
  auto it = sections.find(name);
  return it == sections.end() ? Verdict::unlabeled : it->second;
}

Verdict TriageLabels::cluster(std::size_t index) const {
  auto it = clusters.find(index);
  return it == clusters.end() ? Verdict::unlabeled : it->second;
}

std::set<std::string> TriageLabels::visual_sections() const {
  std::set<std::string> out;
  for (const auto& [name, v] : sections) {
    if (v == Verdict::visual) out.insert(name);
  }
  return out;
}

std::set<std::size_t> TriageLabels::visual_clusters() const {
  std::set<std::size_t> out;
  for (const auto& [i, v] : clusters) {
    if (v == Verdict::visual) out.insert(i);
  }
  return out;
}

std::size_t TriageLabels::count(Verdict v) const {
  std::size_t n = 0;
  for (const auto& [name, x] : sections) n += (x == v);
  for (const auto& [i, x] : clusters) n += (x == v);
  return n;
}

TriageLabels make_labels(const Corpus& corpus, const ClusterModel* model) {
  TriageLabels labels;
  for (const auto& [name, count] : corpus.section_histogram()) {
    labels.sections[name] = Verdict::unlabeled;
  }
  if (model) {
    labels.cluster_model_id = model->model_id();
    labels.cluster_count = model->k;
    for (std::size_t i = 0; i < model->k; ++i) labels.clusters[i] = Verdict::unlabeled;
  }
  return labels;
}

TriageLabels bind_labels(TriageLabels labels, const ClusterModel& model) {
  const std::string id = model.model_id();
  if (labels.cluster_model_id == id && labels.cluster_count == model.k) return labels;
  labels.cluster_model_id = id;
  labels.cluster_count = model.k;
  labels.clusters.clear();
  for (std::size_t i = 0; i < model.k; ++i) labels.clusters[i] = Verdict::unlabeled;
  ++labels.revision;
  return labels;
}

TriageLabels label_section(TriageLabels labels, const Corpus& corpus, const std::string& section,
                           Verdict verdict) {
  const auto hist = corpus.section_histogram();
  if (!hist.count(section)) throw ValidationError("unknown section '" + section + "'");
  labels.sections[section] = verdict;
  ++labels.revision;
  return labels;
}

TriageLabels label_cluster(TriageLabels labels, std::size_t cluster_index, Verdict verdict) {
  if (labels.cluster_model_id.empty()) {
    throw ValidationError("labels are not bound to a cluster model");
  }
  if (cluster_index >= labels.cluster_count) {
    throw ValidationError("cluster index out of range: " + std::to_string(cluster_index) +
                          " (K=" + std::to_string(labels.cluster_count) + ")");
  }
  labels.clusters[cluster_index] = verdict;
  ++labels.revision;
  return labels;
}

std::string serialize_labels(const TriageLabels& labels) {
  json obj;
  obj["revision"] = labels.revision;
  obj["cluster_model_id"] = labels.cluster_model_id;
  obj["cluster_count"] = labels.cluster_count;
  json sections = json::object();
  for (const auto& [name, v] : labels.sections) sections[name] = to_string(v);
  json clusters = json::object();
  for (const auto& [i, v] : labels.clusters) clusters[std::to_string(i)] = to_string(v);
  obj["sections"] = sections;
  obj["clusters"] = clusters;
  return obj.dump(2) + "\n";
}

TriageLabels parse_labels(const std::string& contents) {
  try {
    const json obj = json::parse(contents);
    TriageLabels labels;
    labels.revision = obj.value("revision", std::uint64_t{0});
    labels.cluster_model_id = obj.value("cluster_model_id", std::string{});
    labels.cluster_count = obj.value("cluster_count", std::size_t{0});
    if (obj.contains("sections")) {
      for (auto it = obj["sections"].begin(); it != obj["sections"].end(); ++it) {
        labels.sections[it.key()] = verdict_from_string(it.value().get<std::string>());
      }
    }
    if (obj.contains("clusters")) {
      for (auto it = obj["clusters"].begin(); it != obj["clusters"].end(); ++it) {
        std::size_t idx = 0;
        try {
          idx = std::stoul(it.key());
        } catch (const std::exception&) {
          throw ValidationError("cluster key '" + it.key() + "' is not an index");
        }
        if (idx >= labels.cluster_count) {
          throw ValidationError("cluster index out of range: " + it.key());
        }
        labels.clusters[idx] = verdict_from_string(it.value().get<std::string>());
      }
    }
    return labels;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed labels file: ") + e.what());
  }
}

void save_labels(const TriageLabels& labels, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_labels(labels));
}

TriageLabels load_labels(const std::filesystem::path& path) {
  return parse_labels(io::read_file(path));
}

// ---------------------------------------------------------------- LabelStore

LabelStore::LabelStore(TriageLabels initial, std::filesystem::path path)
    : path_(std::move(path)), current_(std::make_shared<const TriageLabels>(std::move(initial))) {
  if (!path_.empty()) save_labels(*current_, path_);
}

std::shared_ptr<const TriageLabels> LabelStore::snapshot() const {
  return std::atomic_load(&current_);
}

std::shared_ptr<const TriageLabels> LabelStore::update(
    const std::function<TriageLabels(const TriageLabels&)>& fn) {
  std::lock_guard<std::mutex> lock(write_mutex_);
  const auto before = std::atomic_load(&current_);
  auto next = std::make_shared<const TriageLabels>(fn(*before));
  if (next->revision <= before->revision) {
    throw RuntimeError("label mutation did not advance the revision");
  }
  if (!path_.empty()) save_labels(*next, path_);
  std::atomic_store(&current_, next);
  return next;
}

}  // namespace visex
