#include "visex/filter.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"
#include "visex/log.hpp"

namespace visex {

using nlohmann::json;

std::string to_string(FilterMode mode) {
  switch (mode) {
    case FilterMode::no: return "no";
    case FilterMode::vis_sec: return "vis-sec";
    case FilterMode::vis_clu: return "vis-clu";
    case FilterMode::vis_sec_clu: return "vis-sec-clu";
    case FilterMode::par_1st: return "par-1st";
    case FilterMode::cls_name: return "cls-name";
  }
  return "no";
}

FilterMode filter_mode_from_string(const std::string& s) {
  for (auto m : {FilterMode::no, FilterMode::vis_sec, FilterMode::vis_clu, FilterMode::vis_sec_clu,
                 FilterMode::par_1st, FilterMode::cls_name}) {
    if (s == to_string(m)) return m;
  }
  throw ValidationError("unknown filter mode '" + s + "'");
}

bool uses_sections(FilterMode mode) {
  return mode == FilterMode::vis_sec || mode == FilterMode::vis_sec_clu;
}

bool uses_clusters(FilterMode mode) {
  return mode == FilterMode::vis_clu || mode == FilterMode::vis_sec_clu;
}

std::vector<std::string> FilteredDocument::sentence_ids() const {
  std::vector<std::string> ids;
  ids.reserve(kept.size());
  for (const auto& k : kept) ids.push_back(k.sentence_id);
  return ids;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

FilteredDocument select_sentences(const Document& doc, const TriageLabels* labels,
                                  const ClusterModel* model, FilterMode mode) {
  FilteredDocument out;
  out.class_id = doc.class_id;
  out.mode = mode;
  const std::string needle = lower(doc.class_id);

  for (const auto& s : doc.sentences) {
    KeptSentence k{s.sentence_id};
    bool keep = false;
    switch (mode) {
      case FilterMode::no:
        keep = true;
        break;
      case FilterMode::par_1st:
        keep = k.by_section = (s.section == kSummarySection);
        break;
      case FilterMode::cls_name:
        keep = s.text && lower(*s.text).find(needle) != std::string::npos;
        break;
      case FilterMode::vis_sec:
      case FilterMode::vis_clu:
      case FilterMode::vis_sec_clu:
        if (uses_sections(mode)) {
          k.by_section = s.section == kSummarySection || labels->section(s.section) == Verdict::visual;
        }
        if (uses_clusters(mode)) {
          auto it = model->assignment.find(s.sentence_id);
          if (it == model->assignment.end()) {
            throw ValidationError("sentence " + s.sentence_id + " has no cluster assignment");
          }
          k.by_cluster = labels->cluster(it->second) == Verdict::visual;
        }
        keep = k.by_section || k.by_cluster;
        break;
    }
    if (keep) out.kept.push_back(std::move(k));
  }
  return out;
}

FilteredCorpus apply_filter(const Corpus& corpus, const TriageLabels* labels,
                            const ClusterModel* model, FilterMode mode) {
  if (uses_sections(mode) || uses_clusters(mode)) {
    if (!labels) throw ValidationError("triage labels required for mode " + to_string(mode));
  }
  if (uses_clusters(mode)) {
    if (!model) throw ValidationError("cluster model required for mode " + to_string(mode));
    if (labels->cluster_model_id != model->model_id()) {
      throw ValidationError("triage labels are bound to cluster model '" +
                            labels->cluster_model_id + "', not '" + model->model_id() + "'");
    }
  }
  if (mode == FilterMode::cls_name && !corpus.has_text()) {
    throw ValidationError("cls-name mode needs sentence text, but the corpus has none");
  }
  if ((uses_sections(mode) || uses_clusters(mode)) && labels->count(Verdict::visual) == 0) {
    log::warn("no visual labels in triage; " + to_string(mode) + " will rely on fallback");
  }

  FilteredCorpus out;
  std::size_t fallback_count = 0;
  for (const auto& [cls, doc] : corpus.documents()) {
    FilteredDocument fd = select_sentences(doc, labels, model, mode);
    if (fd.kept.empty()) {
      ++fallback_count;
      for (const auto& s : doc.sentences) {
        if (s.section == kSummarySection) fd.kept.push_back({s.sentence_id, false, false, true});
      }
      if (fd.kept.empty()) {
        for (const auto& s : doc.sentences) fd.kept.push_back({s.sentence_id, false, false, true});
      }
    }
    out.emplace(cls, std::move(fd));
  }
  if (fallback_count > 0) {
    log::warn(std::to_string(fallback_count) + " of " + std::to_string(out.size()) +
              " classes fell back under mode " + to_string(mode));
  }
  return out;
}

double FilterStats::mean_class_retention() const {
  if (per_class.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : per_class) s += c.retention();
  return s / static_cast<double>(per_class.size());
}

FilterStats filter_stats(const FilteredCorpus& filtered, const Corpus& corpus) {
  FilterStats stats;
  if (!filtered.empty()) stats.mode = filtered.begin()->second.mode;
  for (const auto& [cls, fd] : filtered) {
    ClassRetention r;
    r.class_id = cls;
    r.total = corpus.document(cls).sentences.size();
    r.kept = fd.kept.size();
    for (const auto& k : fd.kept) {
      r.by_section += k.by_section;
      r.by_cluster += k.by_cluster;
    }
    r.fallback = fd.used_fallback();
    stats.total += r.total;
    stats.kept += r.kept;
    stats.by_section += r.by_section;
    stats.by_cluster += r.by_cluster;
    if (r.fallback) stats.fallback_classes.push_back(cls);
    stats.per_class.push_back(std::move(r));
  }
  return stats;
}

std::string filter_stats_json(const FilterStats& stats) {
  json obj;
  obj["mode"] = to_string(stats.mode);
  obj["total"] = stats.total;
  obj["kept"] = stats.kept;
  obj["retention"] = stats.retention();
  obj["mean_class_retention"] = stats.mean_class_retention();
  obj["by_section"] = stats.by_section;
  obj["by_cluster"] = stats.by_cluster;
  obj["fallback_classes"] = stats.fallback_classes;
  json per = json::array();
  for (const auto& c : stats.per_class) {
    per.push_back({{"class_id", c.class_id},
                   {"total", c.total},
                   {"kept", c.kept},
                   {"retention", c.retention()},
                   {"by_section", c.by_section},
                   {"by_cluster", c.by_cluster},
                   {"fallback", c.fallback}});
  }
  obj["per_class"] = per;
  return obj.dump(2) + "\n";
}

std::string serialize_filtered(const FilteredCorpus& filtered) {
  std::string out;
  for (const auto& [cls, fd] : filtered) {
    for (const auto& k : fd.kept) {
      json prov = json::array();
      if (k.by_section) prov.push_back("section");
      if (k.by_cluster) prov.push_back("cluster");
      if (k.fallback) prov.push_back("fallback");
      json obj;
      obj["class_id"] = cls;
      obj["sentence_id"] = k.sentence_id;
      obj["provenance"] = prov;
      obj["mode"] = to_string(fd.mode);
      out += obj.dump() + "\n";
    }
  }
  return out;
}

FilteredCorpus parse_filtered(const std::string& contents, const Corpus& corpus) {
  FilteredCorpus out;
  std::set<std::string> seen_ids;
  std::istringstream in(contents);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = " at line " + std::to_string(lineno);
    try {
      const json obj = json::parse(line);
      const auto cls = obj.at("class_id").get<std::string>();
      KeptSentence k{obj.at("sentence_id").get<std::string>()};
      for (const auto& p : obj.at("provenance")) {
        const auto tag = p.get<std::string>();
        if (tag == "section") k.by_section = true;
        else if (tag == "cluster") k.by_cluster = true;
        else if (tag == "fallback") k.fallback = true;
        else throw ValidationError("unknown provenance '" + tag + "'" + where);
      }
      const Sentence* s = corpus.find(k.sentence_id);
      if (!s || s->class_id != cls) {
        throw ValidationError("sentence " + k.sentence_id + " not in class " + cls + where);
      }
      if (!seen_ids.insert(k.sentence_id).second) {
        throw ValidationError("duplicate sentence " + k.sentence_id + where);
      }
      auto& fd = out[cls];
      fd.class_id = cls;
      fd.mode = filter_mode_from_string(obj.at("mode").get<std::string>());
      fd.kept.push_back(std::move(k));
    } catch (const json::exception& e) {
      throw ValidationError(std::string("malformed filtered record") + where + ": " + e.what());
    }
  }
  return out;
}

void save_filtered(const FilteredCorpus& filtered, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_filtered(filtered));
}

FilteredCorpus load_filtered(const std::filesystem::path& path, const Corpus& corpus) {
  return parse_filtered(io::read_file(path), corpus);
}

}  // namespace visex
