#include "visex/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"

namespace visex {

using nlohmann::json;

namespace {

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw ValidationError(what + " at line " + std::to_string(line));
}

template <typename Fn>
void for_each_line(const std::string& contents, Fn&& fn) {
  std::istringstream in(contents);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_at(lineno, std::string("malformed record (") + e.what() + ")");
    }
    if (!obj.is_object()) fail_at(lineno, "malformed record (not an object)");
    fn(obj, lineno);
  }
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    fail_at(line, std::string("malformed record (missing string '") + key + "')");
  }
  auto s = it->get<std::string>();
  if (s.empty()) fail_at(line, std::string("malformed record (empty '") + key + "')");
  return s;
}

std::vector<double> require_vector(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_array() || it->empty()) {
    fail_at(line, std::string("malformed record (missing array '") + key + "')");
  }
  std::vector<double> v;
  v.reserve(it->size());
  for (const auto& x : *it) {
    if (!x.is_number()) fail_at(line, std::string("malformed record (non-numeric '") + key + "')");
    const double d = x.get<double>();
    if (!std::isfinite(d)) fail_at(line, std::string("non-finite value in '") + key + "'");
    v.push_back(d);
  }
  return v;
}

json vector_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

}  // namespace

// ---------------------------------------------------------------- Corpus

Corpus::Corpus(std::map<std::string, Document> documents, std::size_t dimension,
               std::map<std::string, std::string> metadata)
    : documents_(std::move(documents)), dimension_(dimension), metadata_(std::move(metadata)) {
  if (dimension_ == 0) throw ValidationError("corpus dimension must be positive");
  for (auto& [cls, doc] : documents_) {
    if (doc.class_id != cls) throw ValidationError("document key mismatch for class " + cls);
    if (doc.sentences.empty()) throw ValidationError("empty document for class " + cls);
    std::set<std::size_t> positions;
    for (const auto& s : doc.sentences) {
      if (s.class_id != cls) throw ValidationError("sentence " + s.sentence_id + " has wrong class");
      if (s.embedding.size() != dimension_) {
        throw ValidationError("dimension mismatch for sentence " + s.sentence_id);
      }
      for (double x : s.embedding) {
        if (!std::isfinite(x)) throw ValidationError("non-finite embedding in " + s.sentence_id);
      }
      if (!positions.insert(s.position).second) {
        throw ValidationError("duplicate position " + std::to_string(s.position) + " in class " + cls);
      }
    }
    std::stable_sort(doc.sentences.begin(), doc.sentences.end(),
                     [](const Sentence& a, const Sentence& b) { return a.position < b.position; });
  }
  build_index();
}

void Corpus::build_index() {
  index_.clear();
  for (const auto& [cls, doc] : documents_) {
    for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
      if (!index_.emplace(doc.sentences[i].sentence_id, std::make_pair(cls, i)).second) {
        throw ValidationError("duplicate sentence_id " + doc.sentences[i].sentence_id);
      }
    }
  }
}

const Document& Corpus::document(const std::string& class_id) const {
  auto it = documents_.find(class_id);
  if (it == documents_.end()) throw ValidationError("unknown class " + class_id);
  return it->second;
}

std::vector<std::string> Corpus::class_ids() const {
  std::vector<std::string> ids;
  ids.reserve(documents_.size());
  for (const auto& [cls, doc] : documents_) ids.push_back(cls);
  return ids;
}

const Sentence* Corpus::find(const std::string& sentence_id) const {
  auto it = index_.find(sentence_id);
  if (it == index_.end()) return nullptr;
  return &documents_.at(it->second.first).sentences[it->second.second];
}

bool Corpus::has_text() const {
  for (const auto& [cls, doc] : documents_) {
    for (const auto& s : doc.sentences) {
      if (s.text) return true;
    }
  }
  return false;
}

std::map<std::string, std::size_t> Corpus::section_histogram() const {
  std::map<std::string, std::size_t> hist;
  for (const auto& [cls, doc] : documents_) {
    for (const auto& s : doc.sentences) ++hist[s.section];
  }
  return hist;
}

std::vector<const Sentence*> Corpus::all_sentences() const {
  std::vector<const Sentence*> out;
  out.reserve(index_.size());
  for (const auto& [cls, doc] : documents_) {
    for (const auto& s : doc.sentences) out.push_back(&s);
  }
  return out;
}

Corpus parse_corpus(const std::string& contents) {
  std::map<std::string, Document> docs;
  std::map<std::string, std::string> metadata;
  std::set<std::string> ids;
  std::map<std::string, std::set<std::size_t>> positions;
  std::size_t dim = 0;
  bool any = false;

  for_each_line(contents, [&](const json& obj, std::size_t line) {
    if (!any && obj.size() == 1 && obj.contains("metadata")) {
      const auto& meta = obj["metadata"];
      if (!meta.is_object()) fail_at(line, "malformed metadata record");
      for (auto it = meta.begin(); it != meta.end(); ++it) {
        if (!it.value().is_string()) fail_at(line, "metadata values must be strings");
        metadata[it.key()] = it.value().get<std::string>();
      }
      any = true;
      return;
    }
    any = true;
    Sentence s;
    s.sentence_id = require_string(obj, "sentence_id", line);
    s.class_id = require_string(obj, "class_id", line);
    s.section = require_string(obj, "section", line);
    auto pos = obj.find("position");
    if (pos == obj.end() || !pos->is_number_integer() || pos->get<long long>() < 0) {
      fail_at(line, "malformed record (position must be a non-negative integer)");
    }
    s.position = pos->get<std::size_t>();
    if (auto t = obj.find("text"); t != obj.end() && !t->is_null()) {
      if (!t->is_string()) fail_at(line, "malformed record (text must be a string)");
      s.text = t->get<std::string>();
    }
    s.embedding = require_vector(obj, "embedding", line);
    if (dim == 0) dim = s.embedding.size();
    if (s.embedding.size() != dim) fail_at(line, "dimension mismatch");
    if (!ids.insert(s.sentence_id).second) fail_at(line, "duplicate sentence_id '" + s.sentence_id + "'");
    if (!positions[s.class_id].insert(s.position).second) {
      fail_at(line, "duplicate position within class '" + s.class_id + "'");
    }
    auto& doc = docs[s.class_id];
    doc.class_id = s.class_id;
    doc.sentences.push_back(std::move(s));
  });

  if (docs.empty()) throw ValidationError("empty corpus file");
  return Corpus(std::move(docs), dim, std::move(metadata));
}

Corpus ingest_corpus(const std::filesystem::path& path) {
  try {
    return parse_corpus(io::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  if (!corpus.metadata().empty()) {
    json meta = json::object();
    for (const auto& [k, v] : corpus.metadata()) meta[k] = v;
    out += json{{"metadata", meta}}.dump() + "\n";
  }
  for (const Sentence* s : corpus.all_sentences()) {
    json obj;
    obj["sentence_id"] = s->sentence_id;
    obj["class_id"] = s->class_id;
    obj["section"] = s->section;
    obj["position"] = s->position;
    if (s->text) obj["text"] = *s->text;
    obj["embedding"] = vector_json(s->embedding);
    out += obj.dump() + "\n";
  }
  return out;
}

void export_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_corpus(corpus));
}

// ---------------------------------------------------------------- split

std::string to_string(Hop hop) {
  switch (hop) {
    case Hop::two_hop: return "2-hop";
    case Hop::three_hop: return "3-hop";
    case Hop::all: return "all";
  }
  return "all";
}

Hop hop_from_string(const std::string& s) {
  if (s == "2-hop") return Hop::two_hop;
  if (s == "3-hop") return Hop::three_hop;
  if (s == "all") return Hop::all;
  throw ValidationError("unknown hop tag '" + s + "'");
}

std::vector<std::string> ClassSplit::all_classes() const {
  std::set<std::string> all(seen);
  all.insert(unseen.begin(), unseen.end());
  return {all.begin(), all.end()};
}

void ClassSplit::validate() const {
  for (const auto& c : seen) {
    if (unseen.count(c)) throw ValidationError("class '" + c + "' is both seen and unseen");
  }
  for (const auto& [c, hop] : hop_tags) {
    if (!contains(c)) throw ValidationError("hop-tagged class '" + c + "' is not in the split");
  }
}

ClassSplit parse_split(const std::string& contents) {
  json obj;
  try {
    obj = json::parse(contents);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed split file: ") + e.what());
  }
  ClassSplit split;
  auto read_set = [&](const char* key, std::set<std::string>& dst) {
    if (!obj.contains(key) || !obj[key].is_array()) {
      throw ValidationError(std::string("split file needs array '") + key + "'");
    }
    for (const auto& c : obj[key]) {
      if (!c.is_string()) throw ValidationError(std::string("non-string class in '") + key + "'");
      if (!dst.insert(c.get<std::string>()).second) {
        throw ValidationError("duplicate class '" + c.get<std::string>() + "' in split");
      }
    }
  };
  read_set("seen", split.seen);
  read_set("unseen", split.unseen);
  if (obj.contains("hops")) {
    if (!obj["hops"].is_object()) throw ValidationError("split 'hops' must be an object");
    for (auto it = obj["hops"].begin(); it != obj["hops"].end(); ++it) {
      if (!it.value().is_string()) throw ValidationError("hop tag must be a string");
      split.hop_tags[it.key()] = hop_from_string(it.value().get<std::string>());
    }
  }
  split.validate();
  return split;
}

ClassSplit ingest_split(const std::filesystem::path& path) {
  try {
    return parse_split(io::read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_split(const ClassSplit& split) {
  json obj;
  obj["seen"] = json(std::vector<std::string>(split.seen.begin(), split.seen.end()));
  obj["unseen"] = json(std::vector<std::string>(split.unseen.begin(), split.unseen.end()));
  if (!split.hop_tags.empty()) {
    json hops = json::object();
    for (const auto& [c, h] : split.hop_tags) hops[c] = to_string(h);
    obj["hops"] = hops;
  }
  return obj.dump(2) + "\n";
}

void export_split(const ClassSplit& split, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_split(split));
}

// ---------------------------------------------------------------- images

std::vector<ImageRecord> parse_images(const std::string& contents, const ClassSplit* split) {
  std::vector<ImageRecord> images;
  std::set<std::string> ids;
  std::size_t dim = 0;
  for_each_line(contents, [&](const json& obj, std::size_t line) {
    ImageRecord r;
    r.image_id = require_string(obj, "image_id", line);
    r.class_id = require_string(obj, "class_id", line);
    r.features = require_vector(obj, "features", line);
    if (dim == 0) dim = r.features.size();
    if (r.features.size() != dim) fail_at(line, "dimension mismatch");
    if (!ids.insert(r.image_id).second) fail_at(line, "duplicate image_id '" + r.image_id + "'");
    if (split && !split->contains(r.class_id)) fail_at(line, "unknown class '" + r.class_id + "'");
    images.push_back(std::move(r));
  });
  if (images.empty()) throw ValidationError("empty image file");
  return images;
}

std::vector<ImageRecord> ingest_images(const std::filesystem::path& path, const ClassSplit* split) {
  try {
    return parse_images(io::read_file(path), split);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_images(const std::vector<ImageRecord>& images) {
  std::string out;
  for (const auto& r : images) {
    json obj;
    obj["image_id"] = r.image_id;
    obj["class_id"] = r.class_id;
    obj["features"] = vector_json(r.features);
    out += obj.dump() + "\n";
  }
  return out;
}

void export_images(const std::vector<ImageRecord>& images, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_images(images));
}

// ---------------------------------------------------------------- representations

std::string to_string(ReprKind kind) {
  switch (kind) {
    case ReprKind::average: return "average";
    case ReprKind::weighted: return "weighted";
    case ReprKind::external: return "external";
  }
  return "average";
}

ReprKind repr_kind_from_string(const std::string& s) {
  if (s == "average") return ReprKind::average;
  if (s == "weighted") return ReprKind::weighted;
  if (s == "external") return ReprKind::external;
  throw ValidationError("unknown representation kind '" + s + "'");
}

RepresentationSet parse_representations(const std::string& contents, bool external_only,
                                        const std::set<std::string>& required_classes) {
  RepresentationSet reps;
  std::size_t dim = 0;
  for_each_line(contents, [&](const json& obj, std::size_t line) {
    Representation r;
    r.class_id = require_string(obj, "class_id", line);
    r.vector = require_vector(obj, "vector", line);
    if (external_only) {
      r.kind = ReprKind::external;
    } else {
      try {
        r.kind = repr_kind_from_string(require_string(obj, "kind", line));
      } catch (const ValidationError& e) {
        fail_at(line, e.what());
      }
    }
    if (dim == 0) dim = r.vector.size();
    if (r.vector.size() != dim) fail_at(line, "dimension mismatch");
    if (reps.count(r.class_id)) fail_at(line, "duplicate class '" + r.class_id + "'");
    reps.emplace(r.class_id, std::move(r));
  });
  if (reps.empty()) throw ValidationError("empty representation file");
  for (const auto& c : required_classes) {
    if (!reps.count(c)) throw ValidationError("missing representation for class '" + c + "'");
  }
  return reps;
}

RepresentationSet ingest_external_representations(const std::filesystem::path& path,
                                                  const std::set<std::string>& required_classes) {
  try {
    return parse_representations(io::read_file(path), true, required_classes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_representations(const RepresentationSet& reps) {
  std::string out;
  for (const auto& [cls, r] : reps) {
    json obj;
    obj["class_id"] = r.class_id;
    obj["kind"] = to_string(r.kind);
    obj["vector"] = vector_json(r.vector);
    out += obj.dump() + "\n";
  }
  return out;
}

void export_representations(const RepresentationSet& reps, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_representations(reps));
}

}  // namespace visex
