#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace visex {

// Section label carried by sentences of a document's first paragraph.
inline constexpr const char* kSummarySection = "__summary__";

struct Sentence {
  std::string sentence_id;
  std::string class_id;
  std::string section;
  std::size_t position = 0;
  std::optional<std::string> text;
  std::vector<double> embedding;

  bool operator==(const Sentence&) const = default;
};

// Sentences of one class, ordered by position.
struct Document {
  std::string class_id;
  std::vector<Sentence> sentences;

  bool operator==(const Document&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::map<std::string, Document> documents, std::size_t dimension,
         std::map<std::string, std::string> metadata = {});

  const std::map<std::string, Document>& documents() const { return documents_; }
  std::size_t dimension() const { return dimension_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  const Document& document(const std::string& class_id) const;
  bool has_class(const std::string& class_id) const { return documents_.count(class_id) > 0; }
  std::vector<std::string> class_ids() const;

  // nullptr when absent.
  const Sentence* find(const std::string& sentence_id) const;

  std::size_t sentence_count() const { return index_.size(); }
  bool has_text() const;

  // Distinct section names with their sentence counts.
  std::map<std::string, std::size_t> section_histogram() const;

  // Every sentence in export order (class id, then position).
  std::vector<const Sentence*> all_sentences() const;

  bool operator==(const Corpus& other) const {
    return dimension_ == other.dimension_ && documents_ == other.documents_ &&
           metadata_ == other.metadata_;
  }

 private:
  void build_index();

  std::map<std::string, Document> documents_;
  std::size_t dimension_ = 0;
  std::map<std::string, std::string> metadata_;
  std::map<std::string, std::pair<std::string, std::size_t>> index_;
};

enum class Hop { two_hop, three_hop, all };

std::string to_string(Hop hop);
Hop hop_from_string(const std::string& s);

struct ClassSplit {
  std::set<std::string> seen;
  std::set<std::string> unseen;
  std::map<std::string, Hop> hop_tags;

  bool is_seen(const std::string& c) const { return seen.count(c) > 0; }
  bool is_unseen(const std::string& c) const { return unseen.count(c) > 0; }
  bool contains(const std::string& c) const { return is_seen(c) || is_unseen(c); }
  std::vector<std::string> all_classes() const;

  // Throws ValidationError on overlap or tags outside the split.
  void validate() const;
};

struct ImageRecord {
  std::string image_id;
  std::string class_id;
  std::vector<double> features;

  bool operator==(const ImageRecord&) const = default;
};

enum class ReprKind { average, weighted, external };

std::string to_string(ReprKind kind);
ReprKind repr_kind_from_string(const std::string& s);

struct Representation {
  std::string class_id;
  std::vector<double> vector;
  ReprKind kind = ReprKind::average;

  bool operator==(const Representation&) const = default;
};

using RepresentationSet = std::map<std::string, Representation>;

// JSONL corpus: one object per line with sentence_id, class_id, section, position,
// optional text, and embedding. An optional first line {"metadata": {...}} carries
// free-form string metadata.
Corpus ingest_corpus(const std::filesystem::path& path);
Corpus parse_corpus(const std::string& contents);
std::string serialize_corpus(const Corpus& corpus);
void export_corpus(const Corpus& corpus, const std::filesystem::path& path);

// When split is supplied, every record's class must belong to it.
std::vector<ImageRecord> ingest_images(const std::filesystem::path& path,
                                       const ClassSplit* split = nullptr);
std::vector<ImageRecord> parse_images(const std::string& contents,
                                      const ClassSplit* split = nullptr);
std::string serialize_images(const std::vector<ImageRecord>& images);
void export_images(const std::vector<ImageRecord>& images, const std::filesystem::path& path);

ClassSplit ingest_split(const std::filesystem::path& path);
ClassSplit parse_split(const std::string& contents);
std::string serialize_split(const ClassSplit& split);
void export_split(const ClassSplit& split, const std::filesystem::path& path);

// JSONL with class_id and vector per line. When required_classes is non-empty,
// each of them must be present.
RepresentationSet ingest_external_representations(
    const std::filesystem::path& path, const std::set<std::string>& required_classes = {});
RepresentationSet parse_representations(const std::string& contents, bool external_only,
                                        const std::set<std::string>& required_classes = {});
std::string serialize_representations(const RepresentationSet& reps);
void export_representations(const RepresentationSet& reps, const std::filesystem::path& path);

}  // namespace visex
