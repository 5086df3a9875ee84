#include "visex/fixture.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"
#include "visex/rng.hpp"

namespace visex {

using nlohmann::json;

namespace {

const std::vector<std::string> kVisualSections = {"Description", "Appearance", "Characteristics"};
const std::vector<std::string> kNonvisualSections = {"History", "Mythology", "Health",
                                                     "Terminology", "Distribution"};

std::string class_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%02zu", i);
  return buf;
}

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

std::vector<double> gaussian(Rng& rng, std::size_t d, double sd) {
  std::vector<double> v(d);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

std::vector<double> around(Rng& rng, const std::vector<double>& center, double sd) {
  std::vector<double> v(center);
  for (auto& x : v) x += sd * rng.normal();
  return v;
}

}  // namespace

void FixtureSpec::validate() const {
  if (classes < 2) throw ValidationError("fixture needs at least two classes");
  if (seen == 0 || seen >= classes) throw ValidationError("fixture needs 0 < seen < classes");
  if (sentences_per_class == 0) throw ValidationError("fixture needs sentences");
  if (!(visual_fraction > 0.0 && visual_fraction <= 1.0)) {
    throw ValidationError("visual fraction must lie in (0, 1]");
  }
  if (noise < 0.0 || nonvisual_spread < 0.0 || topic_scale < 0.0) throw ValidationError("noise levels must be non-negative");
  if (dimension == 0) throw ValidationError("fixture dimension must be positive");
  if (prototype_rank > dimension) throw ValidationError("prototype rank exceeds dimension");
  if (train_images_per_class == 0 || test_images_per_class == 0) {
    throw ValidationError("fixture needs train and test images per class");
  }
}

FixtureSpec standard_fixture_spec(std::uint64_t seed) {
  FixtureSpec s;
  s.seed = seed;
  return s;
}

Fixture generate_fixture(const FixtureSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Fixture fx;
  fx.spec = spec;

  const std::size_t d = spec.dimension;
  const std::vector<double> nonvisual_mean = gaussian(rng, d, 1.0);
  const auto n_visual = static_cast<std::size_t>(
      std::lround(spec.visual_fraction * static_cast<double>(spec.sentences_per_class)));
  if (n_visual == 0) throw ValidationError("visual fraction yields no visual sentences");

  const std::size_t rank = spec.prototype_rank == 0 ? d : spec.prototype_rank;
  std::vector<std::vector<double>> basis(rank);
  for (auto& b : basis) b = gaussian(rng, d, 1.0 / std::sqrt(static_cast<double>(rank)));

  std::map<std::string, Document> docs;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const std::string cls = class_name(c);
    std::vector<double> proto(d, 0.0);
    for (const auto& b : basis) {
      const double z = rng.normal();
      for (std::size_t j = 0; j < d; ++j) proto[j] += z * b[j];
    }
    // Equal prototype norms (sqrt(d)) keep bilinear scores comparable across classes.
    double norm = 0.0;
    for (double x : proto) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : proto) x *= std::sqrt(static_cast<double>(d)) / norm;
    fx.truth.prototypes[cls] = proto;
    // Class-specific non-visual topic (history, range, ...) unrelated to appearance.
    const std::vector<double> topic = around(rng, nonvisual_mean, spec.topic_scale);
    fx.truth.visual_per_class[cls] = n_visual;
    (c < spec.seen ? fx.split.seen : fx.split.unseen).insert(cls);

    // Sentence kinds in document order: the first paragraph holds two visual
    // sentences and one non-visual one; the rest are shuffled.
    std::vector<bool> kinds;
    std::size_t v_left = n_visual;
    std::size_t nv_left = spec.sentences_per_class - n_visual;
    const std::size_t summary_len = std::min<std::size_t>(3, spec.sentences_per_class);
    for (std::size_t i = 0; i < summary_len; ++i) {
      const bool want_visual = (i < 2 && v_left > 0) || nv_left == 0;
      kinds.push_back(want_visual);
      (want_visual ? v_left : nv_left)--;
    }
    std::vector<bool> rest(v_left, true);
    rest.insert(rest.end(), nv_left, false);
    rng.shuffle(rest.begin(), rest.end());
    kinds.insert(kinds.end(), rest.begin(), rest.end());

    Document doc;
    doc.class_id = cls;
    for (std::size_t pos = 0; pos < kinds.size(); ++pos) {
      Sentence s;
      s.sentence_id = cls + "/s" + padded(pos);
      s.class_id = cls;
      s.position = pos;
      const bool visual = kinds[pos];
      if (pos < summary_len) {
        s.section = kSummarySection;
      } else if (visual) {
        // Most visual sentences sit under visual headers; the rest are only
        // reachable through their cluster.
        s.section = rng.uniform() < 0.7 ? kVisualSections[rng.below(kVisualSections.size())]
                                        : kNonvisualSections[rng.below(kNonvisualSections.size())];
      } else {
        s.section = rng.uniform() < 0.1 ? kVisualSections[rng.below(kVisualSections.size())]
                                        : kNonvisualSections[rng.below(kNonvisualSections.size())];
      }
      if (visual) {
        s.embedding = around(rng, proto, spec.noise);
        s.text = "The " + cls + " shows visual trait " + std::to_string(pos) + ".";
        fx.truth.visual_sentences.insert(s.sentence_id);
      } else {
        s.embedding = around(rng, topic, spec.nonvisual_spread);
        s.text = rng.uniform() < 0.3 ? "Records mention the " + cls + " in passing (" +
                                           std::to_string(pos) + ")."
                                     : "A historical remark number " + std::to_string(pos) + ".";
      }
      doc.sentences.push_back(std::move(s));
    }
    docs.emplace(cls, std::move(doc));

    for (std::size_t i = 0; i < spec.train_images_per_class && c < spec.seen; ++i) {
      fx.train_images.push_back({cls + "/train" + padded(i), cls, around(rng, proto, spec.noise)});
    }
    if (c < spec.seen) fx.truth.train_images[cls] = spec.train_images_per_class;
    for (std::size_t i = 0; i < spec.test_images_per_class; ++i) {
      fx.test_images.push_back({cls + "/test" + padded(i), cls, around(rng, proto, spec.noise)});
    }
    fx.truth.test_images[cls] = spec.test_images_per_class;
  }

  // Unseen classes split into nested hop tiers by index: first third 2-hop,
  // second third 3-hop, remainder all.
  std::size_t i = 0;
  const std::size_t n_unseen = fx.split.unseen.size();
  for (const auto& cls : fx.split.unseen) {
    const Hop hop = i * 3 < n_unseen ? Hop::two_hop : (i * 3 < 2 * n_unseen ? Hop::three_hop : Hop::all);
    fx.split.hop_tags[cls] = hop;
    ++i;
  }

  fx.corpus = Corpus(std::move(docs), d, {{"generator", "visex-fixture"},
                                          {"seed", std::to_string(spec.seed)}});
  return fx;
}

std::string fixture_manifest_json(const Fixture& fx) {
  json obj;
  const auto& s = fx.spec;
  obj["spec"] = {{"classes", s.classes},
                 {"seen", s.seen},
                 {"sentences_per_class", s.sentences_per_class},
                 {"visual_fraction", s.visual_fraction},
                 {"noise", s.noise},
                 {"nonvisual_spread", s.nonvisual_spread},
                 {"topic_scale", s.topic_scale},
                 {"dimension", s.dimension},
                 {"prototype_rank", s.prototype_rank},
                 {"train_images_per_class", s.train_images_per_class},
                 {"test_images_per_class", s.test_images_per_class},
                 {"seed", s.seed}};
  obj["visual_sentences"] = std::vector<std::string>(fx.truth.visual_sentences.begin(),
                                                     fx.truth.visual_sentences.end());
  obj["visual_per_class"] = fx.truth.visual_per_class;
  obj["train_images"] = fx.truth.train_images;
  obj["test_images"] = fx.truth.test_images;
  obj["prototypes"] = fx.truth.prototypes;
  std::map<std::string, std::size_t> hops;
  for (const auto& [cls, hop] : fx.split.hop_tags) ++hops[to_string(hop)];
  obj["hop_counts"] = hops;
  obj["sentences"] = fx.corpus.sentence_count();
  return obj.dump(2) + "\n";
}

FixtureFiles write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  FixtureFiles f{dir / "corpus.jsonl", dir / "images_train.jsonl", dir / "images_test.jsonl",
                 dir / "split.json", dir / "fixture_manifest.json"};
  export_corpus(fx.corpus, f.corpus);
  export_images(fx.train_images, f.train_images);
  export_images(fx.test_images, f.test_images);
  export_split(fx.split, f.split);
  io::write_file_atomic(f.manifest, fixture_manifest_json(fx));
  return f;
}

FixtureTruth load_fixture_truth(const std::filesystem::path& manifest) {
  try {
    const json obj = json::parse(io::read_file(manifest));
    FixtureTruth t;
    for (const auto& s : obj.at("visual_sentences")) t.visual_sentences.insert(s.get<std::string>());
    t.prototypes = obj.at("prototypes").get<std::map<std::string, std::vector<double>>>();
    t.train_images = obj.at("train_images").get<std::map<std::string, std::size_t>>();
    t.test_images = obj.at("test_images").get<std::map<std::string, std::size_t>>();
    t.visual_per_class = obj.at("visual_per_class").get<std::map<std::string, std::size_t>>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed fixture manifest: ") + e.what());
  }
}

TriageLabels oracle_labels(const Corpus& corpus, const FixtureTruth& truth,
                           const ClusterModel* model) {
  TriageLabels labels = make_labels(corpus, model);
  std::map<std::string, std::pair<std::size_t, std::size_t>> sec;  // visual, total
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> clu;
  for (const Sentence* s : corpus.all_sentences()) {
    const bool visual = truth.visual_sentences.count(s->sentence_id) > 0;
    auto& a = sec[s->section];
    a.first += visual;
    ++a.second;
    if (model) {
      auto& b = clu[model->assignment.at(s->sentence_id)];
      b.first += visual;
      ++b.second;
    }
  }
  for (const auto& [name, vt] : sec) {
    if (name == kSummarySection) continue;
    labels.sections[name] = 2 * vt.first > vt.second ? Verdict::visual : Verdict::nonvisual;
  }
  if (model) {
    for (std::size_t k = 0; k < model->k; ++k) {
      auto it = clu.find(k);
      if (it == clu.end()) continue;
      labels.clusters[k] = 2 * it->second.first > it->second.second ? Verdict::visual : Verdict::nonvisual;
    }
  }
  labels.revision = 1;
  return labels;
}

double visual_cluster_purity(const ClusterModel& model, const Corpus& corpus,
                             const FixtureTruth& truth) {
  std::map<std::size_t, std::map<std::string, std::size_t>> counts;
  std::size_t total = 0;
  for (const Sentence* s : corpus.all_sentences()) {
    if (!truth.visual_sentences.count(s->sentence_id)) continue;
    ++counts[model.assignment.at(s->sentence_id)][s->class_id];
    ++total;
  }
  if (total == 0) return 0.0;
  std::size_t majority = 0;
  for (const auto& [k, per_class] : counts) {
    std::size_t best = 0;
    for (const auto& [cls, n] : per_class) best = std::max(best, n);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(total);
}

}  // namespace visex
