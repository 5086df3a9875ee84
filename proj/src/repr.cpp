#include "visex/repr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"
#include "visex/log.hpp"

namespace visex {

using nlohmann::json;

WeightNet make_weightnet(std::size_t dimension, const std::vector<std::size_t>& hidden,
                         std::uint64_t seed, double init_scale) {
  std::vector<std::size_t> widths{dimension};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  WeightNet net{Mlp(widths)};
  Rng rng(seed);
  net.mlp.init_random(rng, init_scale);
  return net;
}

std::string serialize_weightnet(const WeightNet& net) {
  json obj;
  obj["widths"] = net.mlp.widths();
  obj["scale_by_count"] = net.scale_by_count;
  const Vector p = net.mlp.parameters();
  obj["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
  return obj.dump() + "\n";
}

WeightNet parse_weightnet(const std::string& contents) {
  try {
    const json obj = json::parse(contents);
    WeightNet net{Mlp(obj.at("widths").get<std::vector<std::size_t>>())};
    if (net.mlp.output_width() != 1 || net.mlp.is_identity()) {
      throw ValidationError("weight net must end in a single output");
    }
    net.scale_by_count = obj.value("scale_by_count", true);
    const auto p = obj.at("parameters").get<std::vector<double>>();
    net.mlp.set_parameters(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
    return net;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed weight net checkpoint: ") + e.what());
  }
}

void save_weightnet(const WeightNet& net, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_weightnet(net));
}

WeightNet load_weightnet(const std::filesystem::path& path) {
  return parse_weightnet(io::read_file(path));
}

ClassSentences gather_sentences(const FilteredDocument& doc, const Corpus& corpus) {
  if (doc.kept.empty()) throw ValidationError("empty filtered document for class " + doc.class_id);
  ClassSentences out;
  out.class_id = doc.class_id;
  out.embeddings.resize(static_cast<Eigen::Index>(doc.kept.size()),
                        static_cast<Eigen::Index>(corpus.dimension()));
  for (std::size_t i = 0; i < doc.kept.size(); ++i) {
    const Sentence* s = corpus.find(doc.kept[i].sentence_id);
    if (!s) throw ValidationError("filtered sentence " + doc.kept[i].sentence_id + " not in corpus");
    out.sentence_ids.push_back(s->sentence_id);
    for (std::size_t j = 0; j < s->embedding.size(); ++j) {
      out.embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s->embedding[j];
    }
  }
  return out;
}

std::vector<ClassSentences> gather_sentences(const FilteredCorpus& filtered, const Corpus& corpus) {
  std::vector<ClassSentences> out;
  out.reserve(filtered.size());
  for (const auto& [cls, doc] : filtered) out.push_back(gather_sentences(doc, corpus));
  return out;
}

Vector average_vector(const Matrix& sentences) {
  if (sentences.rows() == 0) throw ValidationError("cannot average an empty document");
  return sentences.colwise().sum().transpose() / static_cast<double>(sentences.rows());
}

namespace {

void check_width(const WeightNet& net, const Matrix& sentences) {
  if (static_cast<std::size_t>(sentences.cols()) != net.input_width()) {
    throw ValidationError("dimension mismatch: weight net expects " +
                          std::to_string(net.input_width()) + ", sentences have " +
                          std::to_string(sentences.cols()));
  }
  if (sentences.rows() == 0) throw ValidationError("empty document");
}

Vector softmax(const Vector& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

double count_factor(const WeightNet& net, const Matrix& sentences) {
  return net.scale_by_count ? 1.0 / static_cast<double>(sentences.rows()) : 1.0;
}

struct WeightedForward {
  Mlp::Cache cache;
  Vector lambda;
  Vector repr;
};

WeightedForward weighted_forward(const WeightNet& net, const Matrix& sentences) {
  check_width(net, sentences);
  WeightedForward f;
  const Matrix logits = net.mlp.forward(sentences, &f.cache);
  f.lambda = softmax(logits.col(0));
  f.repr = count_factor(net, sentences) * (sentences.transpose() * f.lambda);
  return f;
}

void require_finite(double loss, const Vector& grad, const char* phase, std::size_t epoch,
                    std::size_t step) {
  if (std::isfinite(loss) && grad.allFinite()) return;
  std::ostringstream msg;
  msg << phase << ": non-finite " << (std::isfinite(loss) ? "gradient" : "loss") << " at epoch "
      << epoch << ", step " << step << " (loss=" << loss << ", |grad|=" << grad.norm() << ")";
  throw RuntimeError(msg.str());
}

}  // namespace

Vector softmax_weights(const WeightNet& net, const Matrix& sentences) {
  check_width(net, sentences);
  return softmax(net.mlp.forward(sentences).col(0));
}

Vector weighted_vector(const WeightNet& net, const Matrix& sentences) {
  return weighted_forward(net, sentences).repr;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

Vector cosine_gradient(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return Vector::Zero(a.size());
  const double c = a.dot(b) / (na * nb);
  return b / (na * nb) - (c / (na * na)) * a;
}

Representation average_repr(const FilteredDocument& doc, const Corpus& corpus) {
  const auto cs = gather_sentences(doc, corpus);
  const Vector v = average_vector(cs.embeddings);
  if (v.norm() == 0.0) log::warn("degenerate (zero) average representation for " + doc.class_id);
  return Representation{doc.class_id, std::vector<double>(v.data(), v.data() + v.size()),
                        ReprKind::average};
}

std::map<std::string, double> lambda_weights(const WeightNet& net, const FilteredDocument& doc,
                                             const Corpus& corpus) {
  const auto cs = gather_sentences(doc, corpus);
  const Vector lambda = softmax_weights(net, cs.embeddings);
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < cs.sentence_ids.size(); ++i) {
    out[cs.sentence_ids[i]] = lambda[static_cast<Eigen::Index>(i)];
  }
  return out;
}

Representation weighted_repr(const WeightNet& net, const FilteredDocument& doc,
                             const Corpus& corpus) {
  const auto cs = gather_sentences(doc, corpus);
  const Vector v = weighted_vector(net, cs.embeddings);
  if (v.norm() == 0.0) log::warn("degenerate (zero) weighted representation for " + doc.class_id);
  return Representation{doc.class_id, std::vector<double>(v.data(), v.data() + v.size()),
                        ReprKind::weighted};
}

void accumulate_weighted_gradient(const WeightNet& net, const Matrix& sentences,
                                  const Vector& d_repr, Eigen::Ref<Vector> grad) {
  const WeightedForward f = weighted_forward(net, sentences);
  // a = s * H^T lambda  =>  dL/dlambda_j = s * h_j . g
  const Vector u = count_factor(net, sentences) * (sentences * d_repr);
  const Vector d_logits = f.lambda.cwiseProduct((u.array() - f.lambda.dot(u)).matrix());
  net.mlp.backward(f.cache, Matrix(d_logits), grad);
}

Objective init_objective(const WeightNet& net, const std::vector<ClassSentences>& docs,
                         double epsilon, const std::vector<std::size_t>& classes) {
  Objective obj;
  obj.grad = Vector::Zero(static_cast<Eigen::Index>(net.mlp.parameter_count()));
  auto visit = [&](const ClassSentences& doc) {
    const Vector mean = average_vector(doc.embeddings);
    const WeightedForward f = weighted_forward(net, doc.embeddings);
    const double c = cosine(f.repr, mean);
    const double term = epsilon - c;
    if (term <= 0.0) return;
    obj.loss += term;
    accumulate_weighted_gradient(net, doc.embeddings, -cosine_gradient(f.repr, mean), obj.grad);
  };
  if (classes.empty()) {
    for (const auto& d : docs) visit(d);
  } else {
    for (auto i : classes) visit(docs.at(i));
  }
  return obj;
}

Objective margin_objective(const WeightNet& net, const std::vector<ClassSentences>& docs,
                           double tau,
                           const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  Objective obj;
  obj.grad = Vector::Zero(static_cast<Eigen::Index>(net.mlp.parameter_count()));
  const Eigen::Index d = static_cast<Eigen::Index>(net.input_width());

  std::vector<std::pair<std::size_t, std::size_t>> all;
  const auto* use = &pairs;
  if (pairs.empty()) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      for (std::size_t j = i + 1; j < docs.size(); ++j) all.emplace_back(i, j);
    }
    use = &all;
  }

  std::vector<Vector> reps(docs.size());
  std::vector<bool> have(docs.size(), false);
  auto rep = [&](std::size_t i) -> const Vector& {
    if (!have[i]) {
      reps[i] = weighted_vector(net, docs[i].embeddings);
      have[i] = true;
    }
    return reps[i];
  };

  std::vector<Vector> d_reps(docs.size());
  for (const auto& [i, j] : *use) {
    if (i == j) throw ValidationError("margin pair must join two distinct classes");
    const Vector& a = rep(i);
    const Vector& b = rep(j);
    const double c = cosine(a, b);
    if (c <= tau) continue;
    // (i, j) and (j, i) both appear in the ordered double sum.
    obj.loss += 2.0 * (c - tau);
    if (d_reps[i].size() == 0) d_reps[i] = Vector::Zero(d);
    if (d_reps[j].size() == 0) d_reps[j] = Vector::Zero(d);
    d_reps[i] += 2.0 * cosine_gradient(a, b);
    d_reps[j] += 2.0 * cosine_gradient(b, a);
  }
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (d_reps[i].size() == 0) continue;
    accumulate_weighted_gradient(net, docs[i].embeddings, d_reps[i], obj.grad);
  }
  return obj;
}

void ReprTrainConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in (0, 1]");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
  if (!(step_size > 0.0)) throw ValidationError("step size must be positive");
}

namespace {

bool all_above(const WeightNet& net, const std::vector<ClassSentences>& docs, double epsilon) {
  for (const auto& d : docs) {
    if (!(cosine(weighted_vector(net, d.embeddings), average_vector(d.embeddings)) > epsilon)) {
      return false;
    }
  }
  return true;
}

}  // namespace

WeightNet train_weightnet_init(WeightNet net, const std::vector<ClassSentences>& docs,
                               const ReprTrainConfig& config, ReprTrainLog* log) {
  config.validate();
  if (docs.empty()) throw ValidationError("no classes to train the weight net on");
  ReprTrainLog local;
  ReprTrainLog& out = log ? *log : local;
  Rng rng(config.seed);
  Vector params = net.mlp.parameters();
  Optimizer opt(config.optimizer, config.step_size, static_cast<std::size_t>(params.size()));

  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch =
      config.class_batch_size == 0 ? docs.size() : std::min(config.class_batch_size, docs.size());

  if (config.stop_when_satisfied && all_above(net, docs, config.epsilon)) {
    out.satisfied = true;
    out.epoch_loss.push_back(init_objective(net, docs, config.epsilon).loss);
    return net;
  }

  for (std::size_t epoch = 0; epoch < config.init_epochs; ++epoch) {
    if (batch < docs.size()) rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(
                                                             std::min(order.size(), start + batch)));
      const Objective obj = init_objective(net, docs, config.epsilon, idx);
      require_finite(obj.loss, obj.grad, "init phase", epoch, out.steps);
      if (obj.loss < 0.0) throw RuntimeError("init phase: negative loss");
      epoch_loss += obj.loss;
      opt.step(params, obj.grad);
      net.mlp.set_parameters(params);
      ++out.steps;
    }
    out.epoch_loss.push_back(epoch_loss);
    if (config.stop_when_satisfied && all_above(net, docs, config.epsilon)) {
      out.satisfied = true;
      break;
    }
  }
  if (!out.satisfied) out.satisfied = all_above(net, docs, config.epsilon);
  return net;
}

WeightNet train_weightnet_margin(WeightNet net, const std::vector<ClassSentences>& docs,
                                 const ReprTrainConfig& config, ReprTrainLog* log) {
  config.validate();
  if (docs.size() < 2) throw ValidationError("margin phase needs at least two classes");
  ReprTrainLog local;
  ReprTrainLog& out = log ? *log : local;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Vector params = net.mlp.parameters();
  Optimizer opt(config.optimizer, config.step_size, static_cast<std::size_t>(params.size()));

  const std::size_t n = docs.size();
  const std::size_t total_pairs = n * (n - 1) / 2;
  const bool full = config.pair_batch_size == 0 || config.pair_batch_size >= total_pairs;
  const std::size_t steps_per_epoch =
      full ? 1 : (total_pairs + config.pair_batch_size - 1) / config.pair_batch_size;

  for (std::size_t epoch = 0; epoch < config.margin_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      if (!full) {
        pairs.reserve(config.pair_batch_size);
        while (pairs.size() < config.pair_batch_size) {
          const auto i = static_cast<std::size_t>(rng.below(n));
          const auto j = static_cast<std::size_t>(rng.below(n));
          if (i == j) continue;
          pairs.emplace_back(std::min(i, j), std::max(i, j));
        }
      }
      const Objective obj = margin_objective(net, docs, config.tau, pairs);
      require_finite(obj.loss, obj.grad, "margin phase", epoch, out.steps);
      if (obj.loss < 0.0) throw RuntimeError("margin phase: negative loss");
      epoch_loss += obj.loss;
      if (full && obj.loss == 0.0 && config.stop_when_satisfied) {
        out.satisfied = true;
        break;
      }
      opt.step(params, obj.grad);
      net.mlp.set_parameters(params);
      ++out.steps;
    }
    out.epoch_loss.push_back(epoch_loss);
    if (out.satisfied) break;
    if (!full && config.stop_when_satisfied && margin_objective(net, docs, config.tau).loss == 0.0) {
      out.satisfied = true;
      break;
    }
  }
  if (!out.satisfied) out.satisfied = margin_objective(net, docs, config.tau).loss == 0.0;
  return net;
}

std::string to_string(BuildKind kind) {
  switch (kind) {
    case BuildKind::average: return "average";
    case BuildKind::weighted: return "weighted";
    case BuildKind::weighted_direct: return "weighted-direct";
  }
  return "average";
}

BuildKind build_kind_from_string(const std::string& s) {
  if (s == "average") return BuildKind::average;
  if (s == "weighted") return BuildKind::weighted;
  if (s == "weighted-direct" || s == "weighted_direct") return BuildKind::weighted_direct;
  throw ValidationError("unknown representation kind '" + s + "'");
}

RepresentationSet build_representations(const Corpus& corpus, const FilteredCorpus& filtered,
                                        BuildKind kind, const WeightNet* net) {
  if (kind != BuildKind::average && !net) throw ValidationError("weight network required");
  if (net && net->input_width() != corpus.dimension()) {
    throw ValidationError("dimension mismatch: weight net expects " +
                          std::to_string(net->input_width()) + ", corpus has " +
                          std::to_string(corpus.dimension()));
  }
  RepresentationSet out;
  for (const auto& [cls, doc] : filtered) {
    out.emplace(cls, kind == BuildKind::average ? average_repr(doc, corpus)
                                                : weighted_repr(*net, doc, corpus));
  }
  return out;
}

std::map<std::pair<std::string, std::string>, double> pairwise_cosines(const RepresentationSet& reps) {
  std::map<std::pair<std::string, std::string>, double> out;
  std::vector<std::pair<std::string, Vector>> v;
  for (const auto& [cls, r] : reps) {
    v.emplace_back(cls, Eigen::Map<const Vector>(r.vector.data(),
                                                 static_cast<Eigen::Index>(r.vector.size())));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      out[{v[i].first, v[j].first}] = cosine(v[i].second, v[j].second);
    }
  }
  return out;
}

}  // namespace visex
