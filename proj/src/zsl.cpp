#include "visex/zsl.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/io.hpp"

namespace visex {

using nlohmann::json;

std::size_t DeviseModel::parameter_count() const {
  return f.parameter_count() + g.parameter_count() + static_cast<std::size_t>(M.size());
}

Vector DeviseModel::parameters() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  const auto nf = static_cast<Eigen::Index>(f.parameter_count());
  const auto ng = static_cast<Eigen::Index>(g.parameter_count());
  flat.head(nf) = f.parameters();
  flat.segment(nf, ng) = g.parameters();
  Eigen::Index o = nf + ng;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) flat[o++] = M(i, j);
  }
  return flat;
}

void DeviseModel::set_parameters(const Eigen::Ref<const Vector>& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ValidationError("DeViSE parameter vector has wrong length");
  }
  const auto nf = static_cast<Eigen::Index>(f.parameter_count());
  const auto ng = static_cast<Eigen::Index>(g.parameter_count());
  f.set_parameters(flat.head(nf));
  g.set_parameters(flat.segment(nf, ng));
  Eigen::Index o = nf + ng;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) = flat[o++];
  }
}

namespace {

// Adds x -> [relu(x), relu(-x)] -> x through the two hidden layers so the
// network starts close to the identity on its first min(in, out, hidden / 2) coordinates.
void add_identity_path(Mlp& net) {
  const auto in = static_cast<Eigen::Index>(net.input_width());
  const auto h = net.weight(0).rows();
  const auto out = static_cast<Eigen::Index>(net.output_width());
  const Eigen::Index n = std::min({in, out, h / 2});
  for (Eigen::Index i = 0; i < n; ++i) {
    net.weight(0)(i, i) += 1.0;
    net.weight(0)(n + i, i) -= 1.0;
    net.weight(1)(i, i) += 1.0;
    net.weight(1)(n + i, n + i) += 1.0;
    net.weight(2)(i, i) += 1.0;
    net.weight(2)(i, n + i) -= 1.0;
  }
}

}  // namespace

DeviseModel make_devise(std::size_t image_dim, std::size_t repr_dim, const DeviseArch& arch,
                        std::uint64_t seed) {
  if (image_dim == 0 || repr_dim == 0) throw ValidationError("DeViSE dimensions must be positive");
  if (arch.margin < 0.0) throw ValidationError("margin must be non-negative");
  Rng rng(seed);
  DeviseModel m;
  m.margin = arch.margin;
  if (!arch.mlp) {
    m.f = Mlp::identity(image_dim);
    m.g = Mlp::identity(repr_dim);
  } else {
    const std::size_t k = arch.latent ? arch.latent : std::min<std::size_t>(512, image_dim);
    const std::size_t h = arch.hidden ? arch.hidden : 2 * k;
    m.f = Mlp({image_dim, h, h, k});
    m.g = Mlp({repr_dim, h, h, k});
    m.f.init_random(rng, std::sqrt(2.0) * arch.init_scale);
    m.g.init_random(rng, std::sqrt(2.0) * arch.init_scale);
    if (arch.identity_init) {
      add_identity_path(m.f);
      add_identity_path(m.g);
    }
  }
  m.M = Matrix::Zero(static_cast<Eigen::Index>(m.f.output_width()),
                     static_cast<Eigen::Index>(m.g.output_width()));
  const double sd = arch.matrix_init_scale / std::sqrt(static_cast<double>(m.M.cols()));
  for (Eigen::Index i = 0; i < m.M.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.M.cols(); ++j) m.M(i, j) = sd * rng.normal();
  }
  return m;
}

std::string serialize_devise(const DeviseModel& model) {
  json obj;
  obj["f_widths"] = model.f.widths();
  obj["g_widths"] = model.g.widths();
  obj["m_shape"] = {model.M.rows(), model.M.cols()};
  obj["margin"] = model.margin;
  const Vector p = model.parameters();
  obj["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
  return obj.dump() + "\n";
}

DeviseModel parse_devise(const std::string& contents) {
  try {
    const json obj = json::parse(contents);
    DeviseModel m;
    m.f = Mlp(obj.at("f_widths").get<std::vector<std::size_t>>());
    m.g = Mlp(obj.at("g_widths").get<std::vector<std::size_t>>());
    const auto shape = obj.at("m_shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != m.f.output_width() || shape[1] != m.g.output_width()) {
      throw ValidationError("matrix shape incompatible with f and g");
    }
    m.M = Matrix::Zero(static_cast<Eigen::Index>(shape[0]), static_cast<Eigen::Index>(shape[1]));
    m.margin = obj.at("margin").get<double>();
    const auto p = obj.at("parameters").get<std::vector<double>>();
    m.set_parameters(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
    return m;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed DeViSE checkpoint: ") + e.what());
  }
}

void save_devise(const DeviseModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_devise(model));
}

DeviseModel load_devise(const std::filesystem::path& path) {
  return parse_devise(io::read_file(path));
}

namespace {

Matrix row_matrix(const std::vector<double>& v) {
  return Eigen::Map<const Matrix>(v.data(), 1, static_cast<Eigen::Index>(v.size()));
}

Matrix stack_features(const std::vector<ImageRecord>& images, std::size_t width) {
  Matrix x(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].features.size() != width) {
      throw ValidationError("dimension mismatch for image " + images[i].image_id);
    }
    for (std::size_t j = 0; j < width; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = images[i].features[j];
    }
  }
  return x;
}

}  // namespace

double score(const DeviseModel& model, const std::vector<double>& x, const Representation& a) {
  if (x.size() != model.image_width()) throw ValidationError("dimension mismatch for image features");
  if (a.vector.size() != model.repr_width()) {
    throw ValidationError("dimension mismatch for representation of " + a.class_id);
  }
  const Matrix fx = model.f.forward(row_matrix(x));
  const Matrix ga = model.g.forward(row_matrix(a.vector));
  return (fx * model.M * ga.transpose())(0, 0);
}

std::size_t ClassTable::index_of(const std::string& id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) throw ValidationError("missing representation for class '" + id + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

ClassTable make_class_table(const std::vector<std::string>& ids, const RepresentationSet& reps) {
  if (ids.empty()) throw ValidationError("empty candidate set");
  ClassTable t;
  t.ids = ids;
  std::sort(t.ids.begin(), t.ids.end());
  t.ids.erase(std::unique(t.ids.begin(), t.ids.end()), t.ids.end());
  std::size_t dim = 0;
  for (const auto& id : t.ids) {
    auto it = reps.find(id);
    if (it == reps.end()) throw ValidationError("missing representation for class '" + id + "'");
    if (dim == 0) dim = it->second.vector.size();
    if (it->second.vector.size() != dim) throw ValidationError("representation dimension mismatch");
  }
  t.reps.resize(static_cast<Eigen::Index>(t.ids.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    const auto& v = reps.at(t.ids[i]).vector;
    for (std::size_t j = 0; j < dim; ++j) {
      t.reps(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
  }
  return t;
}

DeviseObjective devise_objective(const DeviseModel& model, const Matrix& x,
                                 const std::vector<std::size_t>& labels, const ClassTable& classes,
                                 const std::vector<std::vector<std::size_t>>& negatives) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw ValidationError("label count does not match batch size");
  }
  if (!negatives.empty() && negatives.size() != labels.size()) {
    throw ValidationError("negative lists do not match batch size");
  }
  const auto n_classes = static_cast<std::size_t>(classes.reps.rows());
  Mlp::Cache fc;
  Mlp::Cache gc;
  const Matrix F = model.f.forward(x, &fc);
  const Matrix G = model.g.forward(classes.reps, &gc);
  const Matrix S = F * model.M * G.transpose();

  DeviseObjective out;
  Matrix dS = Matrix::Zero(S.rows(), S.cols());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto y = labels[n];
    if (y >= n_classes) throw ValidationError("label index out of range");
    const auto row = static_cast<Eigen::Index>(n);
    auto visit = [&](std::size_t c) {
      if (c == y) return;
      const double term = model.margin - S(row, static_cast<Eigen::Index>(y)) +
                          S(row, static_cast<Eigen::Index>(c));
      if (term <= 0.0) return;
      out.loss += term;
      dS(row, static_cast<Eigen::Index>(c)) += 1.0;
      dS(row, static_cast<Eigen::Index>(y)) -= 1.0;
    };
    if (negatives.empty() || negatives[n].empty()) {
      for (std::size_t c = 0; c < n_classes; ++c) visit(c);
    } else {
      for (auto c : negatives[n]) {
        if (c >= n_classes) throw ValidationError("negative index out of range");
        visit(c);
      }
    }
  }

  out.grad = Vector::Zero(static_cast<Eigen::Index>(model.parameter_count()));
  const auto nf = static_cast<Eigen::Index>(model.f.parameter_count());
  const auto ng = static_cast<Eigen::Index>(model.g.parameter_count());
  const Matrix dM = F.transpose() * dS * G;
  const Matrix dF = dS * G * model.M.transpose();
  const Matrix dG = dS.transpose() * F * model.M;
  model.f.backward(fc, dF, out.grad.head(nf));
  out.d_reps = model.g.backward(gc, dG, out.grad.segment(nf, ng));
  Eigen::Index o = nf + ng;
  for (Eigen::Index i = 0; i < dM.rows(); ++i) {
    for (Eigen::Index j = 0; j < dM.cols(); ++j) out.grad[o++] = dM(i, j);
  }
  return out;
}

double devise_loss(const DeviseModel& model, const std::vector<ImageRecord>& batch,
                   const RepresentationSet& reps, const std::vector<std::string>& negative_pool) {
  std::vector<std::string> ids = negative_pool;
  if (ids.empty()) {
    for (const auto& [cls, r] : reps) ids.push_back(cls);
  }
  for (const auto& img : batch) ids.push_back(img.class_id);
  const ClassTable table = make_class_table(ids, reps);
  std::vector<std::size_t> labels;
  for (const auto& img : batch) labels.push_back(table.index_of(img.class_id));
  std::vector<std::vector<std::size_t>> negs;
  if (!negative_pool.empty()) {
    std::vector<std::size_t> pool;
    for (const auto& c : negative_pool) pool.push_back(table.index_of(c));
    negs.assign(batch.size(), pool);
  }
  return devise_objective(model, stack_features(batch, model.image_width()), labels, table, negs)
      .loss;
}

void ZslTrainConfig::validate() const {
  if (margin < 0.0) throw ValidationError("margin must be non-negative");
  if (!(step_size > 0.0)) throw ValidationError("step size must be positive");
  if (batch_size == 0) throw ValidationError("batch size must be positive");
}

DeviseModel train_devise(DeviseModel model, const std::vector<ImageRecord>& images,
                         const RepresentationSet& reps, const ClassSplit& split,
                         const ZslTrainConfig& config, ZslTrainLog* log, JointWeighting* joint) {
  config.validate();
  if (split.seen.empty()) throw ValidationError("empty seen set");
  if (images.empty()) throw ValidationError("no training images");
  for (const auto& img : images) {
    if (!split.is_seen(img.class_id)) {
      throw ValidationError("training image " + img.image_id + " belongs to non-seen class '" +
                            img.class_id + "'");
    }
  }
  model.margin = config.margin;
  ZslTrainLog local;
  ZslTrainLog& out = log ? *log : local;

  const std::vector<std::string> seen(split.seen.begin(), split.seen.end());
  ClassTable table;
  std::vector<const ClassSentences*> docs;
  if (joint) {
    if (!joint->net || !joint->docs) throw ValidationError("joint training needs a net and documents");
    std::map<std::string, const ClassSentences*> by_id;
    for (const auto& d : *joint->docs) by_id[d.class_id] = &d;
    table.ids = seen;
    for (const auto& c : seen) {
      auto it = by_id.find(c);
      if (it == by_id.end()) throw ValidationError("no filtered document for seen class '" + c + "'");
      docs.push_back(it->second);
    }
    table.reps = Matrix::Zero(static_cast<Eigen::Index>(seen.size()),
                              static_cast<Eigen::Index>(joint->net->input_width()));
  } else {
    table = make_class_table(seen, reps);
  }
  if (static_cast<std::size_t>(table.reps.cols()) != model.repr_width()) {
    throw ValidationError("representation width does not match the model");
  }

  const Matrix x_all = stack_features(images, model.image_width());
  std::vector<std::size_t> labels_all;
  labels_all.reserve(images.size());
  for (const auto& img : images) labels_all.push_back(table.index_of(img.class_id));

  const auto n_model = static_cast<Eigen::Index>(model.parameter_count());
  const auto n_net = joint ? static_cast<Eigen::Index>(joint->net->mlp.parameter_count()) : 0;
  Vector params(n_model + n_net);
  params.head(n_model) = model.parameters();
  if (joint) params.tail(n_net) = joint->net->mlp.parameters();
  Optimizer opt(config.optimizer, config.step_size, static_cast<std::size_t>(params.size()));
  Rng rng(config.seed);

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n_classes = table.ids.size();
  const bool sample_negatives = config.negatives > 0 && config.negatives + 1 < n_classes;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto bs = static_cast<Eigen::Index>(end - start);
      Matrix xb(bs, x_all.cols());
      std::vector<std::size_t> yb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x_all.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = labels_all[order[i]];
      }
      std::vector<std::vector<std::size_t>> negs;
      if (sample_negatives) {
        negs.resize(yb.size());
        std::vector<std::size_t> pool(n_classes);
        for (std::size_t i = 0; i < yb.size(); ++i) {
          std::iota(pool.begin(), pool.end(), 0);
          std::swap(pool[yb[i]], pool.back());
          pool.pop_back();
          for (std::size_t k = 0; k < config.negatives; ++k) {
            const auto j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
            std::swap(pool[k], pool[j]);
          }
          negs[i].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.negatives));
          pool.push_back(0);
        }
      }
      if (joint) {
        for (std::size_t c = 0; c < n_classes; ++c) {
          table.reps.row(static_cast<Eigen::Index>(c)) =
              weighted_vector(*joint->net, docs[c]->embeddings).transpose();
        }
      }
      const DeviseObjective obj = devise_objective(model, xb, yb, table, negs);
      Vector grad(params.size());
      grad.head(n_model) = obj.grad;
      if (joint) {
        grad.tail(n_net).setZero();
        for (std::size_t c = 0; c < n_classes; ++c) {
          const Vector d = obj.d_reps.row(static_cast<Eigen::Index>(c)).transpose();
          if (d.isZero(0.0)) continue;
          accumulate_weighted_gradient(*joint->net, docs[c]->embeddings, d, grad.tail(n_net));
        }
      }
      if (!std::isfinite(obj.loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "alignment training: non-finite loss or gradient at epoch " << epoch << ", step "
            << out.steps << " (loss=" << obj.loss << ")";
        throw RuntimeError(msg.str());
      }
      epoch_loss += obj.loss;
      grad /= static_cast<double>(bs);
      opt.step(params, grad);
      model.set_parameters(params.head(n_model));
      if (joint) joint->net->mlp.set_parameters(params.tail(n_net));
      ++out.steps;
    }
    out.epoch_loss.push_back(epoch_loss / static_cast<double>(images.size()));
  }
  return model;
}

std::vector<std::string> predict_batch(const DeviseModel& model,
                                       const std::vector<ImageRecord>& images,
                                       const std::vector<std::string>& candidates,
                                       const RepresentationSet& reps) {
  if (candidates.empty()) throw ValidationError("empty candidate set");
  const ClassTable table = make_class_table(candidates, reps);
  if (static_cast<std::size_t>(table.reps.cols()) != model.repr_width()) {
    throw ValidationError("dimension mismatch between representations and model");
  }
  const Matrix G = model.g.forward(table.reps);
  const Matrix MG = model.M * G.transpose();
  std::vector<std::string> out;
  out.reserve(images.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t end = std::min(images.size(), start + kChunk);
    const std::vector<ImageRecord> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                         images.begin() + static_cast<std::ptrdiff_t>(end));
    const Matrix S = model.f.forward(stack_features(chunk, model.image_width())) * MG;
    for (Eigen::Index r = 0; r < S.rows(); ++r) {
      // ids are sorted, so keeping the first maximum applies the lexicographic tie rule.
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < S.cols(); ++c) {
        if (S(r, c) > S(r, best)) best = c;
      }
      out.push_back(table.ids[static_cast<std::size_t>(best)]);
    }
  }
  return out;
}

std::string predict(const DeviseModel& model, const std::vector<double>& x,
                    const std::vector<std::string>& candidates, const RepresentationSet& reps) {
  return predict_batch(model, {ImageRecord{"", "", x}}, candidates, reps).front();
}

}  // namespace visex
