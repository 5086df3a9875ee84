// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "visex/cluster.hpp"
#include "visex/eval.hpp"
#include "visex/filter.hpp"
#include "visex/fixture.hpp"
#include "visex/io.hpp"
#include "visex/log.hpp"
#include "visex/pipeline.hpp"
#include "visex/repr.hpp"
#include "visex/triage.hpp"
#include "visex/zsl.hpp"

using namespace visex;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: ";
      else detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Vector random_vector(Rng& rng, std::size_t n, double sd = 1.0) {
  Vector v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double sd = 1.0) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (auto& x : m.reshaped()) x = sd * rng.normal();
  return m;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x) {
  const double h = 1e-5;
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale < 1e-12 ? 0.0 : (a - b).norm() / scale;
}

void randomize_biases(Mlp& net, Rng& rng) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    for (auto& b : net.bias(l)) b = 0.5 * rng.normal();
  }
}

std::vector<ClassSentences> random_docs(Rng& rng, std::size_t classes, std::size_t d) {
  std::vector<ClassSentences> docs;
  for (std::size_t c = 0; c < classes; ++c) {
    ClassSentences cs;
    cs.class_id = "c" + std::to_string(c);
    const std::size_t n = 2 + rng.below(4);
    cs.embeddings = random_matrix(rng, n, d);
    for (std::size_t i = 0; i < n; ++i) cs.sentence_ids.push_back(cs.class_id + "/" + std::to_string(i));
    docs.push_back(std::move(cs));
  }
  return docs;
}

// Ranking-loss gradient on random DeViSE and DeViSE* models, then the two weight
// net objectives on random documents. Thresholds alternate between "every hinge
// active" and a value inside the cosine range, resampling fixtures that land
// within 1e-3 of a hinge kink.
Outcome criterion_gradients() {
  Outcome out;
  const auto t0 = Clock::now();
  double worst_align = 0.0, worst_init = 0.0, worst_margin = 0.0;
  std::size_t n_align = 0, n_init = 0, n_margin = 0;

  Rng rng(2024);
  for (std::uint64_t seed = 1; n_align < 24; ++seed) {
    const bool star = seed % 2 == 0;
    DeviseArch arch;
    arch.mlp = star;
    arch.latent = 3;
    arch.hidden = 5;
    arch.identity_init = false;
    arch.init_scale = 1.0;
    arch.matrix_init_scale = 1.0;
    DeviseModel m = make_devise(5, 4, arch, seed);
    randomize_biases(m.f, rng);
    randomize_biases(m.g, rng);
    m.margin = seed % 4 < 2 ? 5.0 : 0.2;

    RepresentationSet reps;
    std::vector<std::string> ids;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::string id = "k" + std::to_string(c);
      const Vector v = random_vector(rng, 4);
      reps[id] = Representation{id, std::vector<double>(v.begin(), v.end()), ReprKind::average};
      ids.push_back(id);
    }
    const ClassTable table = make_class_table(ids, reps);
    const Matrix x = random_matrix(rng, 4, 5);
    std::vector<std::size_t> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(rng.below(3));

    bool near_kink = false;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const std::vector<double> xi(x.row(i).begin(), x.row(i).end());
      const double own = score(m, xi, reps.at(ids[labels[i]]));
      for (std::size_t c = 0; c < ids.size(); ++c) {
        if (c != labels[i] && std::abs(m.margin - own + score(m, xi, reps.at(ids[c]))) < 1e-3) near_kink = true;
      }
    }
    if (near_kink) continue;

    const DeviseObjective o = devise_objective(m, x, labels, table);
    const Vector num = central_difference(
        [&](const Vector& p) {
          DeviseModel probe = m;
          probe.set_parameters(p);
          return devise_objective(probe, x, labels, table).loss;
        },
        m.parameters());
    worst_align = std::max(worst_align, relative_error(o.grad, num));
    ++n_align;
  }

  for (std::uint64_t seed = 1; n_init < 24 || n_margin < 24; ++seed) {
    const std::size_t d = 3 + rng.below(3);
    const auto docs = random_docs(rng, 2 + rng.below(3), d);
    WeightNet net = make_weightnet(d, {6, 6}, seed, 1.0);
    randomize_biases(net.mlp, rng);

    std::vector<double> own, pair;
    for (const auto& doc : docs) own.push_back(cosine(weighted_vector(net, doc.embeddings), average_vector(doc.embeddings)));
    for (std::size_t i = 0; i < docs.size(); ++i) {
      for (std::size_t j = i + 1; j < docs.size(); ++j) {
        pair.push_back(cosine(weighted_vector(net, docs[i].embeddings), weighted_vector(net, docs[j].embeddings)));
      }
    }
    auto clear_of = [](const std::vector<double>& values, double threshold) {
      for (double v : values) {
        if (std::abs(v - threshold) < 1e-3) return false;
      }
      return true;
    };

    const double epsilon = seed % 2 ? 2.0 : 0.9 + 0.09 * rng.uniform();
    if (n_init < 24 && clear_of(own, epsilon)) {
      const Objective o = init_objective(net, docs, epsilon);
      const Vector num = central_difference(
          [&](const Vector& p) {
            WeightNet probe = net;
            probe.mlp.set_parameters(p);
            return init_objective(probe, docs, epsilon).loss;
          },
          net.mlp.parameters());
      worst_init = std::max(worst_init, relative_error(o.grad, num));
      ++n_init;
    }
    const double tau = seed % 2 ? -2.0 : 2.0 * rng.uniform() - 1.0;
    if (n_margin < 24 && clear_of(pair, tau)) {
      const Objective o = margin_objective(net, docs, tau);
      const Vector num = central_difference(
          [&](const Vector& p) {
            WeightNet probe = net;
            probe.mlp.set_parameters(p);
            return margin_objective(probe, docs, tau).loss;
          },
          net.mlp.parameters());
      worst_margin = std::max(worst_margin, relative_error(o.grad, num));
      ++n_margin;
    }
  }

  const double secs = seconds_since(t0);
  out.require(worst_align <= 1e-4, "alignment gradient error " + std::to_string(worst_align));
  out.require(worst_init <= 1e-4, "init-phase gradient error " + std::to_string(worst_init));
  out.require(worst_margin <= 1e-4, "margin-phase gradient error " + std::to_string(worst_margin));
  out.require(secs < 30.0, "runtime " + std::to_string(secs) + " s");
  out.detail << (out.pass ? "" : "; ") << n_align << "/" << n_init << "/" << n_margin
             << " fixtures, worst relative error " << worst_align << " / " << worst_init << " / " << worst_margin
             << ", " << secs << " s";
  return out;
}

Outcome criterion_softmax_law() {
  Outcome out;
  Rng rng(99);
  double worst_sum = 0.0;
  double min_lambda = 1.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t d = 2 + rng.below(7);
    const std::size_t n = 1 + rng.below(40);
    std::vector<std::size_t> hidden;
    for (std::size_t l = 0, layers = rng.below(3); l < layers; ++l) hidden.push_back(1 + rng.below(8));
    WeightNet net = make_weightnet(d, hidden, static_cast<std::uint64_t>(draw), 0.1 + 3.0 * rng.uniform());
    randomize_biases(net.mlp, rng);
    const Vector lambda = softmax_weights(net, random_matrix(rng, n, d, 1.0 + 4.0 * rng.uniform()));
    worst_sum = std::max(worst_sum, std::abs(lambda.sum() - 1.0));
    min_lambda = std::min(min_lambda, lambda.minCoeff());
  }
  out.require(min_lambda > 0.0, "non-positive weight " + std::to_string(min_lambda));
  out.require(worst_sum <= 1e-9, "weights sum off by " + std::to_string(worst_sum));

  // Zero-parameter nets: exactly uniform, and the weighted vector points along the mean.
  double worst_uniform = 0.0, worst_cos = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    const std::size_t d = 2 + rng.below(7);
    const std::size_t n = 1 + rng.below(40);
    WeightNet net = make_weightnet(d, {5}, 1, 1.0);
    net.mlp.set_parameters(Vector::Zero(static_cast<Eigen::Index>(net.mlp.parameter_count())));
    const Matrix s = random_matrix(rng, n, d);
    const Vector lambda = softmax_weights(net, s);
    worst_uniform = std::max(worst_uniform, (lambda.array() - 1.0 / static_cast<double>(n)).abs().maxCoeff());
    worst_cos = std::max(worst_cos, std::abs(cosine(weighted_vector(net, s), average_vector(s)) - 1.0));
  }
  out.require(worst_uniform == 0.0, "zero net not uniform: " + std::to_string(worst_uniform));
  out.require(worst_cos <= 1e-12, "zero net cosine off by " + std::to_string(worst_cos));
  out.detail << (out.pass ? "" : "; ") << "1000 draws, min weight " << min_lambda << ", worst |sum-1| "
             << worst_sum << ", zero-net cosine error " << worst_cos;
  return out;
}

struct StandardWorld {
  Fixture fx;
  ClusterModel model;
  TriageLabels labels;
};

StandardWorld standard_world(std::uint64_t seed) {
  StandardWorld w{generate_fixture(standard_fixture_spec(seed)), {}, {}};
  KMeansOptions o;
  o.k = 100;
  o.seed = 1;
  w.model = kmeans_fit(w.fx.corpus, o);
  w.labels = oracle_labels(w.fx.corpus, w.fx.truth, &w.model);
  return w;
}

// The pipeline's near-uniform start, plus perturbed starts (init scale 1) whose
// initial cosines fall well below the floor, so the phase has work to do.
Outcome criterion_init_phase(const StandardWorld& w) {
  Outcome out;
  const auto t0 = Clock::now();
  double min_before = 1.0, min_after = 1.0;
  std::size_t runs = 0;
  for (FilterMode mode : {FilterMode::vis_sec_clu, FilterMode::no}) {
    const auto docs = gather_sentences(apply_filter(w.fx.corpus, &w.labels, &w.model, mode), w.fx.corpus);
    for (std::uint64_t seed = 0; seed <= 5; ++seed) {
      WeightNet net = make_weightnet(w.fx.corpus.dimension(), {256, 256}, seed, seed == 0 ? 0.01 : 1.0);
      for (const auto& doc : docs) {
        min_before = std::min(min_before, cosine(weighted_vector(net, doc.embeddings), average_vector(doc.embeddings)));
      }
      ReprTrainConfig config;
      config.seed = seed;
      net = train_weightnet_init(std::move(net), docs, config);
      ++runs;
      for (const auto& doc : docs) {
        const double c = cosine(weighted_vector(net, doc.embeddings), average_vector(doc.embeddings));
        min_after = std::min(min_after, c);
        out.require(c > 0.9, to_string(mode) + " net " + std::to_string(seed) + " class " + doc.class_id +
                                 " cosine " + std::to_string(c));
      }
    }
  }
  const double secs = seconds_since(t0);
  out.require(secs < 120.0, "runtime " + std::to_string(secs) + " s");
  out.detail << (out.pass ? "" : "; ") << runs << " runs over 20 classes, min cos(a, mean) " << min_before
             << " before, " << min_after << " after, " << secs << " s";
  return out;
}

// Classes a and b share 16 of 20 sentences; their remaining 4 sit around
// prototypes orthogonal to the shared mean. Four unrelated classes complete the set.
std::vector<ClassSentences> overlap_fixture(std::uint64_t seed) {
  const std::size_t d = 16, n = 20, shared = 16;
  Rng rng(seed);
  const Vector mean = random_vector(rng, d);
  std::vector<Vector> basis{mean};
  auto orthogonal = [&](double scale) {
    Vector v = random_vector(rng, d);
    for (const auto& b : basis) v -= v.dot(b) / b.squaredNorm() * b;
    basis.push_back(v);
    return Vector(v * (scale * mean.norm() / v.norm()));
  };
  std::vector<Vector> common;
  for (std::size_t i = 0; i < shared; ++i) common.push_back(mean + random_vector(rng, d, 0.3));

  std::vector<ClassSentences> docs;
  auto add = [&](const std::string& id, const std::function<Vector(std::size_t)>& row) {
    ClassSentences cs;
    cs.class_id = id;
    cs.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      cs.embeddings.row(static_cast<Eigen::Index>(i)) = row(i).transpose();
      cs.sentence_ids.push_back(id + "/" + std::to_string(i));
    }
    docs.push_back(std::move(cs));
  };
  for (const std::string id : {"a", "b"}) {
    const Vector own = orthogonal(0.7);
    add(id, [&](std::size_t i) { return i < shared ? common[i] : Vector(own + random_vector(rng, d, 0.21)); });
  }
  for (int k = 0; k < 4; ++k) {
    const Vector proto = random_vector(rng, d);
    add("o" + std::to_string(k), [&](std::size_t) { return Vector(proto + random_vector(rng, d, 0.3)); });
  }
  return docs;
}

Outcome criterion_margin_phase() {
  Outcome out;
  double min_start = 1.0, max_end = 0.0, worst_other = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto docs = overlap_fixture(seed);
    const double start = cosine(average_vector(docs[0].embeddings), average_vector(docs[1].embeddings));
    min_start = std::min(min_start, start);
    out.require(start >= 0.96, "seed " + std::to_string(seed) + " starts at " + std::to_string(start));

    auto pair_cosines = [&](const WeightNet& net) {
      std::vector<double> c;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        for (std::size_t j = i + 1; j < docs.size(); ++j) {
          c.push_back(cosine(weighted_vector(net, docs[i].embeddings), weighted_vector(net, docs[j].embeddings)));
        }
      }
      return c;
    };
    ReprTrainConfig config;
    config.tau = 0.95;
    config.seed = seed;
    WeightNet net = train_weightnet_init(make_weightnet(16, {64, 64}, seed), docs, config);
    const auto before = pair_cosines(net);
    net = train_weightnet_margin(std::move(net), docs, config);
    const auto after = pair_cosines(net);
    // Pair (a, b) comes first.
    max_end = std::max(max_end, after[0]);
    out.require(after[0] < 0.95, "seed " + std::to_string(seed) + " ends at " + std::to_string(after[0]));
    for (std::size_t p = 1; p < after.size(); ++p) {
      worst_other = std::max(worst_other, std::abs(after[p] - before[p]));
    }
  }
  out.require(worst_other <= 0.05, "another pair moved by " + std::to_string(worst_other));
  out.detail << (out.pass ? "" : "; ") << "10 seeds, overlapping pair " << min_start << "+ -> at most " << std::setprecision(8) << max_end << std::setprecision(6)
             << ", largest other change " << worst_other;
  return out;
}

struct Workspace {
  fs::path root;
  FixtureFiles files;
  fs::path model;
  fs::path labels;
};

Workspace write_workspace(const StandardWorld& w, const fs::path& root) {
  Workspace ws{root, write_fixture(w.fx, root / "fixture"), root / "cluster_model.json", root / "labels.json"};
  save_cluster_model(w.model, ws.model);
  save_labels(w.labels, ws.labels);
  return ws;
}

PipelineConfig standard_config(const Workspace& ws, const std::string& out) {
  PipelineConfig c;
  c.corpus = ws.files.corpus;
  c.train_images = ws.files.train_images;
  c.test_images = ws.files.test_images;
  c.split = ws.files.split;
  c.labels = ws.labels;
  c.cluster_model = ws.model;
  c.cluster_seed = 1;
  c.out_dir = ws.root / out;
  return c;
}

Outcome criterion_end_to_end(const Workspace& ws) {
  Outcome out;
  const auto t0 = Clock::now();
  PipelineConfig ours = standard_config(ws, "vis-sec-clu");
  const double top1 = run_pipeline(ours).report.per_class_top1;

  PipelineConfig baseline = standard_config(ws, "no-average");
  baseline.mode = FilterMode::no;
  baseline.repr_kind = "average";
  const double base = run_pipeline(baseline).report.per_class_top1;
  const double secs = seconds_since(t0);

  out.require(top1 >= 0.9, "DeViSE* vis-sec-clu weighted at " + std::to_string(top1));
  out.require(top1 > base, "baseline not exceeded");
  out.require(secs < 300.0, "runtime " + std::to_string(secs) + " s");
  out.detail << (out.pass ? "" : "; ") << "unseen per-class top-1: vis-sec-clu/weighted/DeViSE* " << top1
             << ", no/average " << base << ", " << secs << " s";
  return out;
}

Outcome criterion_metrics() {
  Outcome out;
  const EvalReport r = report_from_predictions({{"A", "A"}, {"A", "A"}, {"A", "B"}, {"A", "B"}, {"B", "B"}},
                                               {"A", "B"}, "unseen");
  out.require(std::abs(r.per_class_top1 - 0.75) <= 1e-12, "per-class " + std::to_string(r.per_class_top1));
  out.require(std::abs(r.per_sample_top1 - 0.60) <= 1e-12, "per-sample " + std::to_string(r.per_sample_top1));
  const double h = harmonic_mean(17.10, 74.70);
  out.require(std::abs(h - 27.80) <= 0.05, "H " + std::to_string(h));
  out.detail << (out.pass ? "" : "; ") << "per-class " << r.per_class_top1 << ", per-sample " << r.per_sample_top1
             << ", H(17.10, 74.70) = " << h;
  return out;
}

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1]) return false;
  }
  return true;
}

Outcome criterion_kmeans() {
  Outcome out;
  std::size_t runs = 0, iterations = 0;
  for (std::uint64_t fseed = 1; fseed <= 4; ++fseed) {
    const Fixture fx = generate_fixture(standard_fixture_spec(fseed));
    for (std::size_t k : {5u, 20u, 100u}) {
      for (bool normalize : {false, true}) {
        KMeansOptions o;
        o.k = k;
        o.seed = fseed * 31 + k;
        o.normalize = normalize;
        std::vector<double> seen;
        o.on_iteration = [&](std::size_t, double objective) { seen.push_back(objective); };
        const ClusterModel m = kmeans_fit(fx.corpus, o);
        ++runs;
        iterations += m.iterations_run;
        out.require(non_increasing(seen) && seen == m.objective_trace,
                    "objective rose in run " + std::to_string(runs));
        o.on_iteration = nullptr;
        out.require(serialize_cluster_model(kmeans_fit(fx.corpus, o)) == serialize_cluster_model(m),
                    "rerun differs in run " + std::to_string(runs));
      }
    }
  }

  const std::vector<std::vector<double>> points = {{0, 0}, {0, 1}, {10, 0}, {10, 1}};
  const std::vector<std::string> ids = {"p0", "p1", "p2", "p3"};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    KMeansOptions o;
    o.k = 2;
    o.seed = seed;
    const ClusterModel m = kmeans_fit_points(points, ids, o);
    std::set<std::vector<double>> centroids(m.centroids.begin(), m.centroids.end());
    out.require(centroids == std::set<std::vector<double>>{{0.0, 0.5}, {10.0, 0.5}},
                "symmetric fixture seed " + std::to_string(seed));
  }
  out.detail << (out.pass ? "" : "; ") << runs << " runs (" << iterations
             << " iterations) monotone and byte-identical on rerun; symmetric centroids exact over 10 seeds";
  return out;
}

std::set<std::string> ids_of(const FilteredDocument& doc) {
  const auto v = doc.sentence_ids();
  return {v.begin(), v.end()};
}

Outcome criterion_filter_algebra() {
  Outcome out;
  std::size_t classes = 0, fallbacks = 0;
  std::vector<StandardWorld> worlds;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    worlds.push_back(standard_world(seed));
    // Every fixture document opens with a first paragraph, which vis-sec always
    // keeps; dropping it from alternate classes lets the union come up empty.
    StandardWorld stripped = worlds.back();
    std::map<std::string, Document> docs = stripped.fx.corpus.documents();
    bool drop = false;
    for (auto& [cls, doc] : docs) {
      if ((drop = !drop)) std::erase_if(doc.sentences, [](const Sentence& s) { return s.section == "__summary__"; });
    }
    stripped.fx.corpus = Corpus(std::move(docs), stripped.fx.corpus.dimension());
    KMeansOptions o;
    o.k = 100;
    o.seed = 1;
    stripped.model = kmeans_fit(stripped.fx.corpus, o);
    stripped.labels = oracle_labels(stripped.fx.corpus, stripped.fx.truth, &stripped.model);
    worlds.push_back(std::move(stripped));
  }
  for (std::size_t wi = 0; wi < worlds.size(); ++wi) {
    const StandardWorld& w = worlds[wi];
    // Oracle labels, then sparse random verdicts that leave many unions empty.
    std::vector<TriageLabels> variants{w.labels};
    Rng rng(wi + 1);
    for (double p : {0.05, 0.3}) {
      TriageLabels l = make_labels(w.fx.corpus, &w.model);
      for (const auto& [name, count] : w.fx.corpus.section_histogram()) {
        if (rng.uniform() < p) l = label_section(std::move(l), w.fx.corpus, name, Verdict::visual);
      }
      for (std::size_t c = 0; c < w.model.k; ++c) {
        if (rng.uniform() < p) l = label_cluster(std::move(l), c, Verdict::visual);
      }
      variants.push_back(std::move(l));
    }
    for (const auto& labels : variants) {
      const FilteredCorpus full = apply_filter(w.fx.corpus, &labels, &w.model, FilterMode::vis_sec_clu);
      for (const auto& [cls, doc] : w.fx.corpus.documents()) {
        ++classes;
        const auto vs = ids_of(select_sentences(doc, &labels, &w.model, FilterMode::vis_sec));
        const auto vc = ids_of(select_sentences(doc, &labels, &w.model, FilterMode::vis_clu));
        const FilteredDocument vsc = select_sentences(doc, &labels, &w.model, FilterMode::vis_sec_clu);
        std::set<std::string> expected = vs;
        expected.insert(vc.begin(), vc.end());
        out.require(ids_of(vsc) == expected, "union mismatch for " + cls);

        const FilteredDocument& kept = full.at(cls);
        const auto kept_ids = kept.sentence_ids();
        out.require(std::set<std::string>(kept_ids.begin(), kept_ids.end()).size() == kept_ids.size(),
                    "duplicate sentence in " + cls);
        out.require(kept.used_fallback() == expected.empty(), "fallback mismatch for " + cls);
        out.require(!kept_ids.empty(), "empty document " + cls);
        if (kept.used_fallback()) ++fallbacks;
        else out.require(ids_of(kept) == expected, "filtered set differs for " + cls);
      }
    }
  }
  out.require(fallbacks > 0, "fallback never exercised");
  out.detail << (out.pass ? "" : "; ") << classes << " class documents, " << fallbacks << " fell back";
  return out;
}

Outcome criterion_determinism(const Workspace& ws) {
  Outcome out;
  const PipelineResult a = run_pipeline(standard_config(ws, "determinism-a"));
  const PipelineResult b = run_pipeline(standard_config(ws, "determinism-b"));
  const std::string ma = io::read_file(a.manifest);
  const std::string mb = io::read_file(b.manifest);
  out.require(ma == mb, "manifests differ");
  out.detail << (out.pass ? "" : "; ") << "manifest sha256 " << io::sha256_hex(ma).substr(0, 16)
             << " on both runs (" << ma.size() << " bytes)";
  return out;
}

}  // namespace

int main() {
  log::set_level(log::Level::error);
  const fs::path root = fs::temp_directory_path() / ("visex-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << name << ": " << o.detail.str() << std::endl;
  };

  const StandardWorld world = standard_world(7);
  const Workspace ws = write_workspace(world, root);

  report(1, "gradients match central differences", criterion_gradients);
  report(2, "softmax weight law", criterion_softmax_law);
  report(3, "init phase keeps every class near its mean", [&] { return criterion_init_phase(world); });
  report(4, "margin phase separates an overlapping pair", criterion_margin_phase);
  report(5, "end-to-end synthetic zero-shot accuracy", [&] { return criterion_end_to_end(ws); });
  report(6, "metric arithmetic", criterion_metrics);
  report(7, "k-means monotone, exact, and reproducible", criterion_kmeans);
  report(8, "filter algebra", criterion_filter_algebra);
  report(9, "pipeline manifests are byte-identical", [&] { return criterion_determinism(ws); });

  fs::remove_all(root);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
