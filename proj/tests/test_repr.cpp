#include <cmath>

#include "support.hpp"
#include "visex/error.hpp"
#include "visex/repr.hpp"

using namespace visex;

namespace {

// Random classes of a few sentences each, wrapped as a filtered corpus.
struct Toy {
  Corpus corpus;
  FilteredCorpus filtered;
  std::vector<ClassSentences> docs;
};

Toy toy(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t d) {
  std::vector<Sentence> ss;
  for (std::size_t c = 0; c < classes; ++c) {
    const auto base = test::random_vector(rng, d);
    for (std::size_t i = 0; i < per_class; ++i) {
      auto v = test::random_vector(rng, d, 0.7);
      for (std::size_t j = 0; j < d; ++j) v[j] += base[j];
      ss.push_back(test::sentence("c" + std::to_string(c), i, "S", v));
    }
  }
  Toy t{test::corpus_of(ss, d), {}, {}};
  t.filtered = apply_filter(t.corpus, nullptr, nullptr, FilterMode::no);
  t.docs = gather_sentences(t.filtered, t.corpus);
  return t;
}

Vector row(const Matrix& m, Eigen::Index i) { return m.row(i).transpose(); }

// Softmax recomputed from raw scores, independent of softmax_weights.
std::vector<double> direct_lambda(const WeightNet& net, const Matrix& h) {
  const Matrix scores = net.mlp.forward(h);
  std::vector<double> e(static_cast<std::size_t>(h.rows()));
  double z = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) z += e[i] = std::exp(scores(i, 0));
  for (double& x : e) x /= z;
  return e;
}

// Random biases too: with zero biases a sentence that silences the first layer leaves
// the second layer exactly at the rectifier kink, where differences are one-sided.
WeightNet wide_random_net(std::size_t d, std::uint64_t seed) {
  WeightNet net = make_weightnet(d, {6, 6}, seed, 1.0);
  Rng rng(seed + 1000);
  for (std::size_t l = 0; l < net.mlp.layer_count(); ++l) {
    for (Eigen::Index i = 0; i < net.mlp.bias(l).size(); ++i) net.mlp.bias(l)[i] = 0.5 * rng.normal();
  }
  return net;
}

}  // namespace

TEST_SUITE("repr") {
  TEST_CASE("average representation") {
    const Corpus c = test::corpus_of({test::sentence("a", 0, "S", {1, 0}), test::sentence("a", 1, "S", {0, 1}),
                                      test::sentence("b", 0, "S", {3, -2})},
                                     2);
    const FilteredCorpus f = apply_filter(c, nullptr, nullptr, FilterMode::no);
    const Representation a = average_repr(f.at("a"), c);
    CHECK(a.vector == std::vector<double>{0.5, 0.5});
    CHECK(a.kind == ReprKind::average);
    CHECK(average_repr(f.at("b"), c).vector == std::vector<double>{3, -2});

    Rng rng(1);
    std::vector<Sentence> ss;
    std::vector<double> sum(8, 0.0);
    for (std::size_t i = 0; i < 50; ++i) {
      ss.push_back(test::sentence("z", i, "S", test::random_vector(rng, 8)));
      for (std::size_t j = 0; j < 8; ++j) sum[j] += ss.back().embedding[j];
    }
    const Corpus big = test::corpus_of(ss, 8);
    const auto mean = average_repr(apply_filter(big, nullptr, nullptr, FilterMode::no).at("z"), big).vector;
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(mean[j] - sum[j] / 50.0) <= 1e-12);
  }

  TEST_CASE("softmax weights: zero net is uniform, logits (ln 2, 0) give (2/3, 1/3)") {
    WeightNet zero{Mlp({3, 4, 1})};
    Rng rng(2);
    const Matrix h = test::random_matrix(rng, 5, 3);
    const Vector lz = softmax_weights(zero, h);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(lz[i] == doctest::Approx(0.2).epsilon(1e-15));

    WeightNet lin{Mlp({2, 1})};
    lin.mlp.weight(0) << std::log(2.0), 0.0;
    Matrix two(2, 2);
    two << 1, 0, 0, 1;
    const Vector l = softmax_weights(lin, two);
    CHECK(l[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(l[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  TEST_CASE("softmax weights are positive, sum to one, and match direct recomputation") {
    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const WeightNet net = wide_random_net(4, seed);
      const Matrix h = test::random_matrix(rng, 10, 4, 3.0);
      const Vector l = softmax_weights(net, h);
      const auto ref = direct_lambda(net, h);
      CHECK(std::abs(l.sum() - 1.0) <= 1e-9);
      for (Eigen::Index i = 0; i < 10; ++i) {
        CHECK(l[i] > 0.0);
        CHECK(std::abs(l[i] - ref[static_cast<std::size_t>(i)]) <= 1e-12);
      }
    }
    // Huge logits stay finite.
    WeightNet lin{Mlp({1, 1})};
    lin.mlp.weight(0)(0, 0) = 1.0;
    Matrix h(2, 1);
    h << 1000, 990;
    const Vector l = softmax_weights(lin, h);
    CHECK(std::isfinite(l[0]));
    CHECK(l.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("weighted representation keeps the leading 1/m factor") {
    Rng rng(4);
    const Toy t = toy(rng, 3, 7, 5);
    const WeightNet net = wide_random_net(5, 9);
    for (const auto& [cls, fd] : t.filtered) {
      const Representation r = weighted_repr(net, fd, t.corpus);
      CHECK(r.kind == ReprKind::weighted);
      const ClassSentences cs = gather_sentences(fd, t.corpus);
      const auto lam = direct_lambda(net, cs.embeddings);
      const double m = static_cast<double>(cs.embeddings.rows());
      for (std::size_t j = 0; j < 5; ++j) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < cs.embeddings.rows(); ++i) s += lam[static_cast<std::size_t>(i)] * cs.embeddings(i, j);
        CHECK(std::abs(r.vector[j] - s / m) <= 1e-12);
      }
      const auto lw = lambda_weights(net, fd, t.corpus);
      CHECK(lw.size() == cs.sentence_ids.size());
      CHECK(lw.at(cs.sentence_ids[0]) == doctest::Approx(lam[0]).epsilon(1e-12));
    }
  }

  TEST_CASE("uniform weights give the mean scaled by 1/m, with cosine exactly 1") {
    Rng rng(5);
    const Matrix h = test::random_matrix(rng, 6, 4);
    const WeightNet zero{Mlp({4, 3, 1})};
    const Vector a = weighted_vector(zero, h);
    const Vector mean = average_vector(h);
    CHECK(test::relative_error(a, mean / 6.0) < 1e-14);
    CHECK(cosine(a, mean) == doctest::Approx(1.0).epsilon(1e-15));

    const Matrix one = h.topRows(1);
    CHECK(test::relative_error(weighted_vector(wide_random_net(4, 1), one), row(one, 0)) < 1e-15);

    WeightNet unscaled = zero;
    unscaled.scale_by_count = false;
    CHECK(test::relative_error(weighted_vector(unscaled, h), mean) < 1e-14);
  }

  TEST_CASE("cosine conventions") {
    Vector a(2), b(2), z = Vector::Zero(2);
    a << 1, 0;
    b << 1, 1;
    CHECK(cosine(a, b) == doctest::Approx(std::sqrt(0.5)));
    CHECK(cosine(a, z) == 0.0);
    CHECK(cosine_gradient(z, a).isZero());
    const Vector num = test::numeric_gradient([&](const Vector& x) { return cosine(x, b); }, a);
    CHECK(test::relative_error(cosine_gradient(a, b), num) < 1e-8);
  }

  TEST_CASE("initialization hinge arithmetic: cosine 0.85 against epsilon 0.9 costs 0.05") {
    Rng rng(6);
    const Toy t = toy(rng, 1, 4, 3);
    const WeightNet net = wide_random_net(3, 2);
    const double c = cosine(weighted_vector(net, t.docs[0].embeddings), average_vector(t.docs[0].embeddings));
    REQUIRE(c < 0.999);
    // Shift epsilon so the measured cosine plays the role of 0.85 against 0.9.
    CHECK(init_objective(net, t.docs, c + 0.05).loss == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(init_objective(net, t.docs, c - 0.01).loss == 0.0);
    CHECK(init_objective(net, t.docs, c - 0.01).grad.isZero());
  }

  TEST_CASE("margin hinge arithmetic: each unordered pair counts in both orders") {
    Rng rng(7);
    const Toy t = toy(rng, 2, 4, 3);
    const WeightNet net = wide_random_net(3, 3);
    const double c = cosine(weighted_vector(net, t.docs[0].embeddings), weighted_vector(net, t.docs[1].embeddings));
    // cos 0.98 against tau 0.95 is 0.03 per ordered term.
    CHECK(margin_objective(net, t.docs, c - 0.03).loss == doctest::Approx(0.06).epsilon(1e-9));
    // cos 0.90 against tau 0.95 is inactive: no loss, no gradient.
    const Objective off = margin_objective(net, t.docs, c + 0.05);
    CHECK(off.loss == 0.0);
    CHECK(off.grad.isZero());
    CHECK(off.grad.size() == static_cast<Eigen::Index>(net.mlp.parameter_count()));
  }

  TEST_CASE("initialization objective gradient matches central differences") {
    for (std::uint64_t restart = 0; restart < 20; ++restart) {
      CAPTURE(restart);
      Rng rng(100 + restart);
      const Toy t = toy(rng, 2, 3, 4);
      WeightNet net = wide_random_net(4, restart);
      const Objective o = init_objective(net, t.docs, 1.0);  // every class active
      const Vector num = test::numeric_gradient(
          [&](const Vector& p) {
            WeightNet probe = net;
            probe.mlp.set_parameters(p);
            return init_objective(probe, t.docs, 1.0).loss;
          },
          net.mlp.parameters());
      CHECK(test::relative_error(o.grad, num) <= 1e-4);
    }
  }

  TEST_CASE("margin objective gradient matches central differences with both sides live") {
    for (std::uint64_t restart = 0; restart < 20; ++restart) {
      CAPTURE(restart);
      Rng rng(200 + restart);
      const Toy t = toy(rng, 3, 3, 4);
      WeightNet net = wide_random_net(4, restart + 50);
      const double tau = -1.0 + 1e-3;  // all pairs active
      const Objective o = margin_objective(net, t.docs, tau);
      const Vector num = test::numeric_gradient(
          [&](const Vector& p) {
            WeightNet probe = net;
            probe.mlp.set_parameters(p);
            return margin_objective(probe, t.docs, tau).loss;
          },
          net.mlp.parameters());
      CHECK(test::relative_error(o.grad, num) <= 1e-4);

      // A pair subset contributes exactly its own terms.
      const Objective sub = margin_objective(net, t.docs, tau, {{0, 2}});
      const double c02 = cosine(weighted_vector(net, t.docs[0].embeddings), weighted_vector(net, t.docs[2].embeddings));
      CHECK(sub.loss == doctest::Approx(2.0 * (c02 - tau)).epsilon(1e-12));
    }
  }

  TEST_CASE("weighted gradient accumulation matches central differences") {
    Rng rng(9);
    const Matrix h = test::random_matrix(rng, 5, 4);
    const Vector w = test::random_matrix(rng, 4, 1).col(0);
    const WeightNet net = wide_random_net(4, 4);
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(net.mlp.parameter_count()));
    accumulate_weighted_gradient(net, h, w, grad);
    const Vector num = test::numeric_gradient(
        [&](const Vector& p) {
          WeightNet probe = net;
          probe.mlp.set_parameters(p);
          return weighted_vector(probe, h).dot(w);
        },
        net.mlp.parameters());
    CHECK(test::relative_error(grad, num) <= 1e-6);
  }

  TEST_CASE("loss is zero exactly when every class clears epsilon") {
    Rng rng(10);
    const Toy t = toy(rng, 4, 5, 3);
    const WeightNet net = wide_random_net(3, 6);
    double min_cos = 1.0;
    for (const auto& d : t.docs) {
      min_cos = std::min(min_cos, cosine(weighted_vector(net, d.embeddings), average_vector(d.embeddings)));
    }
    CHECK(init_objective(net, t.docs, min_cos - 1e-6).loss == 0.0);
    CHECK(init_objective(net, t.docs, min_cos + 1e-6).loss > 0.0);
  }

  TEST_CASE("zero net needs no initialization training") {
    Rng rng(11);
    const Toy t = toy(rng, 3, 4, 3);
    const WeightNet zero{Mlp({3, 4, 1})};
    ReprTrainConfig cfg;
    ReprTrainLog log;
    const WeightNet out = train_weightnet_init(zero, t.docs, cfg, &log);
    CHECK(out.mlp.parameters() == zero.mlp.parameters());
    CHECK(log.satisfied);
    CHECK(init_objective(zero, t.docs, 0.9).loss == 0.0);
  }

  TEST_CASE("training phases reach their targets and are deterministic") {
    Rng rng(12);
    const Toy t = toy(rng, 4, 6, 6);
    ReprTrainConfig cfg;
    cfg.seed = 3;
    cfg.step_size = 1e-2;
    cfg.init_epochs = 300;
    cfg.margin_epochs = 300;
    cfg.pair_batch_size = 3;
    cfg.class_batch_size = 2;
    cfg.stop_when_satisfied = false;
    WeightNet start = make_weightnet(6, {16, 16}, 1, 1.0);
    ReprTrainLog l1, l2;
    const WeightNet a = train_weightnet_init(start, t.docs, cfg, &l1);
    const WeightNet b = train_weightnet_init(start, t.docs, cfg, &l2);
    CHECK(a.mlp.parameters() == b.mlp.parameters());
    CHECK(l1.epoch_loss == l2.epoch_loss);
    for (double x : l1.epoch_loss) CHECK(x >= 0.0);
    CHECK(init_objective(a, t.docs, cfg.epsilon).loss == 0.0);

    const WeightNet ma = train_weightnet_margin(a, t.docs, cfg);
    const WeightNet mb = train_weightnet_margin(a, t.docs, cfg);
    CHECK(ma.mlp.parameters() == mb.mlp.parameters());

    ReprTrainConfig bad = cfg;
    bad.epsilon = 1.5;
    CHECK_THROWS_AS(train_weightnet_init(start, t.docs, bad), ValidationError);
    bad = cfg;
    bad.tau = 1.0;
    CHECK_THROWS_AS(train_weightnet_margin(start, t.docs, bad), ValidationError);
  }

  TEST_CASE("build_representations composes the per-class operations") {
    Rng rng(13);
    const Toy t = toy(rng, 3, 4, 5);
    const RepresentationSet avg = build_representations(t.corpus, t.filtered, BuildKind::average);
    CHECK(avg.size() == 3);
    for (const auto& [cls, r] : avg) CHECK(r.vector == average_repr(t.filtered.at(cls), t.corpus).vector);

    CHECK_THROWS_WITH_AS(build_representations(t.corpus, t.filtered, BuildKind::weighted),
                         doctest::Contains("weight network required"), ValidationError);
    const WeightNet net = wide_random_net(5, 8);
    const RepresentationSet w = build_representations(t.corpus, t.filtered, BuildKind::weighted, &net);
    for (const auto& [cls, r] : w) {
      const auto lam = lambda_weights(net, t.filtered.at(cls), t.corpus);
      const auto& sents = t.corpus.document(cls).sentences;
      std::vector<double> expect(5, 0.0);
      for (const auto& s : sents) {
        for (std::size_t j = 0; j < 5; ++j) expect[j] += lam.at(s.sentence_id) * s.embedding[j] / sents.size();
      }
      for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(r.vector[j] - expect[j]) <= 1e-12);
    }
    const auto cos = pairwise_cosines(avg);
    CHECK(cos.size() == 3);
    CHECK(cos.count({"c0", "c1"}) == 1);

    WeightNet narrow = make_weightnet(4, {3}, 1);
    CHECK_THROWS_AS(build_representations(t.corpus, t.filtered, BuildKind::weighted, &narrow), ValidationError);
  }

  TEST_CASE("weight network checkpoints round-trip") {
    const WeightNet net = wide_random_net(5, 2);
    test::TempDir dir;
    save_weightnet(net, dir / "w.json");
    const WeightNet back = load_weightnet(dir / "w.json");
    CHECK(back.mlp.widths() == net.mlp.widths());
    CHECK(back.mlp.parameters() == net.mlp.parameters());
    CHECK(back.scale_by_count == net.scale_by_count);
  }
}
