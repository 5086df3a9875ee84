// visex command-line driver. Logs go to stderr; results go to files.
// Exit codes: 0 success, 1 invalid input or arguments, 2 runtime failure.

#include <csignal>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "visex/cluster.hpp"
#include "visex/corpus.hpp"
#include "visex/error.hpp"
#include "visex/eval.hpp"
#include "visex/filter.hpp"
#include "visex/fixture.hpp"
#include "visex/io.hpp"
#include "visex/log.hpp"
#include "visex/pipeline.hpp"
#include "visex/repr.hpp"
#include "visex/service.hpp"
#include "visex/triage.hpp"
#include "visex/zsl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace visex;

namespace {

RepresentationSet load_representations(const fs::path& path) {
  return parse_representations(io::read_file(path), false);
}

void write_json(const fs::path& path, const json& obj) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file_atomic(path, obj.dump(2) + "\n");
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// ------------------------------------------------------------------ fixture

struct FixtureArgs {
  FixtureSpec spec = standard_fixture_spec();
  fs::path out;
};

void add_fixture(CLI::App& app, FixtureArgs& a) {
  auto* sub = app.add_subcommand("fixture", "Generate a synthetic corpus, images, and split");
  sub->add_option("--out", a.out, "Output directory")->required();
  sub->add_option("--classes", a.spec.classes, "Number of classes")->capture_default_str();
  sub->add_option("--seen", a.spec.seen, "Number of seen classes")->capture_default_str();
  sub->add_option("--sentences", a.spec.sentences_per_class, "Sentences per class")->capture_default_str();
  sub->add_option("--visual-fraction", a.spec.visual_fraction, "Fraction of visual sentences")
      ->capture_default_str();
  sub->add_option("--noise", a.spec.noise, "Noise around prototypes")->capture_default_str();
  sub->add_option("--nonvisual-spread", a.spec.nonvisual_spread, "Spread of non-visual sentences")
      ->capture_default_str();
  sub->add_option("--topic-scale", a.spec.topic_scale, "Spread of per-class non-visual topics")
      ->capture_default_str();
  sub->add_option("--dimension", a.spec.dimension, "Embedding dimension")->capture_default_str();
  sub->add_option("--rank", a.spec.prototype_rank, "Prototype subspace rank (0: full)")
      ->capture_default_str();
  sub->add_option("--train-images", a.spec.train_images_per_class, "Training images per seen class")
      ->capture_default_str();
  sub->add_option("--test-images", a.spec.test_images_per_class, "Test images per class")
      ->capture_default_str();
  sub->add_option("--seed", a.spec.seed, "Random seed")->capture_default_str();
  sub->callback([&a] {
    fs::create_directories(a.out);
    const Fixture fx = generate_fixture(a.spec);
    write_fixture(fx, a.out);
    log::info("fixture written to " + a.out.string() + " (" + std::to_string(fx.corpus.sentence_count()) +
              " sentences, " + std::to_string(fx.train_images.size()) + " train / " +
              std::to_string(fx.test_images.size()) + " test images)");
  });
}

// ------------------------------------------------------------------- ingest

struct IngestArgs {
  fs::path corpus, split, out;
  std::vector<fs::path> images;
};

void add_ingest(CLI::App& app, IngestArgs& a) {
  auto* sub = app.add_subcommand("ingest", "Validate inputs and write a summary");
  sub->add_option("--corpus", a.corpus, "Sentence corpus (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--split", a.split, "Class split (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--images", a.images, "Image feature files (JSONL)")->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "Summary JSON");
  sub->callback([&a] {
    const Corpus corpus = ingest_corpus(a.corpus);
    json summary = {{"corpus", {{"sha256", io::sha256_file(a.corpus)},
                                {"classes", corpus.class_ids().size()},
                                {"sentences", corpus.sentence_count()},
                                {"dimension", corpus.dimension()},
                                {"has_text", corpus.has_text()},
                                {"sections", corpus.section_histogram()}}}};
    std::optional<ClassSplit> split;
    if (!a.split.empty()) {
      split = ingest_split(a.split);
      for (const auto& c : split->all_classes()) {
        if (!corpus.has_class(c)) throw ValidationError("class '" + c + "' has no document");
      }
      summary["split"] = {{"seen", split->seen.size()}, {"unseen", split->unseen.size()}};
    }
    json images = json::array();
    for (const auto& p : a.images) {
      const auto recs = ingest_images(p, split ? &*split : nullptr);
      images.push_back({{"path", p.string()}, {"records", recs.size()}, {"sha256", io::sha256_file(p)}});
    }
    summary["images"] = images;
    log::info("corpus ok: " + std::to_string(corpus.sentence_count()) + " sentences");
    if (!a.out.empty()) write_json(a.out, summary);
  });
}

// ------------------------------------------------------------------ cluster

struct ClusterArgs {
  fs::path corpus, out, summary;
  KMeansOptions opts;
  std::size_t exemplars = 5;
};

void add_cluster(CLI::App& app, ClusterArgs& a) {
  auto* sub = app.add_subcommand("cluster", "Fit k-means over sentence embeddings");
  sub->add_option("--corpus", a.corpus, "Sentence corpus (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "Cluster model (JSON)")->required();
  sub->add_option("-k,--k", a.opts.k, "Number of clusters")->capture_default_str();
  sub->add_option("--seed", a.opts.seed, "Random seed")->capture_default_str();
  sub->add_option("--max-iter", a.opts.max_iter, "Lloyd iteration cap")->capture_default_str();
  sub->add_flag("--normalize", a.opts.normalize, "Cluster L2-normalized embeddings");
  sub->add_option("--summary", a.summary, "Write cluster summaries (JSON)");
  sub->add_option("--exemplars", a.exemplars, "Exemplars per cluster in the summary")->capture_default_str();
  sub->callback([&a] {
    const Corpus corpus = ingest_corpus(a.corpus);
    const ClusterModel model = kmeans_fit(corpus, a.opts);
    ensure_parent(a.out);
    save_cluster_model(model, a.out);
    log::info("cluster model " + model.model_id() + ": objective " + std::to_string(model.objective) +
              " after " + std::to_string(model.iterations_run) + " iterations");
    if (!a.summary.empty()) {
      json cards = json::array();
      for (const auto& s : summarize_clusters(model, corpus, a.exemplars)) {
        json ex = json::array();
        for (const auto& e : s.exemplars) {
          ex.push_back({{"sentence_id", e.sentence_id}, {"class_id", e.class_id},
                        {"text", e.text ? json(*e.text) : json(nullptr)}, {"distance", e.distance}});
        }
        cards.push_back({{"index", s.cluster_index}, {"size", s.size}, {"exemplars", ex},
                         {"sections", s.top_sections}});
      }
      write_json(a.summary, {{"model_id", model.model_id()}, {"clusters", cards}});
    }
  });
}

// ---------------------------------------------------------------- autolabel

struct AutolabelArgs {
  fs::path corpus, model, manifest, out;
};

void add_autolabel(CLI::App& app, AutolabelArgs& a) {
  auto* sub = app.add_subcommand(
      "autolabel", "Label sections and clusters from a fixture's ground truth (stands in for the annotator)");
  sub->add_option("--corpus", a.corpus, "Fixture corpus")->required()->check(CLI::ExistingFile);
  sub->add_option("--model", a.model, "Cluster model")->check(CLI::ExistingFile);
  sub->add_option("--manifest", a.manifest, "fixture_manifest.json")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "Labels file (JSON)")->required();
  sub->callback([&a] {
    const Corpus corpus = ingest_corpus(a.corpus);
    std::optional<ClusterModel> model;
    if (!a.model.empty()) model = load_cluster_model(a.model);
    const TriageLabels labels = oracle_labels(corpus, load_fixture_truth(a.manifest), model ? &*model : nullptr);
    ensure_parent(a.out);
    save_labels(labels, a.out);
    log::info(std::to_string(labels.visual_sections().size()) + " visual sections, " +
              std::to_string(labels.visual_clusters().size()) + " visual clusters");
  });
}

// -------------------------------------------------------------------- serve

struct ServeArgs {
  fs::path corpus, model, labels;
  ServiceOptions options;
};

TriageService* g_service = nullptr;

void add_serve(CLI::App& app, ServeArgs& a) {
  auto* sub = app.add_subcommand("serve", "Serve the triage HTTP API");
  sub->add_option("--corpus", a.corpus, "Sentence corpus")->required()->check(CLI::ExistingFile);
  sub->add_option("--model", a.model, "Cluster model")->required()->check(CLI::ExistingFile);
  sub->add_option("--labels", a.labels, "Labels file; created when missing")->required();
  sub->add_option("--host", a.options.host, "Bind address")->capture_default_str();
  sub->add_option("--port", a.options.port, "Port (0: any free port)")->capture_default_str();
  sub->add_option("--static", a.options.static_dir, "Directory with the triage UI build");
  sub->callback([&a] {
    const Corpus corpus = ingest_corpus(a.corpus);
    const ClusterModel model = load_cluster_model(a.model);
    TriageLabels labels = fs::exists(a.labels) ? load_labels(a.labels) : make_labels(corpus, &model);
    if (labels.cluster_model_id != model.model_id()) {
      log::warn("labels were bound to cluster model '" + labels.cluster_model_id + "'; cluster verdicts reset");
      labels = bind_labels(std::move(labels), model);
    }
    ensure_parent(a.labels);
    LabelStore store(std::move(labels), a.labels);
    TriageService service(corpus, model, store, a.options);
    service.bind();
    std::cout << "listening on http://" << a.options.host << ":" << service.port() << std::endl;
    g_service = &service;
    std::signal(SIGINT, [](int) {
      if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
      if (g_service) g_service->stop();
    });
    service.listen();
    g_service = nullptr;
  });
}

// ------------------------------------------------------------------- filter

struct FilterArgs {
  fs::path corpus, labels, model, out, stats;
  std::string mode = "vis-sec-clu";
};

void add_filter(CLI::App& app, FilterArgs& a) {
  auto* sub = app.add_subcommand("filter", "Select visual sentences per class");
  sub->add_option("--corpus", a.corpus, "Sentence corpus")->required()->check(CLI::ExistingFile);
  sub->add_option("--mode", a.mode, "no, vis-sec, vis-clu, vis-sec-clu, par-1st, cls-name")
      ->capture_default_str();
  sub->add_option("--labels", a.labels, "Triage labels")->check(CLI::ExistingFile);
  sub->add_option("--model", a.model, "Cluster model")->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "Filtered sentences (JSONL)")->required();
  sub->add_option("--stats", a.stats, "Retention statistics (JSON)");
  sub->callback([&a] {
    const FilterMode mode = filter_mode_from_string(a.mode);
    const Corpus corpus = ingest_corpus(a.corpus);
    std::optional<TriageLabels> labels;
    std::optional<ClusterModel> model;
    if (!a.labels.empty()) labels = load_labels(a.labels);
    if (!a.model.empty()) model = load_cluster_model(a.model);
    const FilteredCorpus filtered = apply_filter(corpus, labels ? &*labels : nullptr, model ? &*model : nullptr, mode);
    ensure_parent(a.out);
    save_filtered(filtered, a.out);
    const FilterStats stats = filter_stats(filtered, corpus);
    log::info("kept " + std::to_string(stats.kept) + " of " + std::to_string(stats.total) + " sentences");
    if (!a.stats.empty()) {
      ensure_parent(a.stats);
      io::write_file_atomic(a.stats, filter_stats_json(stats));
    }
  });
}

// --------------------------------------------------------------------- repr

struct ReprArgs {
  fs::path corpus, filtered, out, weightnet_out, log_out;
  std::string kind = "weighted";
  std::vector<std::size_t> hidden{256, 256};
  double init_scale = 0.01;
  bool no_count_scaling = false;
  std::uint64_t net_seed = 0;
  ReprTrainConfig train;
  std::string optimizer = "adam";
};

void add_repr(CLI::App& app, ReprArgs& a) {
  auto* sub = app.add_subcommand("repr", "Build class representations from filtered sentences");
  sub->add_option("--corpus", a.corpus, "Sentence corpus")->required()->check(CLI::ExistingFile);
  sub->add_option("--filtered", a.filtered, "Filtered sentences (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--kind", a.kind, "average or weighted")->capture_default_str();
  sub->add_option("--out", a.out, "Representations (JSONL)")->required();
  sub->add_option("--weightnet-out", a.weightnet_out, "Weight network checkpoint (JSON)");
  sub->add_option("--log", a.log_out, "Training log (JSON)");
  sub->add_option("--epsilon", a.train.epsilon, "Init-phase cosine floor")->capture_default_str();
  sub->add_option("--tau", a.train.tau, "Margin-phase cosine ceiling")->capture_default_str();
  sub->add_option("--lr", a.train.step_size, "Step size")->capture_default_str();
  sub->add_option("--init-epochs", a.train.init_epochs, "Init-phase epochs")->capture_default_str();
  sub->add_option("--margin-epochs", a.train.margin_epochs, "Margin-phase epochs")->capture_default_str();
  sub->add_option("--class-batch", a.train.class_batch_size, "Classes per init step (0: all)")
      ->capture_default_str();
  sub->add_option("--pair-batch", a.train.pair_batch_size, "Pairs per margin step (0: all)")
      ->capture_default_str();
  sub->add_option("--optimizer", a.optimizer, "adam or sgd")->capture_default_str();
  sub->add_option("--hidden", a.hidden, "Weight network hidden widths")->capture_default_str();
  sub->add_option("--init-scale", a.init_scale, "Weight network initial scale")->capture_default_str();
  sub->add_flag("--no-count-scaling", a.no_count_scaling, "Drop the 1/m factor from weighted vectors");
  sub->add_option("--net-seed", a.net_seed, "Weight network initialization seed")->capture_default_str();
  sub->add_option("--seed", a.train.seed, "Training seed")->capture_default_str();
  sub->callback([&a] {
    const BuildKind kind = build_kind_from_string(a.kind);
    if (kind == BuildKind::weighted_direct) {
      throw ValidationError("weighted-direct is trained jointly with the alignment; use `visex pipeline`");
    }
    a.train.optimizer = optimizer_kind_from_string(a.optimizer);
    const Corpus corpus = ingest_corpus(a.corpus);
    const FilteredCorpus filtered = load_filtered(a.filtered, corpus);
    RepresentationSet reps;
    if (kind == BuildKind::average) {
      reps = build_representations(corpus, filtered, kind);
    } else {
      WeightNet net = make_weightnet(corpus.dimension(), a.hidden, a.net_seed, a.init_scale);
      net.scale_by_count = !a.no_count_scaling;
      const auto docs = gather_sentences(filtered, corpus);
      ReprTrainLog init_log;
      ReprTrainLog margin_log;
      net = train_weightnet_init(std::move(net), docs, a.train, &init_log);
      net = train_weightnet_margin(std::move(net), docs, a.train, &margin_log);
      log::info(std::string("init phase ") + (init_log.satisfied ? "satisfied" : "not satisfied") +
                ", margin phase " + (margin_log.satisfied ? "satisfied" : "not satisfied"));
      if (!a.weightnet_out.empty()) {
        ensure_parent(a.weightnet_out);
        save_weightnet(net, a.weightnet_out);
      }
      if (!a.log_out.empty()) {
        write_json(a.log_out, {{"init_epoch_loss", init_log.epoch_loss},
                               {"init_satisfied", init_log.satisfied},
                               {"margin_epoch_loss", margin_log.epoch_loss},
                               {"margin_satisfied", margin_log.satisfied}});
      }
      reps = build_representations(corpus, filtered, kind, &net);
    }
    ensure_parent(a.out);
    export_representations(reps, a.out);
    log::info("wrote " + std::to_string(reps.size()) + " representations");
  });
}

// -------------------------------------------------------------------- train

struct TrainArgs {
  fs::path repr, images, split, out, log_out;
  DeviseArch arch;
  bool plain = false;
  bool random_init = false;
  ZslTrainConfig train;
  std::string optimizer = "adam";
  std::uint64_t model_seed = 0;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Train the DeViSE alignment on seen classes");
  sub->add_option("--repr", a.repr, "Representations (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--images", a.images, "Training images (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--split", a.split, "Class split")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", a.out, "Model checkpoint (JSON)")->required();
  sub->add_option("--log", a.log_out, "Training log (JSON)");
  sub->add_flag("--plain", a.plain, "Identity f and g (DeViSE rather than DeViSE*)");
  sub->add_option("--latent", a.arch.latent, "Latent width (0: min(512, image dim))")->capture_default_str();
  sub->add_option("--hidden", a.arch.hidden, "Hidden width (0: twice the latent width)")->capture_default_str();
  sub->add_flag("--random-init", a.random_init, "Skip the identity path in f and g");
  sub->add_option("--margin", a.train.margin, "Ranking margin")->capture_default_str();
  sub->add_option("--lr", a.train.step_size, "Step size")->capture_default_str();
  sub->add_option("--epochs", a.train.epochs, "Epochs")->capture_default_str();
  sub->add_option("--batch", a.train.batch_size, "Images per step")->capture_default_str();
  sub->add_option("--negatives", a.train.negatives, "Negatives per image (0: all)")->capture_default_str();
  sub->add_option("--optimizer", a.optimizer, "adam or sgd")->capture_default_str();
  sub->add_option("--model-seed", a.model_seed, "Initialization seed")->capture_default_str();
  sub->add_option("--seed", a.train.seed, "Batching and sampling seed")->capture_default_str();
  sub->callback([&a] {
    a.arch.mlp = !a.plain;
    a.arch.identity_init = !a.random_init;
    a.arch.margin = a.train.margin;
    a.train.optimizer = optimizer_kind_from_string(a.optimizer);
    const ClassSplit split = ingest_split(a.split);
    const auto images = ingest_images(a.images, &split);
    if (images.empty()) throw ValidationError("no training images");
    const RepresentationSet reps = load_representations(a.repr);
    if (reps.empty()) throw ValidationError("no representations");
    DeviseModel model = make_devise(images.front().features.size(), reps.begin()->second.vector.size(),
                                    a.arch, a.model_seed);
    ZslTrainLog tlog;
    model = train_devise(std::move(model), images, reps, split, a.train, &tlog);
    ensure_parent(a.out);
    save_devise(model, a.out);
    log::info("final epoch loss " + std::to_string(tlog.epoch_loss.empty() ? 0.0 : tlog.epoch_loss.back()));
    if (!a.log_out.empty()) write_json(a.log_out, {{"epoch_loss", tlog.epoch_loss}, {"steps", tlog.steps}});
  });
}

// --------------------------------------------------------------------- eval

struct EvalArgs {
  fs::path model, repr, images, split, out;
  std::string candidates = "unseen";
  bool hops = false;
  bool gzsl = false;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Evaluate a trained model on test images");
  sub->add_option("--model", a.model, "Model checkpoint")->required()->check(CLI::ExistingFile);
  sub->add_option("--repr", a.repr, "Representations (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--images", a.images, "Test images (JSONL)")->required()->check(CLI::ExistingFile);
  sub->add_option("--split", a.split, "Class split")->required()->check(CLI::ExistingFile);
  sub->add_option("--candidates", a.candidates, "unseen or all")->capture_default_str();
  sub->add_flag("--hops", a.hops, "Add the nested 2-hop / 3-hop / all breakdown");
  sub->add_flag("--gzsl", a.gzsl, "Add generalized zero-shot U / S / H");
  sub->add_option("--out", a.out, "Report (JSON)")->required();
  sub->callback([&a] {
    const CandidateSet cs = candidate_set_from_string(a.candidates);
    const ClassSplit split = ingest_split(a.split);
    const auto images = ingest_images(a.images, &split);
    const RepresentationSet reps = load_representations(a.repr);
    const DeviseModel model = load_devise(a.model);
    std::vector<ImageRecord> seen_test;
    std::vector<ImageRecord> unseen_test;
    for (const auto& img : images) (split.is_seen(img.class_id) ? seen_test : unseen_test).push_back(img);
    const std::vector<std::string> unseen(split.unseen.begin(), split.unseen.end());
    const EvalReport main = cs == CandidateSet::unseen
                                ? evaluate(model, unseen_test, reps, unseen, "unseen")
                                : evaluate(model, images, reps, split.all_classes(), "all");
    json report = {{"main", json::parse(eval_report_json(main))}};
    if (a.gzsl) {
      report["gzsl"] = json::parse(eval_report_json(evaluate_gzsl(model, seen_test, unseen_test, reps, split)));
    }
    if (a.hops) {
      json hops = json::object();
      for (const auto& [hop, r] : hop_breakdown(model, unseen_test, reps, split)) {
        hops[to_string(hop)] = json::parse(eval_report_json(r));
      }
      report["hops"] = hops;
    }
    write_json(a.out, report);
    log::info("per-class top-1 " + std::to_string(main.per_class_top1) + ", per-sample top-1 " +
              std::to_string(main.per_sample_top1));
  });
}

// --------------------------------------------------------- pipeline / sweep

struct PipelineArgs {
  fs::path config;
  fs::path out_dir;
  std::string mode;
  std::string repr_kind;
  std::optional<std::uint64_t> seed;
};

// Applies a single seed to every stage that has one.
void apply_seed(PipelineConfig& c, std::uint64_t seed) {
  c.cluster_seed = seed;
  c.weightnet_seed = seed + 1;
  c.repr_train.seed = seed + 2;
  c.model_seed = seed + 3;
  c.zsl_train.seed = seed + 4;
}

PipelineConfig resolve(const PipelineArgs& a) {
  PipelineConfig c = load_pipeline_config(a.config);
  if (!a.out_dir.empty()) c.out_dir = a.out_dir;
  if (!a.mode.empty()) c.mode = filter_mode_from_string(a.mode);
  if (!a.repr_kind.empty()) c.repr_kind = a.repr_kind;
  if (a.seed) apply_seed(c, *a.seed);
  return c;
}

void add_pipeline_options(CLI::App* sub, PipelineArgs& a) {
  sub->add_option("--config", a.config, "Pipeline configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out-dir", a.out_dir, "Override the output directory");
  sub->add_option("--mode", a.mode, "Override the filter mode");
  sub->add_option("--repr-kind", a.repr_kind, "Override the representation kind");
  sub->add_option("--seed", a.seed, "Derive every stage seed from this value");
}

void add_pipeline(CLI::App& app, PipelineArgs& a) {
  auto* sub = app.add_subcommand("pipeline", "Run ingest, cluster, filter, repr, train, and eval");
  add_pipeline_options(sub, a);
  sub->callback([&a] {
    const PipelineResult r = run_pipeline(resolve(a));
    log::info("unseen per-class top-1 " + std::to_string(r.report.per_class_top1) + "; manifest " +
              r.manifest.string());
  });
}

struct SweepArgs {
  PipelineArgs base;
  std::vector<double> taus, margins, lrs;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  auto* sub = app.add_subcommand("sweep", "Run the pipeline over tau, margin, and step-size grids");
  add_pipeline_options(sub, a.base);
  sub->add_option("--taus", a.taus, "Margin-phase thresholds, e.g. 0.95 0.96 0.97 0.98");
  sub->add_option("--margins", a.margins, "Ranking margins, e.g. 0.1 0.2 0.5 0.7");
  sub->add_option("--lrs", a.lrs, "Step sizes, e.g. 1e-3 5e-4 2e-4 1e-4");
  sub->callback([&a] {
    const PipelineConfig c = resolve(a.base);
    const auto points = run_sweep(c, a.taus, a.margins, a.lrs);
    log::info(std::to_string(points.size()) + " runs; summary in " + (c.out_dir / "sweep.json").string());
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visex: visual sentence extraction for zero-shot learning"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string level = "info";
  app.add_option("--log-level", level, "debug, info, warn, error, off")->capture_default_str();
  app.parse_complete_callback([&level] {
    static const std::map<std::string, log::Level> levels = {{"debug", log::Level::debug},
                                                            {"info", log::Level::info},
                                                            {"warn", log::Level::warn},
                                                            {"error", log::Level::error},
                                                            {"off", log::Level::off}};
    auto it = levels.find(level);
    if (it == levels.end()) throw CLI::ValidationError("--log-level", "unknown level '" + level + "'");
    log::set_level(it->second);
  });

  FixtureArgs fixture;
  IngestArgs ingest;
  ClusterArgs cluster;
  AutolabelArgs autolabel;
  ServeArgs serve;
  FilterArgs filter;
  ReprArgs repr;
  TrainArgs train;
  EvalArgs eval;
  PipelineArgs pipeline;
  SweepArgs sweep;
  add_fixture(app, fixture);
  add_ingest(app, ingest);
  add_cluster(app, cluster);
  add_autolabel(app, autolabel);
  add_serve(app, serve);
  add_filter(app, filter);
  add_repr(app, repr);
  add_train(app, train);
  add_eval(app, eval);
  add_pipeline(app, pipeline);
  add_sweep(app, sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ValidationError& e) {
    log::error(e.what());
    return 1;
  } catch (const std::exception& e) {
    log::error(e.what());
    return 2;
  }
  return 0;
}
