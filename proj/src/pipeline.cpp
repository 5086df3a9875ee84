#include "visex/pipeline.hpp"

#include <functional>
#include <set>
#include <sstream>

#include "visex/cluster.hpp"
#include "visex/error.hpp"
#include "visex/io.hpp"
#include "visex/log.hpp"
#include "visex/triage.hpp"

namespace visex {

using nlohmann::json;

std::string to_string(CandidateSet c) { return c == CandidateSet::unseen ? "unseen" : "all"; }

CandidateSet candidate_set_from_string(const std::string& s) {
  if (s == "unseen") return CandidateSet::unseen;
  if (s == "all") return CandidateSet::all;
  throw ValidationError("unknown candidate set '" + s + "'");
}

void PipelineConfig::validate() const {
  if (corpus.empty()) throw ValidationError("corpus path required");
  if (train_images.empty()) throw ValidationError("training image path required");
  if (test_images.empty()) throw ValidationError("test image path required");
  if (split.empty()) throw ValidationError("split path required");
  for (const auto* p : {&corpus, &train_images, &test_images, &split}) {
    if (!std::filesystem::exists(*p)) throw ValidationError("missing input file " + p->string());
  }
  if ((uses_sections(mode) || uses_clusters(mode)) && labels.empty()) {
    throw ValidationError("triage labels required for mode " + to_string(mode));
  }
  if (!labels.empty() && !std::filesystem::exists(labels)) {
    throw ValidationError("missing labels file " + labels.string());
  }
  if (!cluster_model.empty() && !std::filesystem::exists(cluster_model)) {
    throw ValidationError("missing cluster model file " + cluster_model.string());
  }
  if (repr_kind == "external") {
    if (external_repr.empty() || !std::filesystem::exists(external_repr)) {
      throw ValidationError("external representation file required for kind 'external'");
    }
  } else {
    build_kind_from_string(repr_kind);
  }
  if (k == 0) throw ValidationError("K must be positive");
  repr_train.validate();
  zsl_train.validate();
}

json pipeline_config_json(const PipelineConfig& c, bool include_out_dir) {
  json obj;
  obj["corpus"] = c.corpus.string();
  obj["train_images"] = c.train_images.string();
  obj["test_images"] = c.test_images.string();
  obj["split"] = c.split.string();
  obj["labels"] = c.labels.string();
  obj["cluster_model"] = c.cluster_model.string();
  obj["external_repr"] = c.external_repr.string();
  if (include_out_dir) obj["out_dir"] = c.out_dir.string();
  obj["k"] = c.k;
  obj["cluster_seed"] = c.cluster_seed;
  obj["cluster_max_iter"] = c.cluster_max_iter;
  obj["cluster_normalize"] = c.cluster_normalize;
  obj["mode"] = to_string(c.mode);
  obj["repr_kind"] = c.repr_kind;
  obj["weightnet_hidden"] = c.weightnet_hidden;
  obj["weightnet_init_scale"] = c.weightnet_init_scale;
  obj["weightnet_scale_by_count"] = c.weightnet_scale_by_count;
  obj["weightnet_seed"] = c.weightnet_seed;
  obj["epsilon"] = c.repr_train.epsilon;
  obj["tau"] = c.repr_train.tau;
  obj["repr_step_size"] = c.repr_train.step_size;
  obj["init_epochs"] = c.repr_train.init_epochs;
  obj["margin_epochs"] = c.repr_train.margin_epochs;
  obj["class_batch_size"] = c.repr_train.class_batch_size;
  obj["pair_batch_size"] = c.repr_train.pair_batch_size;
  obj["repr_seed"] = c.repr_train.seed;
  obj["repr_optimizer"] = to_string(c.repr_train.optimizer);
  obj["devise_mlp"] = c.arch.mlp;
  obj["latent"] = c.arch.latent;
  obj["hidden"] = c.arch.hidden;
  obj["identity_init"] = c.arch.identity_init;
  obj["devise_init_scale"] = c.arch.init_scale;
  obj["margin"] = c.zsl_train.margin;
  obj["lr"] = c.zsl_train.step_size;
  obj["epochs"] = c.zsl_train.epochs;
  obj["batch_size"] = c.zsl_train.batch_size;
  obj["negatives"] = c.zsl_train.negatives;
  obj["train_seed"] = c.zsl_train.seed;
  obj["optimizer"] = to_string(c.zsl_train.optimizer);
  obj["model_seed"] = c.model_seed;
  obj["candidates"] = to_string(c.candidates);
  obj["hops"] = c.hops;
  obj["gzsl"] = c.gzsl;
  return obj;
}

PipelineConfig parse_pipeline_config(const json& obj, PipelineConfig c) {
  if (!obj.is_object()) throw ValidationError("pipeline config must be a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> keys;
    const json defaults = pipeline_config_json(PipelineConfig{});
    for (auto it = defaults.begin(); it != defaults.end(); ++it) keys.insert(it.key());
    return keys;
  }();
  try {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!known.count(it.key())) throw ValidationError("unknown config key '" + it.key() + "'");
    }
    auto path = [&](const char* key, std::filesystem::path& dst) {
      if (obj.contains(key)) dst = obj[key].get<std::string>();
    };
    auto get = [&](const char* key, auto& dst) {
      if (obj.contains(key)) dst = obj[key].get<std::decay_t<decltype(dst)>>();
    };
    path("corpus", c.corpus);
    path("train_images", c.train_images);
    path("test_images", c.test_images);
    path("split", c.split);
    path("labels", c.labels);
    path("cluster_model", c.cluster_model);
    path("external_repr", c.external_repr);
    path("out_dir", c.out_dir);
    get("k", c.k);
    get("cluster_seed", c.cluster_seed);
    get("cluster_max_iter", c.cluster_max_iter);
    get("cluster_normalize", c.cluster_normalize);
    if (obj.contains("mode")) c.mode = filter_mode_from_string(obj["mode"].get<std::string>());
    get("repr_kind", c.repr_kind);
    get("weightnet_hidden", c.weightnet_hidden);
    get("weightnet_init_scale", c.weightnet_init_scale);
    get("weightnet_scale_by_count", c.weightnet_scale_by_count);
    get("weightnet_seed", c.weightnet_seed);
    get("epsilon", c.repr_train.epsilon);
    get("tau", c.repr_train.tau);
    get("repr_step_size", c.repr_train.step_size);
    get("init_epochs", c.repr_train.init_epochs);
    get("margin_epochs", c.repr_train.margin_epochs);
    get("class_batch_size", c.repr_train.class_batch_size);
    get("pair_batch_size", c.repr_train.pair_batch_size);
    get("repr_seed", c.repr_train.seed);
    if (obj.contains("repr_optimizer")) {
      c.repr_train.optimizer = optimizer_kind_from_string(obj["repr_optimizer"].get<std::string>());
    }
    get("devise_mlp", c.arch.mlp);
    get("latent", c.arch.latent);
    get("hidden", c.arch.hidden);
    get("identity_init", c.arch.identity_init);
    get("devise_init_scale", c.arch.init_scale);
    get("margin", c.zsl_train.margin);
    get("lr", c.zsl_train.step_size);
    get("epochs", c.zsl_train.epochs);
    get("batch_size", c.zsl_train.batch_size);
    get("negatives", c.zsl_train.negatives);
    get("train_seed", c.zsl_train.seed);
    if (obj.contains("optimizer")) {
      c.zsl_train.optimizer = optimizer_kind_from_string(obj["optimizer"].get<std::string>());
    }
    get("model_seed", c.model_seed);
    if (obj.contains("candidates")) {
      c.candidates = candidate_set_from_string(obj["candidates"].get<std::string>());
    }
    get("hops", c.hops);
    get("gzsl", c.gzsl);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed pipeline config: ") + e.what());
  }
  c.arch.margin = c.zsl_train.margin;
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  try {
    return parse_pipeline_config(json::parse(io::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  log::info("stage " + name);
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError("stage '" + name + "': " + e.what());
  } catch (const RuntimeError& e) {
    throw RuntimeError("stage '" + name + "': " + e.what());
  }
}

json report_json(const EvalReport& r) { return json::parse(eval_report_json(r)); }

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
  stage("config", [&] {
    config.validate();
    return 0;
  });
  PipelineResult result;
  const auto& out = config.out_dir;
  std::filesystem::create_directories(out);
  json outputs = json::object();
  auto emit = [&](const std::string& name, const std::string& contents) {
    io::write_file_atomic(out / name, contents);
    outputs[name] = io::sha256_hex(contents);
  };

  json inputs = json::object();
  auto record_input = [&](const char* name, const std::filesystem::path& p) {
    if (!p.empty()) inputs[name] = {{"path", p.string()}, {"sha256", io::sha256_file(p)}};
  };
  record_input("corpus", config.corpus);
  record_input("train_images", config.train_images);
  record_input("test_images", config.test_images);
  record_input("split", config.split);
  record_input("labels", config.labels);
  record_input("cluster_model", config.cluster_model);
  record_input("external_repr", config.external_repr);

  // ingest
  struct Inputs {
    Corpus corpus;
    ClassSplit split;
    std::vector<ImageRecord> train, test;
  };
  const Inputs in = stage("ingest", [&] {
    Inputs x;
    x.corpus = ingest_corpus(config.corpus);
    x.split = ingest_split(config.split);
    x.train = ingest_images(config.train_images, &x.split);
    x.test = ingest_images(config.test_images, &x.split);
    for (const auto& c : x.split.all_classes()) {
      if (!x.corpus.has_class(c)) throw ValidationError("class '" + c + "' has no document");
    }
    return x;
  });

  // cluster
  std::optional<ClusterModel> model;
  if (uses_clusters(config.mode)) {
    model = stage("cluster", [&] {
      ClusterModel m;
      if (!config.cluster_model.empty()) {
        m = load_cluster_model(config.cluster_model);
        for (const Sentence* s : in.corpus.all_sentences()) {
          if (!m.assignment.count(s->sentence_id)) {
            throw ValidationError("cluster model does not cover sentence " + s->sentence_id);
          }
        }
      } else {
        KMeansOptions opts;
        opts.k = config.k;
        opts.seed = config.cluster_seed;
        opts.max_iter = config.cluster_max_iter;
        opts.normalize = config.cluster_normalize;
        m = kmeans_fit(in.corpus, opts);
      }
      emit("cluster_model.json", serialize_cluster_model(m));
      return m;
    });
  }

  // triage labels + filter
  const FilteredCorpus filtered = stage("filter", [&] {
    std::optional<TriageLabels> labels;
    if (!config.labels.empty()) {
      labels = load_labels(config.labels);
      if (model && labels->cluster_model_id != model->model_id()) {
        log::warn("triage labels were made for cluster model '" + labels->cluster_model_id +
                  "'; cluster verdicts reset for model '" + model->model_id() + "'");
        labels = bind_labels(*labels, *model);
      }
    }
    auto f = apply_filter(in.corpus, labels ? &*labels : nullptr, model ? &*model : nullptr,
                          config.mode);
    emit("filtered.jsonl", serialize_filtered(f));
    result.filter_stats = filter_stats(f, in.corpus);
    emit("filter_stats.json", filter_stats_json(result.filter_stats));
    return f;
  });

  // representations (weighted-direct finishes after alignment training)
  std::optional<WeightNet> net;
  std::vector<ClassSentences> docs;
  RepresentationSet reps = stage("repr", [&] {
    if (config.repr_kind == "external") {
      const auto all = in.split.all_classes();
      return ingest_external_representations(config.external_repr,
                                             std::set<std::string>(all.begin(), all.end()));
    }
    const BuildKind kind = build_kind_from_string(config.repr_kind);
    if (kind == BuildKind::average) return build_representations(in.corpus, filtered, kind);
    net = make_weightnet(in.corpus.dimension(), config.weightnet_hidden, config.weightnet_seed,
                         config.weightnet_init_scale);
    net->scale_by_count = config.weightnet_scale_by_count;
    docs = gather_sentences(filtered, in.corpus);
    if (kind == BuildKind::weighted_direct) return build_representations(in.corpus, filtered, kind, &*net);
    ReprTrainLog init_log;
    ReprTrainLog margin_log;
    net = train_weightnet_init(std::move(*net), docs, config.repr_train, &init_log);
    if (!init_log.satisfied) log::warn("init phase ended before every class exceeded epsilon");
    net = train_weightnet_margin(std::move(*net), docs, config.repr_train, &margin_log);
    emit("repr_train_log.json", json{{"init_epoch_loss", init_log.epoch_loss},
                                     {"init_satisfied", init_log.satisfied},
                                     {"margin_epoch_loss", margin_log.epoch_loss},
                                     {"margin_satisfied", margin_log.satisfied}}
                                    .dump(2) + "\n");
    return build_representations(in.corpus, filtered, kind, &*net);
  });

  // alignment
  const DeviseModel devise = stage("train", [&] {
    DeviseArch arch = config.arch;
    arch.margin = config.zsl_train.margin;
    const std::size_t repr_dim = reps.begin()->second.vector.size();
    DeviseModel m = make_devise(in.train.front().features.size(), repr_dim, arch, config.model_seed);
    ZslTrainLog log;
    JointWeighting joint;
    const bool direct = config.repr_kind != "external" &&
                        build_kind_from_string(config.repr_kind) == BuildKind::weighted_direct;
    if (direct) {
      joint.net = &*net;
      joint.docs = &docs;
    }
    m = train_devise(std::move(m), in.train, reps, in.split, config.zsl_train, &log,
                     direct ? &joint : nullptr);
    if (direct) reps = build_representations(in.corpus, filtered, BuildKind::weighted_direct, &*net);
    emit("devise.json", serialize_devise(m));
    emit("train_log.json", json{{"epoch_loss", log.epoch_loss}, {"steps", log.steps}}.dump(2) + "\n");
    return m;
  });
  if (net) emit("weightnet.json", serialize_weightnet(*net));
  emit("representations.jsonl", serialize_representations(reps));

  // evaluation
  stage("eval", [&] {
    std::vector<ImageRecord> seen_test;
    std::vector<ImageRecord> unseen_test;
    for (const auto& img : in.test) {
      (in.split.is_seen(img.class_id) ? seen_test : unseen_test).push_back(img);
    }
    const std::vector<std::string> unseen(in.split.unseen.begin(), in.split.unseen.end());
    const std::vector<std::string> seen(in.split.seen.begin(), in.split.seen.end());
    if (config.candidates == CandidateSet::unseen) {
      result.report = evaluate(devise, unseen_test, reps, unseen, "unseen");
    } else {
      result.report = evaluate(devise, in.test, reps, in.split.all_classes(), "all");
    }
    json report;
    report["main"] = report_json(result.report);
    if (!seen_test.empty()) {
      result.validation = evaluate(devise, seen_test, reps, seen, "seen-validation");
      report["validation"] = report_json(*result.validation);
    }
    if (config.gzsl && !seen_test.empty() && !unseen_test.empty()) {
      result.gzsl = evaluate_gzsl(devise, seen_test, unseen_test, reps, in.split);
      report["gzsl"] = report_json(*result.gzsl);
    }
    if (config.hops && !in.split.hop_tags.empty()) {
      result.hops = hop_breakdown(devise, unseen_test, reps, in.split);
      json hops = json::object();
      for (const auto& [hop, r] : result.hops) hops[to_string(hop)] = report_json(r);
      report["hops"] = hops;
    }
    emit("report.json", report.dump(2) + "\n");
    return 0;
  });

  json manifest;
  manifest["config"] = pipeline_config_json(config, false);
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["seeds"] = {{"cluster", config.cluster_seed},
                       {"weightnet", config.weightnet_seed},
                       {"repr_train", config.repr_train.seed},
                       {"model", config.model_seed},
                       {"train", config.zsl_train.seed}};
  manifest["summary"] = {{"per_class_top1", result.report.per_class_top1},
                         {"per_sample_top1", result.report.per_sample_top1},
                         {"retention", result.filter_stats.retention()}};
  result.manifest = out / "manifest.json";
  io::write_file_atomic(result.manifest, manifest.dump(2) + "\n");
  return result;
}

std::vector<SweepPoint> run_sweep(const PipelineConfig& config, const std::vector<double>& taus,
                                  const std::vector<double>& margins,
                                  const std::vector<double>& step_sizes) {
  const std::vector<double> ts = taus.empty() ? std::vector<double>{config.repr_train.tau} : taus;
  const std::vector<double> ms = margins.empty() ? std::vector<double>{config.zsl_train.margin} : margins;
  const std::vector<double> ls =
      step_sizes.empty() ? std::vector<double>{config.zsl_train.step_size} : step_sizes;
  std::vector<SweepPoint> points;
  json rows = json::array();
  for (double t : ts) {
    for (double m : ms) {
      for (double l : ls) {
        PipelineConfig c = config;
        c.repr_train.tau = t;
        c.zsl_train.margin = m;
        c.arch.margin = m;
        c.zsl_train.step_size = l;
        std::ostringstream name;
        name << "tau" << t << "_margin" << m << "_lr" << l;
        c.out_dir = config.out_dir / name.str();
        const PipelineResult r = run_pipeline(c);
        SweepPoint p{t, m, l, r.report.per_class_top1, std::nullopt};
        if (r.validation) p.validation_top1 = r.validation->per_class_top1;
        points.push_back(p);
        json row = {{"tau", t}, {"margin", m}, {"lr", l}, {"unseen_top1", p.unseen_top1},
                    {"run", name.str()}};
        if (p.validation_top1) row["validation_top1"] = *p.validation_top1;
        rows.push_back(row);
      }
    }
  }
  // Selection uses seen-class validation only.
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].validation_top1) continue;
    if (!best || *points[i].validation_top1 > *points[*best].validation_top1) best = i;
  }
  json summary = {{"runs", rows}};
  if (best) summary["selected"] = rows[*best];
  io::write_file_atomic(config.out_dir / "sweep.json", summary.dump(2) + "\n");
  return points;
}

}  // namespace visex
