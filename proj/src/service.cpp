#include "visex/service.hpp"

#include <algorithm>
#include <optional>

#include <json.hpp>

#include "visex/error.hpp"
#include "visex/filter.hpp"
#include "visex/log.hpp"
#include "visex/repr.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers.
#include <httplib.h>

namespace visex {

using nlohmann::json;

namespace {

// Raised inside a LabelStore mutation to abort it with an HTTP status.
struct Rejected {
  int status;
  std::string message;
};

TriageService::Response error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

json labels_json(const TriageLabels& labels) { return json::parse(serialize_labels(labels)); }

json exemplar_json(const Exemplar& e) {
  json obj = {{"sentence_id", e.sentence_id}, {"class_id", e.class_id}, {"distance", e.distance}};
  obj["text"] = e.text ? json(*e.text) : json(nullptr);
  return obj;
}

struct LabelRequest {
  Verdict verdict = Verdict::unlabeled;
  std::optional<std::uint64_t> revision;
  std::optional<std::string> cluster_model_id;
};

LabelRequest parse_label_request(const std::string& body) {
  json obj;
  try {
    obj = json::parse(body);
  } catch (const json::exception&) {
    throw Rejected{400, "request body is not valid JSON"};
  }
  if (!obj.is_object() || !obj.contains("verdict") || !obj["verdict"].is_string()) {
    throw Rejected{400, "missing verdict"};
  }
  LabelRequest r;
  try {
    r.verdict = verdict_from_string(obj["verdict"].get<std::string>());
  } catch (const ValidationError& e) {
    throw Rejected{400, e.what()};
  }
  if (obj.contains("revision")) {
    if (!obj["revision"].is_number_unsigned()) throw Rejected{400, "revision must be a non-negative integer"};
    r.revision = obj["revision"].get<std::uint64_t>();
  }
  if (obj.contains("cluster_model_id")) {
    if (!obj["cluster_model_id"].is_string()) throw Rejected{400, "cluster_model_id must be a string"};
    r.cluster_model_id = obj["cluster_model_id"].get<std::string>();
  }
  return r;
}

void check_fresh(const TriageLabels& current, const LabelRequest& r) {
  if (r.revision && *r.revision != current.revision) {
    throw Rejected{409, "stale revision " + std::to_string(*r.revision) + " (current " +
                            std::to_string(current.revision) + ")"};
  }
  if (r.cluster_model_id && *r.cluster_model_id != current.cluster_model_id) {
    throw Rejected{409, "stale cluster_model_id " + *r.cluster_model_id};
  }
}

}  // namespace

TriageService::TriageService(const Corpus& corpus, const ClusterModel& model, LabelStore& store,
                             ServiceOptions options)
    : corpus_(corpus), model_(model), store_(store), options_(std::move(options)) {
  if (store_.snapshot()->cluster_model_id != model_.model_id()) {
    throw ValidationError("labels are not bound to the served cluster model");
  }
  std::size_t largest = 1;
  for (std::size_t c = 0; c < model_.k; ++c) largest = std::max(largest, model_.cluster_size(c));
  summaries_ = summarize_clusters(model_, corpus_, largest);
  server_ = std::make_unique<httplib::Server>();
  // The library default adds SO_REUSEPORT, which would let a second instance share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  install_routes();
}

TriageService::~TriageService() { stop(); }

void TriageService::install_routes() {
  auto send = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server_->Get("/sections", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, get_sections());
  });
  server_->Get("/clusters", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, get_clusters());
  });
  server_->Get(R"(/clusters/(\d+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_cluster(std::stoul(req.matches[1].str())));
  });
  server_->Get("/labels", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, get_labels());
  });
  server_->Post(R"(/sections/([^/]+)/label)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, post_section_label(req.matches[1].str(), req.body));
                });
  server_->Post(R"(/clusters/(\d+)/label)",
                [this, send](const httplib::Request& req, httplib::Response& res) {
                  send(res, post_cluster_label(std::stoul(req.matches[1].str()), req.body));
                });
  server_->Post("/recompute", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, post_recompute());
  });
  server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    log::error("serve: " + message);
    res.status = 500;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  });
  if (!options_.static_dir.empty()) {
    if (!server_->set_mount_point("/", options_.static_dir.string())) {
      throw ValidationError("static directory not found: " + options_.static_dir.string());
    }
  }
}

void TriageService::bind() {
  if (bound_) return;
  if (options_.port == 0) {
    bound_port_ = server_->bind_to_any_port(options_.host);
    if (bound_port_ < 0) throw RuntimeError("port in use");
  } else {
    if (!server_->bind_to_port(options_.host, options_.port)) {
      throw RuntimeError("port in use: " + options_.host + ":" + std::to_string(options_.port));
    }
    bound_port_ = options_.port;
  }
  bound_ = true;
  log::info("serve: listening on " + options_.host + ":" + std::to_string(bound_port_));
}

void TriageService::listen() {
  bind();
  server_->listen_after_bind();
}

void TriageService::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void TriageService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

TriageService::Response TriageService::get_sections() const {
  const auto labels = store_.snapshot();
  std::map<std::string, json> sections;
  for (const auto& [name, count] : corpus_.section_histogram()) {
    sections[name] = {{"name", name}, {"count", count}, {"verdict", to_string(labels->section(name))},
                      {"samples", json::array()}};
  }
  for (const Sentence* s : corpus_.all_sentences()) {
    auto& samples = sections[s->section]["samples"];
    if (samples.size() >= options_.section_samples) continue;
    json sample = {{"sentence_id", s->sentence_id}, {"class_id", s->class_id}};
    sample["text"] = s->text ? json(*s->text) : json(nullptr);
    samples.push_back(sample);
  }
  json list = json::array();
  for (auto& [name, obj] : sections) list.push_back(std::move(obj));
  return {200, json{{"revision", labels->revision}, {"sections", list}}.dump()};
}

TriageService::Response TriageService::get_clusters() const {
  const auto labels = store_.snapshot();
  json cards = json::array();
  for (const auto& s : summaries_) {
    json ex = json::array();
    for (std::size_t i = 0; i < std::min(options_.card_exemplars, s.exemplars.size()); ++i) {
      ex.push_back(exemplar_json(s.exemplars[i]));
    }
    cards.push_back({{"index", s.cluster_index},
                     {"size", s.size},
                     {"verdict", to_string(labels->cluster(s.cluster_index))},
                     {"exemplars", ex},
                     {"sections", s.top_sections}});
  }
  return {200, json{{"revision", labels->revision},
                    {"cluster_model_id", labels->cluster_model_id},
                    {"clusters", cards}}
                   .dump()};
}

TriageService::Response TriageService::get_cluster(std::size_t index) const {
  if (index >= summaries_.size()) return error_response(404, "cluster index out of range");
  const auto labels = store_.snapshot();
  const auto& s = summaries_[index];
  json ex = json::array();
  for (const auto& e : s.exemplars) ex.push_back(exemplar_json(e));
  return {200, json{{"revision", labels->revision},
                    {"index", index},
                    {"size", s.size},
                    {"verdict", to_string(labels->cluster(index))},
                    {"exemplars", ex},
                    {"sections", s.top_sections}}
                   .dump()};
}

TriageService::Response TriageService::get_labels() const {
  return {200, labels_json(*store_.snapshot()).dump()};
}

TriageService::Response TriageService::post_section_label(const std::string& name,
                                                          const std::string& body) {
  try {
    const LabelRequest r = parse_label_request(body);
    if (!corpus_.section_histogram().count(name)) throw Rejected{404, "unknown section '" + name + "'"};
    const auto next = store_.update([&](const TriageLabels& current) {
      check_fresh(current, r);
      return label_section(current, corpus_, name, r.verdict);
    });
    log::info("serve: section '" + name + "' -> " + to_string(r.verdict));
    return {200, labels_json(*next).dump()};
  } catch (const Rejected& e) {
    return error_response(e.status, e.message);
  }
}

TriageService::Response TriageService::post_cluster_label(std::size_t index, const std::string& body) {
  try {
    const LabelRequest r = parse_label_request(body);
    if (index >= model_.k) throw Rejected{404, "cluster index out of range"};
    const auto next = store_.update([&](const TriageLabels& current) {
      check_fresh(current, r);
      return label_cluster(current, index, r.verdict);
    });
    log::info("serve: cluster " + std::to_string(index) + " -> " + to_string(r.verdict));
    return {200, labels_json(*next).dump()};
  } catch (const Rejected& e) {
    return error_response(e.status, e.message);
  }
}

TriageService::Response TriageService::post_recompute() const {
  const auto labels = store_.snapshot();
  std::vector<FilterMode> modes = {FilterMode::no, FilterMode::vis_sec, FilterMode::vis_clu,
                                   FilterMode::vis_sec_clu, FilterMode::par_1st};
  if (corpus_.has_text()) modes.push_back(FilterMode::cls_name);
  json stats = json::object();
  std::size_t representations = 0;
  for (FilterMode mode : modes) {
    const FilteredCorpus filtered = apply_filter(corpus_, labels.get(), &model_, mode);
    stats[to_string(mode)] = json::parse(filter_stats_json(filter_stats(filtered, corpus_)));
    if (mode == FilterMode::vis_sec_clu) {
      representations = build_representations(corpus_, filtered, BuildKind::average).size();
    }
  }
  return {200, json{{"revision", labels->revision},
                    {"visual_sections", labels->visual_sections().size()},
                    {"visual_clusters", labels->visual_clusters().size()},
                    {"representations", representations},
                    {"filter_stats", stats}}
                   .dump()};
}

}  // namespace visex
