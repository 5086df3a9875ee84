#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "visex/cluster.hpp"
#include "visex/corpus.hpp"
#include "visex/triage.hpp"

namespace httplib {
class Server;
}

namespace visex {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  // 0 binds an ephemeral port; see TriageService::port().
  int port = 8080;
  // Exemplars per card in GET /clusters; GET /clusters/{i} lists every member.
  std::size_t card_exemplars = 5;
  // Sample sentences per section in GET /sections.
  std::size_t section_samples = 3;
  // Served at / when set (the triage UI build).
  std::filesystem::path static_dir;
};

// HTTP+JSON front end over a LabelStore.
//
//   GET  /sections                 sections with counts, samples, verdicts
//   POST /sections/{name}/label    {"verdict", "revision"?, "cluster_model_id"?}
//   GET  /clusters                 one card per cluster
//   GET  /clusters/{i}             every member, nearest first
//   POST /clusters/{i}/label       as for sections
//   GET  /labels                   the full label file
//   POST /recompute                filter statistics per mode and representation count
//
// A write carrying a revision or cluster_model_id that no longer matches the
// stored labels is rejected with 409. Reads are served from immutable snapshots.
class TriageService {
 public:
  TriageService(const Corpus& corpus, const ClusterModel& model, LabelStore& store,
                ServiceOptions options = {});
  ~TriageService();

  TriageService(const TriageService&) = delete;
  TriageService& operator=(const TriageService&) = delete;

  // Binds the listening socket; throws RuntimeError("port in use") on failure.
  void bind();
  int port() const { return bound_port_; }

  // Serves on the calling thread until stop().
  void listen();
  // bind() if needed, then serve on a background thread.
  void start();
  void stop();

  // Request handlers without the HTTP layer; each returns {status, JSON body}.
  struct Response {
    int status = 200;
    std::string body;
  };
  Response get_sections() const;
  Response get_clusters() const;
  Response get_cluster(std::size_t index) const;
  Response get_labels() const;
  Response post_section_label(const std::string& name, const std::string& body);
  Response post_cluster_label(std::size_t index, const std::string& body);
  Response post_recompute() const;

 private:
  void install_routes();

  const Corpus& corpus_;
  const ClusterModel& model_;
  LabelStore& store_;
  ServiceOptions options_;
  std::vector<ClusterSummary> summaries_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int bound_port_ = 0;
  bool bound_ = false;
};

}  // namespace visex
