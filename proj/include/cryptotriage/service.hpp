#pragma once

// HTTP/JSON surface under /api/v1 for the reviewer dashboard and scripts.
// Errors are {"code", "message"} with 400 (validation), 404 (unknown node or
// case), 409 (state conflict) or 5xx.

#include <httplib.h>
#ifdef _res
#undef _res  // <resolv.h> macro collides with Eigen internals
#endif

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "cryptotriage/anomaly_gnn.hpp"
#include "cryptotriage/case_workflow.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/graphlime.hpp"
#include "cryptotriage/narrator.hpp"
#include "cryptotriage/pipeline.hpp"
#include "cryptotriage/run_config.hpp"

namespace cryptotriage {

inline int http_status(Errc code) {
  switch (code) {
    case Errc::validation:
    case Errc::parse:
    case Errc::insufficient_neighborhood: return 400;
    case Errc::unknown_node:
    case Errc::not_found: return 404;
    case Errc::invalid_state:
    case Errc::duplicate: return 409;
    case Errc::auth_failure:
    case Errc::transport: return 502;
    case Errc::rate_limited: return 503;
    default: return 500;
  }
}

struct ServiceContext {
  std::shared_ptr<const TransactionGraph> graph;
  std::shared_ptr<const ScoreRun> scores;  // may be null before scoring
  std::shared_ptr<CaseWorkflow> workflow;
  std::shared_ptr<Narrator> narrator;
  ExplainerConfig explainer;
  PromptOptions prompt;
  FraudTypeCatalog catalog = default_fraud_catalog();
  std::optional<Workdir> workdir;  // explanation files are written here when set
  std::size_t page_size = 20;
  std::string static_dir;
};

class TriageService {
 public:
  explicit TriageService(ServiceContext ctx) : ctx_(std::move(ctx)) {
    if (!ctx_.graph || !ctx_.workflow || !ctx_.narrator) {
      throw TriageError(Errc::validation, "service needs a graph, a workflow and a narrator");
    }
    // Without SO_REUSEPORT a second server on the same port fails to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    routes();
  }

  /// Binds without serving. Returns false when the address is unavailable.
  bool bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      return port_ > 0;
    }
    port_ = port;
    return server_.bind_to_port(host, port);
  }

  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const noexcept { return port_; }
  httplib::Server& server() noexcept { return server_; }

 private:
  static void send_json(httplib::Response& res, const nlohmann::ordered_json& doc, int status = 200) {
    res.status = status;
    res.set_content(doc.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    send_json(res, {{"code", code}, {"message", message}}, status);
  }

  template <typename Handler>
  httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const TriageError& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  std::optional<AnomalyResult> score_of(NodeIndex i) const {
    if (!ctx_.scores || ctx_.scores->results.size() != ctx_.graph->node_count()) return std::nullopt;
    return ctx_.scores->results[i];
  }

  nlohmann::ordered_json node_json(NodeIndex i) const {
    auto doc = node_statistics_json(*ctx_.graph, i);
    doc["degree_undirected"] = ctx_.graph->degree(i);
    doc["out_edges"] = ctx_.graph->out_edges(i).size();
    doc["in_edges"] = ctx_.graph->in_edges(i).size();
    if (auto s = score_of(i)) {
      doc["score"] = to_json(*s);
    } else {
      doc["score"] = nullptr;
    }
    return doc;
  }

  static nlohmann::ordered_json case_summary(const Case& c) {
    return {{"case_id", c.case_id},
            {"node_id", c.node_id},
            {"state", to_string(c.state)},
            {"score", c.anomaly.score},
            {"threshold", c.anomaly.threshold},
            {"run_id", c.run_id}};
  }

  static std::size_t parse_size(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    const auto v = csv::parse_number(req.get_param_value(key));
    if (!v || *v < 0 || *v != std::floor(*v)) {
      throw TriageError(Errc::validation, std::string("query parameter '") + key + "' must be a non-negative integer");
    }
    return static_cast<std::size_t>(*v);
  }

  void routes() {
    server_.Get("/api/v1/nodes/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, node_json(ctx_.graph->index_of(req.path_params.at("id"))));
    }));

    server_.Get("/api/v1/nodes/:id/ego", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto center = ctx_.graph->index_of(req.path_params.at("id"));
      const auto k = parse_size(req, "k", 1);
      if (k < 1 || k > 3) throw TriageError(Errc::validation, "k must be 1, 2 or 3");
      const auto ego = ego_network(*ctx_.graph, center, static_cast<int>(k));
      nlohmann::ordered_json doc;
      doc["center"] = ctx_.graph->node(center).address;
      doc["k"] = k;
      auto& nodes = doc["nodes"] = nlohmann::ordered_json::array();
      for (const auto v : ego.members) {
        nlohmann::ordered_json n = {{"id", ctx_.graph->node(v).address}, {"center", v == center}};
        if (auto s = score_of(v)) {
          n["score"] = s->score;
          n["flagged"] = s->flagged;
        } else {
          n["score"] = nullptr;
          n["flagged"] = false;
        }
        nodes.push_back(std::move(n));
      }
      auto& edges = doc["edges"] = nlohmann::ordered_json::array();
      for (const auto e : ego.induced_edges) {
        const auto& edge = ctx_.graph->edge(e);
        edges.push_back({{"src", ctx_.graph->node(edge.src).address},
                         {"dst", ctx_.graph->node(edge.dst).address},
                         {"btc_mean", edge.btc_mean},
                         {"btc_median", edge.btc_median},
                         {"btc_max", edge.btc_max}});
      }
      send_json(res, doc);
    }));

    server_.Get("/api/v1/cases", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<CaseState> filter;
      if (req.has_param("state") && !req.get_param_value("state").empty()) {
        filter = parse_case_state(req.get_param_value("state"));
        if (!filter) throw TriageError(Errc::validation, "unknown state filter: " + req.get_param_value("state"));
      }
      const auto page_size = std::max<std::size_t>(1, parse_size(req, "page_size", ctx_.page_size));
      const auto page = std::max<std::size_t>(1, parse_size(req, "page", 1));
      const auto cases = ctx_.workflow->list(filter);
      const auto pages = (cases.size() + page_size - 1) / page_size;
      nlohmann::ordered_json doc;
      doc["page"] = page;
      doc["page_size"] = page_size;
      doc["total"] = cases.size();
      doc["pages"] = pages;
      auto& items = doc["cases"] = nlohmann::ordered_json::array();
      for (std::size_t i = (page - 1) * page_size; i < cases.size() && i < page * page_size; ++i) {
        items.push_back(case_summary(cases[i]));
      }
      send_json(res, doc);
    }));

    server_.Get("/api/v1/cases/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, to_json(ctx_.workflow->fetch_for_review(req.path_params.at("id"))));
    }));

    server_.Post("/api/v1/cases/:id/explain", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto& id = req.path_params.at("id");
      const auto c = ctx_.workflow->get(id);
      if (!c) throw TriageError(Errc::not_found, "unknown case: " + id);
      if (c->state != CaseState::BIAS_CHECKED) {
        throw TriageError(Errc::invalid_state, "case " + id + " is " + std::string(to_string(c->state)) +
                                                   ", explanation requires BIAS_CHECKED");
      }
      if (!ctx_.scores) throw TriageError(Errc::invalid_state, "no score run loaded");
      const auto node = ctx_.graph->index_of(c->node_id);
      const auto result = explain_and_narrate(*ctx_.graph, *ctx_.scores, node, ctx_.explainer, ctx_.catalog,
                                              ctx_.prompt, *ctx_.narrator);
      const auto weights_doc = to_json(result.weights);
      const auto narrative_doc = to_json(result.narrative);
      if (ctx_.workdir) {
        write_text(ctx_.workdir->weights_file(c->node_id), weights_doc.dump(2) + "\n");
        write_text(ctx_.workdir->narrative_file(c->node_id), narrative_doc.dump(2) + "\n");
      }
      send_json(res, to_json(ctx_.workflow->attach_explanation(id, weights_doc, narrative_doc)));
    }));

    server_.Post("/api/v1/cases/:id/decision", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      if (!body.is_object() || !body.contains("override") || !body["override"].is_boolean()) {
        throw TriageError(Errc::validation, "decision body needs a boolean 'override'");
      }
      DecisionInput input;
      input.override_flag = body["override"].get<bool>();
      input.verdict = body.value("verdict", "");
      input.notes = body.value("notes", "");
      input.reviewer_id = body.value("reviewer_id", "");
      send_json(res, to_json(ctx_.workflow->submit_review(req.path_params.at("id"), input)));
    }));

    server_.Get("/api/v1/cases/:id/report", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, ctx_.workflow->emit_report(req.path_params.at("id"), ctx_.prompt.top_m));
    }));

    server_.Get("/api/v1/audit", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto from = parse_size(req, "from_seq", 0);
      nlohmann::ordered_json doc;
      auto& events = doc["events"] = nlohmann::ordered_json::array();
      for (const auto& e : ctx_.workflow->audit_events(from)) events.push_back(to_json(e));
      send_json(res, doc);
    }));

    if (!ctx_.static_dir.empty() && std::filesystem::is_directory(ctx_.static_dir)) {
      server_.set_mount_point("/", ctx_.static_dir);
    }
  }

  ServiceContext ctx_;
  httplib::Server server_;
  int port_ = 0;
};

}  // namespace cryptotriage
