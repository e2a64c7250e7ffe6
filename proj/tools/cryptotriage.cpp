// Command-line front door: ingest -> train -> score -> explain -> review -> report, and serve.
//
// Exit codes: 0 success, 2 validation/input errors, 3 service bind failure, 1 anything else.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cryptotriage/cryptotriage.hpp"

namespace ct = cryptotriage;
namespace fs = std::filesystem;

namespace {

ct::TriageService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int exit_code_for(ct::Errc code) {
  switch (code) {
    case ct::Errc::io:
    case ct::Errc::validation:
    case ct::Errc::duplicate_address:
    case ct::Errc::empty_graph:
    case ct::Errc::unknown_node:
    case ct::Errc::schema_mismatch:
    case ct::Errc::parse:
    case ct::Errc::not_found:
    case ct::Errc::invalid_state:
    case ct::Errc::duplicate: return 2;
    default: return 1;
  }
}

struct Flags {
  std::string config_path;
  std::string workdir;
  std::optional<std::uint64_t> seed;

  std::string nodes_csv, edges_csv;
  std::optional<int> epochs, h1, h2;
  std::optional<double> learning_rate, quantile, alpha;
  std::string node;
  bool all_flagged = false;
  std::string backend;
  std::optional<int> k;
  std::string case_id;
  bool override_flag = false;
  bool confirm_flag = false;
  std::string verdict, notes, reviewer;
  std::string bind;
  std::optional<int> port;
  std::string static_dir;
};

/// defaults < config file < flags. Without --config, <workdir>/triage.json is used when present.
ct::RunConfig resolve_config(const Flags& flags) {
  ct::RunConfig config;
  if (!flags.workdir.empty()) config.workdir = flags.workdir;
  fs::path file = flags.config_path;
  if (file.empty()) {
    const auto candidate = ct::Workdir{config.workdir}.config();
    if (fs::exists(candidate)) file = candidate;
  }
  if (!file.empty()) ct::apply_config_file(config, file);
  if (!flags.workdir.empty()) config.workdir = flags.workdir;
  if (flags.seed) config.anomaly.seed = *flags.seed;
  if (!flags.nodes_csv.empty()) config.nodes_csv = flags.nodes_csv;
  if (!flags.edges_csv.empty()) config.edges_csv = flags.edges_csv;
  if (flags.epochs) config.anomaly.epochs = *flags.epochs;
  if (flags.h1) config.anomaly.h1 = *flags.h1;
  if (flags.h2) config.anomaly.h2 = *flags.h2;
  if (flags.learning_rate) config.anomaly.learning_rate = *flags.learning_rate;
  if (flags.quantile) config.anomaly.quantile = *flags.quantile;
  if (flags.alpha) config.anomaly.alpha = *flags.alpha;
  if (!flags.backend.empty()) config.narrator.backend = flags.backend;
  if (flags.k) config.explainer.k = *flags.k;
  if (!flags.bind.empty()) config.service.bind = flags.bind;
  if (flags.port) config.service.port = *flags.port;
  if (!flags.static_dir.empty()) config.service.static_dir = flags.static_dir;
  config.validate();
  return config;
}

ct::TransactionGraph load_graph(const ct::Workdir& wd) {
  if (!fs::exists(wd.graph())) {
    throw ct::TriageError(ct::Errc::io, "no ingested graph at " + wd.graph().string() + "; run `ingest` first");
  }
  return ct::load_graph(wd.graph().string());
}

ct::ScoreRun load_scores(const ct::Workdir& wd) {
  if (!fs::exists(wd.scores())) {
    throw ct::TriageError(ct::Errc::io, "no scores at " + wd.scores().string() + "; run `score` first");
  }
  return ct::load_score_run(wd);
}

ct::NarratorConfig narrator_config(const ct::RunConfig& config, const ct::Workdir& wd) {
  auto n = config.narrator;
  n.cache_dir = wd.narrator_cache().string();
  return n;
}

int cmd_ingest(const ct::RunConfig& config) {
  if (config.nodes_csv.empty() || config.edges_csv.empty()) {
    throw ct::TriageError(ct::Errc::validation, "ingest needs --nodes and --edges (or paths in the config file)");
  }
  for (const auto& path : {config.nodes_csv, config.edges_csv}) {
    if (!fs::exists(path)) throw ct::TriageError(ct::Errc::io, "input file not found: " + path);
  }
  const ct::Workdir wd{config.workdir};
  fs::create_directories(wd.root);
  auto result = ct::ingest(config.nodes_csv, config.edges_csv, config.schema_map,
                           {.skip_duplicate_addresses = config.skip_duplicate_addresses});
  ct::save_graph(result.graph, wd.graph().string());
  const auto report = result.report.to_text();
  ct::write_text(wd.ingest_report(), report);
  std::cout << report;
  std::cout << "graph_sha256=" << ct::sha256_hex(ct::read_text(wd.graph())) << '\n';
  return 0;
}

int cmd_train(const ct::RunConfig& config) {
  const ct::Workdir wd{config.workdir};
  const auto graph = load_graph(wd);
  try {
    const auto model = ct::train(graph, config.anomaly);
    ct::write_text(wd.model(), ct::checkpoint_text(model));
    std::cout << "epochs=" << config.anomaly.epochs;
    if (!model.loss_trace.empty()) {
      std::cout << " initial_loss=" << model.loss_trace.front() << " final_loss=" << model.loss_trace.back()
                << " smoothed_loss_non_increasing=" << (ct::loss_trend_non_increasing(model.loss_trace) ? "yes" : "no");
    }
    std::cout << "\nmodel=" << wd.model().string() << '\n';
  } catch (const ct::DivergenceError& e) {
    ct::write_text(wd.model(), ct::checkpoint_text(e.last_good()));
    std::cerr << "training diverged: " << e.what() << "; last finite model written to " << wd.model().string() << '\n';
    return 1;
  }
  return 0;
}

int cmd_score(const ct::RunConfig& config) {
  const ct::Workdir wd{config.workdir};
  const auto graph = load_graph(wd);
  if (!fs::exists(wd.model())) throw ct::TriageError(ct::Errc::io, "no model at " + wd.model().string() + "; run `train` first");
  auto model = ct::parse_checkpoint(ct::read_text(wd.model()), &graph.feature_schema());
  model.hyper.quantile = config.anomaly.quantile;
  model.hyper.alpha = config.anomaly.alpha;
  const auto run = ct::score_all(model, graph);
  ct::write_text(wd.scores(), ct::scores_csv(run.results));
  ct::write_text(wd.score_run(), ct::score_run_json(run, model.hyper.alpha).dump(2) + "\n");

  ct::CaseWorkflow workflow(wd.root);
  const auto opened = workflow.open_cases_from_scores(run, &graph);
  const auto audit = ct::run_bias_audit(graph, run, config.bias);
  const auto advanced = workflow.apply_bias_audit(audit);
  std::cout << "nodes=" << run.results.size() << " flagged=" << run.flagged_count << " threshold=" << run.threshold
            << " run_id=" << run.run_id << '\n';
  std::cout << "cases_opened=" << opened.size() << " bias_checked=" << advanced.size()
            << " bias_passed=" << (audit.passed ? "yes" : "no") << " max_disparity_ratio=" << audit.max_disparity_ratio
            << '\n';
  return 0;
}

int cmd_explain(const ct::RunConfig& config, const Flags& flags) {
  const ct::Workdir wd{config.workdir};
  const auto graph = load_graph(wd);
  const auto run = load_scores(wd);
  std::vector<ct::NodeIndex> targets;
  if (flags.all_flagged) {
    for (ct::NodeIndex i = 0; i < run.results.size(); ++i) {
      if (run.results[i].flagged) targets.push_back(i);
    }
  } else if (!flags.node.empty()) {
    targets.push_back(graph.index_of(flags.node));
  } else {
    throw ct::TriageError(ct::Errc::validation, "explain needs a node id or --all-flagged");
  }

  ct::Narrator narrator(narrator_config(config, wd));
  const ct::FraudTypeCatalog catalog(config.fraud_types);
  ct::PromptOptions prompt;
  prompt.top_m = config.top_m;
  std::optional<ct::CaseWorkflow> workflow;
  if (fs::exists(wd.root / "audit.jsonl")) workflow.emplace(wd.root);

  std::size_t attached = 0;
  for (const auto node : targets) {
    const auto result = ct::explain_and_narrate(graph, run, node, config.explainer, catalog, prompt, narrator);
    const auto& address = graph.node(node).address;
    const auto weights_doc = ct::to_json(result.weights);
    const auto narrative_doc = ct::to_json(result.narrative);
    ct::write_text(wd.weights_file(address), weights_doc.dump(2) + "\n");
    ct::write_text(wd.narrative_file(address), narrative_doc.dump(2) + "\n");
    if (workflow) {
      for (const auto& c : workflow->list(ct::CaseState::BIAS_CHECKED)) {
        if (c.node_id == address && c.run_id == run.run_id && !c.explanation) {
          workflow->attach_explanation(c.case_id, weights_doc, narrative_doc);
          ++attached;
        }
      }
    }
    std::cout << address << ": top=" << (result.prompt.formatted_weights.empty() ? "-" : result.prompt.formatted_weights.front())
              << " k_used=" << result.weights.k_used << " n=" << result.weights.n_neighbors
              << (result.narrative.parse_failed ? " narrative=parse_failed" : " narrative=ok") << '\n';
  }
  std::cout << "explained=" << targets.size() << " cases_attached=" << attached
            << " backend_calls=" << narrator.backend_calls() << '\n';
  return 0;
}

int cmd_review(const ct::RunConfig& config, const Flags& flags) {
  if (flags.override_flag == flags.confirm_flag) {
    throw ct::TriageError(ct::Errc::validation, "review needs exactly one of --override or --confirm");
  }
  ct::CaseWorkflow workflow(fs::path(config.workdir));
  workflow.fetch_for_review(flags.case_id);
  const auto c = workflow.submit_review(flags.case_id, {flags.override_flag, flags.verdict, flags.notes, flags.reviewer});
  std::cout << c.case_id << ": " << ct::to_string(c.state) << '\n';
  return 0;
}

int cmd_report(const ct::RunConfig& config, const Flags& flags) {
  const ct::Workdir wd{config.workdir};
  ct::CaseWorkflow workflow(wd.root);
  const auto report = workflow.emit_report(flags.case_id, config.top_m);
  const auto path = wd.reports() / (ct::Workdir::file_stem(flags.case_id) + ".json");
  ct::write_text(path, report.dump(2) + "\n");
  std::cout << "report=" << path.string() << '\n';
  return 0;
}

int cmd_serve(const ct::RunConfig& config) {
  const ct::Workdir wd{config.workdir};
  ct::ServiceContext ctx;
  ctx.graph = std::make_shared<const ct::TransactionGraph>(load_graph(wd));
  if (fs::exists(wd.scores())) ctx.scores = std::make_shared<const ct::ScoreRun>(load_scores(wd));
  ctx.workflow = std::make_shared<ct::CaseWorkflow>(wd.root);
  ctx.narrator = std::make_shared<ct::Narrator>(narrator_config(config, wd));
  ctx.explainer = config.explainer;
  ctx.prompt.top_m = config.top_m;
  ctx.catalog = ct::FraudTypeCatalog(config.fraud_types);
  ctx.workdir = wd;
  ctx.page_size = config.service.page_size;
  ctx.static_dir = config.service.static_dir;
  ct::TriageService service(std::move(ctx));
  if (!service.bind(config.service.bind, config.service.port)) {
    std::cerr << "cannot bind " << config.service.bind << ':' << config.service.port << " (port in use?)\n";
    return 3;
  }
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving http://" << config.service.bind << ':' << service.port() << "/api/v1" << std::endl;
  service.listen();
  g_service = nullptr;
  // Audit appends are flushed as they happen; nothing is buffered past this point.
  std::cout << "stopped" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cryptotriage: anomaly scoring, explanation and review for wallet transaction graphs"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config_path, "JSON config file (default: <workdir>/triage.json if present)");
  app.add_option("--workdir", flags.workdir, "Work directory for graph, model, scores, cases and audit log");
  app.add_option("--seed", flags.seed, "RNG seed for training and sampling");

  auto* ingest = app.add_subcommand("ingest", "Load node/edge CSVs into the work directory");
  ingest->add_option("--nodes", flags.nodes_csv, "Node (wallet) CSV");
  ingest->add_option("--edges", flags.edges_csv, "Edge (transaction) CSV");

  auto* train = app.add_subcommand("train", "Train the graph autoencoder");
  train->add_option("--epochs", flags.epochs, "Gradient-descent epochs");
  train->add_option("--learning-rate", flags.learning_rate, "Learning rate");
  train->add_option("--h1", flags.h1, "First hidden layer width");
  train->add_option("--h2", flags.h2, "Embedding width");

  auto* score = app.add_subcommand("score", "Score every node, open cases for flagged nodes and run the bias audit");
  score->add_option("--quantile", flags.quantile, "Flag quantile q (top 1-q flagged)");
  score->add_option("--alpha", flags.alpha, "Attribute-error weight in the score");

  auto* explain = app.add_subcommand("explain", "Explain and narrate one node or every flagged node");
  explain->add_option("node", flags.node, "Node address");
  explain->add_flag("--all-flagged", flags.all_flagged, "Explain every flagged node");
  explain->add_option("--backend", flags.backend, "Narrator backend: stub or llm");
  explain->add_option("--k", flags.k, "Initial ego-network radius");

  auto* review = app.add_subcommand("review", "Record a reviewer decision on a case");
  review->add_option("case_id", flags.case_id, "Case id")->required();
  review->add_flag("--override", flags.override_flag, "Clear the flag");
  review->add_flag("--confirm", flags.confirm_flag, "Confirm the flag");
  review->add_option("--verdict", flags.verdict, "Verdict text");
  review->add_option("--notes", flags.notes, "Reviewer notes");
  review->add_option("--reviewer", flags.reviewer, "Reviewer id");

  auto* report = app.add_subcommand("report", "Emit the regulator report for a decided case");
  report->add_option("case_id", flags.case_id, "Case id")->required();

  auto* serve = app.add_subcommand("serve", "Serve the /api/v1 HTTP API and dashboard assets");
  serve->add_option("--bind", flags.bind, "Bind address");
  serve->add_option("--port", flags.port, "Port");
  serve->add_option("--static-dir", flags.static_dir, "Built dashboard directory");

  auto* config_cmd = app.add_subcommand("config", "Configuration commands");
  config_cmd->require_subcommand(1);
  auto* show = config_cmd->add_subcommand("show", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto config = resolve_config(flags);
    if (*ingest) return cmd_ingest(config);
    if (*train) return cmd_train(config);
    if (*score) return cmd_score(config);
    if (*explain) return cmd_explain(config, flags);
    if (*review) return cmd_review(config, flags);
    if (*report) return cmd_report(config, flags);
    if (*serve) return cmd_serve(config);
    if (*show) {
      std::cout << ct::to_json(config).dump(2) << '\n';
      return 0;
    }
  } catch (const ct::TriageError& e) {
    std::cerr << "error [" << ct::to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
