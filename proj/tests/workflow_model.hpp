#pragma once

// Reference state machine for the case lifecycle and a random driver that
// checks the library against it.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cryptotriage/case_workflow.hpp"

namespace workflow_model {

using cryptotriage::CaseState;

enum class Op { open, bias, attach, fetch, confirm, override_flag, anonymous_decision, report };

/// Expected state after `op`, or nullopt when the operation must be rejected.
inline std::optional<CaseState> expected(CaseState s, Op op) {
  switch (op) {
    case Op::attach:
      return s == CaseState::BIAS_CHECKED ? std::optional(CaseState::EXPLAINED) : std::nullopt;
    case Op::fetch:
      return s == CaseState::EXPLAINED ? CaseState::UNDER_REVIEW : s;
    case Op::confirm:
      return s == CaseState::UNDER_REVIEW ? std::optional(CaseState::CONFIRMED) : std::nullopt;
    case Op::override_flag:
      return s == CaseState::UNDER_REVIEW ? std::optional(CaseState::OVERRIDDEN) : std::nullopt;
    case Op::anonymous_decision:
      return std::nullopt;
    case Op::report:
      if (s == CaseState::CONFIRMED || s == CaseState::OVERRIDDEN || s == CaseState::REPORTED) {
        return CaseState::REPORTED;
      }
      return std::nullopt;
    case Op::open:
    case Op::bias:
      return s;
  }
  return std::nullopt;
}

inline cryptotriage::ScoreRun make_run(const std::string& run_id, std::size_t nodes, std::size_t flagged) {
  cryptotriage::ScoreRun run;
  run.run_id = run_id;
  for (std::size_t i = 0; i < nodes; ++i) {
    cryptotriage::AnomalyResult r;
    r.node_id = "w" + std::to_string(i);
    r.score = static_cast<double>(nodes - i);
    r.flagged = i < flagged;
    r.threshold = static_cast<double>(nodes - flagged + 1);
    run.results.push_back(r);
  }
  run.flagged_count = flagged;
  return run;
}

struct Summary {
  std::size_t sequences = 0;
  std::size_t operations = 0;
  std::size_t rejected = 0;
  std::size_t reported = 0;
  std::vector<std::string> violations;
};

/// Runs `sequences` random operation sequences of length `length` on fresh
/// in-memory workflows.
inline Summary run_random_sequences(std::uint64_t seed, std::size_t sequences, std::size_t length = 48) {
  Summary out;
  std::mt19937_64 rng(seed);
  const auto violation = [&](std::size_t seq, std::size_t step, const std::string& what) {
    if (out.violations.size() < 20) {
      out.violations.push_back("sequence " + std::to_string(seq) + " step " + std::to_string(step) + ": " + what);
    }
  };
  for (std::size_t s = 0; s < sequences; ++s) {
    std::uint64_t tick = 0;
    cryptotriage::CaseWorkflow wf([&tick] { return "t" + std::to_string(tick++); });
    const auto run = make_run("run-" + std::to_string(s), 6, 3);
    std::map<std::string, CaseState> model;
    std::map<std::string, cryptotriage::ReviewerDecision> decisions;
    std::map<std::string, std::string> reports;
    cryptotriage::ExplanationWeights w;
    w.node_id = "w0";
    w.weights = {{"f0", 0.5}, {"f1", 0.0}};
    const auto weights = cryptotriage::to_json(w);
    const nlohmann::ordered_json narrative = {{"raw_response", "x"}};

    for (std::size_t step = 0; step < length; ++step) {
      ++out.operations;
      const auto op = static_cast<Op>(std::uniform_int_distribution<int>(0, 7)(rng));
      std::string id = "case-00000" + std::to_string(std::uniform_int_distribution<int>(1, 3)(rng));
      if (op == Op::open) {
        for (const auto& c : wf.open_cases_from_scores(run)) model[c.case_id] = CaseState::FLAGGED;
        continue;
      }
      if (op == Op::bias) {
        cryptotriage::BiasAuditResult audit;
        audit.run_id = run.run_id;
        audit.passed = std::bernoulli_distribution(0.5)(rng);
        wf.apply_bias_audit(audit);
        for (auto& [_, st] : model) {
          if (st == CaseState::FLAGGED) st = CaseState::BIAS_CHECKED;
        }
        continue;
      }
      const auto it = model.find(id);
      const auto before = wf.audit_events().size();
      std::optional<CaseState> want;
      if (it != model.end()) want = expected(it->second, op);
      bool threw = false;
      nlohmann::ordered_json report;
      try {
        switch (op) {
          case Op::attach: wf.attach_explanation(id, weights, narrative); break;
          case Op::fetch: wf.fetch_for_review(id); break;
          case Op::confirm: wf.submit_review(id, {false, "illicit", "ok", "alice"}); break;
          case Op::override_flag: wf.submit_review(id, {true, "licit", "false positive", "bob"}); break;
          case Op::anonymous_decision: wf.submit_review(id, {true, "licit", "", ""}); break;
          case Op::report: report = wf.emit_report(id); break;
          default: break;
        }
      } catch (const cryptotriage::TriageError&) {
        threw = true;
      }
      if (it == model.end()) {
        if (!threw) violation(s, step, "operation on an unopened case succeeded");
        ++out.rejected;
        continue;
      }
      if (threw != !want.has_value()) {
        violation(s, step, std::string(threw ? "legal operation rejected" : "illegal operation accepted") + " from " +
                               std::string(cryptotriage::to_string(it->second)));
      }
      if (threw) {
        ++out.rejected;
        const auto events = wf.audit_events();
        const bool decision_op = op == Op::confirm || op == Op::override_flag || op == Op::anonymous_decision;
        if (decision_op && (events.size() != before + 1 || events.back().action != "decision_rejected")) {
          violation(s, step, "rejected decision was not logged");
        }
        if (!decision_op && events.size() != before) violation(s, step, "rejected operation changed the log");
        continue;
      }
      if (op == Op::report) {
        const auto text = report.dump();
        if (it->second == CaseState::REPORTED && reports[id] != text) violation(s, step, "report changed");
        if (it->second == CaseState::REPORTED && wf.audit_events().size() != before) {
          violation(s, step, "repeated report appended events");
        }
        reports[id] = text;
        ++out.reported;
      }
      if (op == Op::confirm || op == Op::override_flag) decisions[id] = *wf.get(id)->decision;
      it->second = *want;
    }

    // Invariants over the final state.
    const auto replayed = cryptotriage::CaseWorkflow::replay_states(wf.audit_events());
    for (const auto& c : wf.list()) {
      if (model[c.case_id] != c.state) violation(s, length, "state diverged for " + c.case_id);
      if (replayed.at(c.case_id) != c.state) violation(s, length, "replay disagrees for " + c.case_id);
      const bool decided =
          c.state == CaseState::CONFIRMED || c.state == CaseState::OVERRIDDEN || c.state == CaseState::REPORTED;
      if (decided && (!c.decision || c.decision->reviewer_id.empty())) {
        violation(s, length, c.case_id + " decided without a reviewer");
      }
      if (!decided && c.decision) violation(s, length, c.case_id + " has a decision before review");
      if (c.decision) {
        const auto& first = decisions[c.case_id];
        if (c.decision->reviewer_id != first.reviewer_id || c.decision->override_flag != first.override_flag ||
            c.decision->decided_at != first.decided_at) {
          violation(s, length, c.case_id + " decision changed after it was recorded");
        }
      }
    }
    if (wf.list().size() != model.size()) violation(s, length, "case count diverged");
    if (!wf.verify_audit_chain().valid) violation(s, length, "audit chain invalid");
    ++out.sequences;
  }
  return out;
}

}  // namespace workflow_model
