#pragma once

// Append-only audit trail. Each event carries the SHA-256 of its payload and a
// chain hash over the previous chain hash plus the event's canonical fields, so
// any edit, reorder or deletion breaks verification. When backed by a file the
// log is line-delimited JSON, one event per line, flushed on every append.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cryptotriage/error.hpp"
#include "cryptotriage/hash.hpp"

namespace cryptotriage {

enum class Actor { AI_Model, Bias_Checker, Explainer, Human_Reviewer, Regulator, System };

inline std::string_view to_string(Actor a) {
  switch (a) {
    case Actor::AI_Model: return "AI_Model";
    case Actor::Bias_Checker: return "Bias_Checker";
    case Actor::Explainer: return "Explainer";
    case Actor::Human_Reviewer: return "Human_Reviewer";
    case Actor::Regulator: return "Regulator";
    case Actor::System: return "System";
  }
  return "System";
}

inline Actor parse_actor(std::string_view s) {
  for (auto a : {Actor::AI_Model, Actor::Bias_Checker, Actor::Explainer, Actor::Human_Reviewer, Actor::Regulator,
                 Actor::System}) {
    if (to_string(a) == s) return a;
  }
  throw TriageError(Errc::parse, "unknown actor: " + std::string(s));
}

inline const std::string kGenesisHash(64, '0');

struct AuditEvent {
  std::uint64_t seq = 0;
  std::string case_id;
  Actor actor = Actor::System;
  std::string action;
  std::string to_state;  // empty when the event is not a state transition
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
  std::string payload_hash;
  std::string at;
  std::string prev_hash;
  std::string chain_hash;
};

inline nlohmann::ordered_json to_json(const AuditEvent& e) {
  nlohmann::ordered_json doc;
  doc["seq"] = e.seq;
  doc["case_id"] = e.case_id;
  doc["actor"] = to_string(e.actor);
  doc["action"] = e.action;
  doc["to_state"] = e.to_state;
  doc["payload"] = e.payload;
  doc["payload_hash"] = e.payload_hash;
  doc["at"] = e.at;
  doc["prev_hash"] = e.prev_hash;
  doc["chain_hash"] = e.chain_hash;
  return doc;
}

inline AuditEvent audit_event_from_json(const nlohmann::ordered_json& doc) {
  try {
    AuditEvent e;
    e.seq = doc.at("seq").get<std::uint64_t>();
    e.case_id = doc.at("case_id").get<std::string>();
    e.actor = parse_actor(doc.at("actor").get<std::string>());
    e.action = doc.at("action").get<std::string>();
    e.to_state = doc.at("to_state").get<std::string>();
    e.payload = doc.at("payload");
    e.payload_hash = doc.at("payload_hash").get<std::string>();
    e.at = doc.at("at").get<std::string>();
    e.prev_hash = doc.at("prev_hash").get<std::string>();
    e.chain_hash = doc.at("chain_hash").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw TriageError(Errc::parse, std::string("audit event: ") + ex.what());
  }
}

inline std::string compute_chain_hash(const AuditEvent& e, const std::string& prev_hash) {
  nlohmann::ordered_json canonical;
  canonical["seq"] = e.seq;
  canonical["case_id"] = e.case_id;
  canonical["actor"] = to_string(e.actor);
  canonical["action"] = e.action;
  canonical["to_state"] = e.to_state;
  canonical["payload_hash"] = e.payload_hash;
  canonical["at"] = e.at;
  return sha256_hex(prev_hash + canonical.dump());
}

struct ChainVerification {
  bool valid = true;
  std::size_t first_invalid = 0;
  std::string error;
};

inline ChainVerification verify_chain(const std::vector<AuditEvent>& events) {
  std::string prev = kGenesisHash;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto fail = [&](const std::string& what) {
      return ChainVerification{false, i, what + " at seq " + std::to_string(e.seq)};
    };
    if (e.seq != i + 1) return fail("sequence gap");
    if (e.prev_hash != prev) return fail("prev_hash mismatch");
    if (sha256_hex(e.payload.dump()) != e.payload_hash) return fail("payload_hash mismatch");
    if (compute_chain_hash(e, prev) != e.chain_hash) return fail("chain_hash mismatch");
    prev = e.chain_hash;
  }
  return {};
}

class AuditLog {
 public:
  AuditLog() = default;

  /// Opens (or creates) a file-backed log and verifies the existing chain.
  explicit AuditLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(*path_)) {
      std::ifstream in(*path_);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto doc = nlohmann::ordered_json::parse(line, nullptr, false);
        if (doc.is_discarded()) throw TriageError(Errc::parse, "audit log has a malformed line");
        events_.push_back(audit_event_from_json(doc));
      }
      const auto check = verify_chain(events_);
      if (!check.valid) throw TriageError(Errc::validation, "audit log failed verification: " + check.error);
    } else if (path_->has_parent_path()) {
      std::filesystem::create_directories(path_->parent_path());
    }
  }

  /// Assigns seq and hashes, persists, and returns the stored event.
  const AuditEvent& append(AuditEvent e) {
    e.seq = events_.size() + 1;
    e.payload_hash = sha256_hex(e.payload.dump());
    e.prev_hash = events_.empty() ? kGenesisHash : events_.back().chain_hash;
    e.chain_hash = compute_chain_hash(e, e.prev_hash);
    if (path_) {
      std::ofstream out(*path_, std::ios::app | std::ios::binary);
      out << to_json(e).dump() << '\n';
      out.flush();
      if (!out) throw TriageError(Errc::io, "cannot append to audit log " + path_->string());
    }
    events_.push_back(std::move(e));
    return events_.back();
  }

  const std::vector<AuditEvent>& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }
  ChainVerification verify() const { return verify_chain(events_); }

 private:
  std::optional<std::filesystem::path> path_;
  std::vector<AuditEvent> events_;
};

}  // namespace cryptotriage
