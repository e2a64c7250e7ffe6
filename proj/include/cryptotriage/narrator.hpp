#pragma once

// Turns explanation weights plus raw wallet statistics into the analyst prompt,
// sends it to a chat-completion endpoint (or the offline stub) and splits the
// reply into its three numbered parts.

#include <httplib.h>
#ifdef _res
#undef _res  // <resolv.h> macro collides with Eigen internals
#endif

#include <nlohmann/json.hpp>

#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/graphlime.hpp"
#include "cryptotriage/hash.hpp"
#include "cryptotriage/prompt_template.hpp"

namespace cryptotriage {

struct FraudType {
  std::string name;
  std::string definition;
};

class FraudTypeCatalog {
 public:
  explicit FraudTypeCatalog(std::vector<FraudType> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw TriageError(Errc::validation, "fraud-type catalog is empty");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (entries_[i].name == entries_[j].name) {
          throw TriageError(Errc::validation, "duplicate fraud type: " + entries_[i].name);
        }
      }
    }
  }

  const std::vector<FraudType>& entries() const noexcept { return entries_; }

  std::string names_joined() const {
    std::string out;
    for (const auto& e : entries_) {
      if (!out.empty()) out += ", ";
      out += e.name;
    }
    return out;
  }

 private:
  std::vector<FraudType> entries_;
};

/// Reconstructed from the fraud patterns discussed around the system; override via config.
inline FraudTypeCatalog default_fraud_catalog() {
  return FraudTypeCatalog({
      {"Ponzi scheme", "earlier investors are paid out of deposits from later investors"},
      {"rug pull", "project developers abandon a project after draining invested funds"},
      {"money laundering", "illicit funds are moved to disguise their origin"},
      {"layering/structuring", "funds are split or routed through many transactions or counterparties to obscure their origin"},
      {"wire fraud", "funds are obtained through misrepresentation of an offering"},
  });
}

/// Wallet statistics listed in the "Actual Node Values" block, in display order.
inline const std::vector<std::string>& default_display_stats() {
  static const std::vector<std::string> kStats = {
      "total_txs",          "btc_received_total",  "btc_sent_total",       "num_txs_as_sender",
      "num_txs_as_receiver", "btc_transacted_total", "fees_total",          "degree",
  };
  return kStats;
}

/// Up to six significant digits, integral values shown with a trailing ".0";
/// `degree` is a count and renders as an integer.
inline std::string format_stat(std::string_view name, double value) {
  char buf[64];
  if (name == "degree" && std::isfinite(value) && value == std::floor(value)) {
    std::snprintf(buf, sizeof buf, "%.0f", value);
    return buf;
  }
  std::snprintf(buf, sizeof buf, "%.6g", value);
  std::string out = buf;
  if (std::isfinite(value) && out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

struct PromptOptions {
  std::size_t top_m = 3;
  std::vector<std::string> display_stats = default_display_stats();
};

struct PromptBundle {
  std::string node_id;
  std::vector<std::string> formatted_weights;  // "name: 9.941e-01"
  std::vector<std::string> formatted_data;     // header lines, blank separator, "name: value"
  std::vector<std::string> fraud_types;
  std::string weights_block;
  std::string data_block;
  std::string rendered_prompt;
  std::string template_version{kPromptTemplateVersion};

  std::string weights_hash() const {
    std::string joined;
    for (const auto& line : formatted_weights) joined += line + '\n';
    return sha256_hex(joined);
  }
  std::string cache_key() const { return node_id + '|' + weights_hash() + '|' + template_version; }
};

inline constexpr std::string_view kDegenerateNotice =
    "Note: degenerate explanation - every importance score is zero, so the neighborhood gives no feature attribution.";

/// Substitutes every placeholder in `tmpl`; throws if any remain.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 512);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find('}', open);
    out.append(tmpl.substr(pos, open - pos));
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const std::string key(tmpl.substr(open + 1, close - open - 1));
    if (auto it = values.find(key); it != values.end()) {
      out += it->second;
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  for (const auto& [key, _] : values) {
    if (out.find('{' + key + '}') != std::string::npos) {
      throw TriageError(Errc::validation, "unfilled placeholder {" + key + "}");
    }
  }
  return out;
}

inline PromptBundle build_prompt(const WalletNode& node, const std::vector<std::string>& schema,
                                 const ExplanationWeights& weights, const FraudTypeCatalog& catalog,
                                 const PromptOptions& options = {}) {
  PromptBundle bundle;
  bundle.node_id = node.address;

  // Equal weights keep schema order.
  auto ordered = weights.weights;
  const auto rank = [&](const std::string& name) {
    const auto it = std::find(schema.begin(), schema.end(), name);
    return static_cast<std::size_t>(it - schema.begin());
  };
  std::stable_sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return rank(a.first) < rank(b.first);
  });
  if (ordered.size() > options.top_m) ordered.resize(options.top_m);
  for (const auto& [name, value] : ordered) bundle.formatted_weights.push_back(name + ": " + format_weight(value));

  bundle.formatted_data.push_back(
      "Type: " + std::string(to_string(node.class_label.value_or(ClassLabel::unknown))));
  std::string code = "N/A";
  if (node.class_label) {
    code = *node.class_label == ClassLabel::illicit ? "1" : *node.class_label == ClassLabel::licit ? "2" : "3";
  }
  bundle.formatted_data.push_back("Class Label: " + code);
  bundle.formatted_data.push_back("Time Step: " + (node.time_step ? std::to_string(*node.time_step) : "N/A"));
  bundle.formatted_data.push_back("Lifetime (blocks): " + format_stat("lifetime", node.lifetime_blocks));
  bundle.formatted_data.emplace_back();
  for (const auto& stat : options.display_stats) {
    const auto it = std::find(schema.begin(), schema.end(), stat);
    if (it == schema.end()) continue;
    const auto f = static_cast<std::size_t>(it - schema.begin());
    bundle.formatted_data.push_back(stat + ": " + format_stat(stat, node.features.at(f)));
  }

  for (const auto& e : catalog.entries()) bundle.fraud_types.push_back(e.name);

  for (std::size_t i = 0; i < bundle.formatted_weights.size(); ++i) {
    if (i) bundle.weights_block += '\n';
    bundle.weights_block += "- " + bundle.formatted_weights[i];
  }
  if (weights.all_zero()) {
    if (!bundle.weights_block.empty()) bundle.weights_block += '\n';
    bundle.weights_block += kDegenerateNotice;
  }
  for (std::size_t i = 0; i < bundle.formatted_data.size(); ++i) {
    if (i) bundle.data_block += '\n';
    const auto& line = bundle.formatted_data[i];
    // Header lines (before the blank separator) are unbulleted.
    const bool is_stat = i > 4;
    bundle.data_block += (is_stat && !line.empty() ? "- " : "") + line;
  }

  bundle.rendered_prompt = render_template(kAnalystPromptTemplate, {
                                                                        {"node_id", bundle.node_id},
                                                                        {"formatted_weights", bundle.weights_block},
                                                                        {"formatted_data", bundle.data_block},
                                                                        {"fraud_types", catalog.names_joined()},
                                                                    });
  return bundle;
}

// ---------------------------------------------------------------------------
// Narrative parsing

struct NarrativeParts {
  std::string behavior_analysis;
  std::string fraud_classification;
  std::string fairness_judgment;
};

namespace detail {

inline std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

/// If `line` opens numbered section 1..3 ("2. ...", "**2.** ...", "## 2) ..."), returns
/// the number and the remainder of the line.
inline std::optional<std::pair<int, std::string>> section_marker(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '*' || line[i] == '#')) ++i;
  if (i + 1 >= line.size() || line[i] < '1' || line[i] > '3') return std::nullopt;
  if (line[i + 1] != '.' && line[i + 1] != ')') return std::nullopt;
  const int number = line[i] - '0';
  i += 2;
  while (i < line.size() && line[i] == '*') ++i;
  return std::make_pair(number, trim_copy(line.substr(i)));
}

}  // namespace detail

/// Splits a reply into its numbered parts 1, 2 and 3. Returns nullopt unless all
/// three are found in order and non-empty. Never throws.
inline std::optional<NarrativeParts> parse_narrative(std::string_view text) noexcept {
  try {
    std::array<std::string, 3> parts;
    int current = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      const auto line = text.substr(start, end - start);
      if (auto marker = detail::section_marker(line); marker && marker->first == current + 1) {
        current = marker->first;
        parts[static_cast<std::size_t>(current - 1)] = marker->second;
      } else if (current > 0) {
        auto& part = parts[static_cast<std::size_t>(current - 1)];
        part += '\n';
        part += line;
      }
      start = end + 1;
    }
    if (current != 3) return std::nullopt;
    NarrativeParts out{detail::trim_copy(parts[0]), detail::trim_copy(parts[1]), detail::trim_copy(parts[2])};
    if (out.behavior_analysis.empty() || out.fraud_classification.empty() || out.fairness_judgment.empty()) {
      return std::nullopt;
    }
    return out;
  } catch (...) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Backends

enum class NarrativeSource { llm, offline_stub };

inline std::string_view to_string(NarrativeSource s) { return s == NarrativeSource::llm ? "llm" : "offline_stub"; }

struct NarratorConfig {
  std::string backend = "stub";  // "stub" or "llm"
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_ms = 30000;
  int max_retries = 3;
  int backoff_ms = 250;
  int concurrency = 4;
  std::string cache_dir;  // empty: in-memory cache only

  void validate() const {
    if (backend != "stub" && backend != "llm") throw TriageError(Errc::validation, "narrator backend must be stub or llm");
    if (timeout_ms <= 0 || max_retries < 0 || backoff_ms < 0 || concurrency < 1) {
      throw TriageError(Errc::validation, "narrator timeout/retry/concurrency settings out of range");
    }
  }
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the assistant message text for one single-turn request.
  virtual std::string complete(const PromptBundle& bundle) = 0;
  virtual NarrativeSource source() const = 0;
  virtual std::string model_name() const = 0;
};

/// Deterministic narrative derived from the prompt bundle alone; no network.
class OfflineStubBackend : public ChatBackend {
 public:
  std::string complete(const PromptBundle& bundle) override {
    calls_.fetch_add(1);
    std::ostringstream out;
    const bool degenerate = bundle.weights_block.find(kDegenerateNotice) != std::string::npos;
    out << "1. ";
    if (degenerate || bundle.formatted_weights.empty()) {
      out << "The explainer assigned no non-zero feature importance to this wallet, so the flag cannot be "
             "attributed to a specific feature.";
    } else {
      out << "The anomaly model's explanation is led by " << bundle.formatted_weights.front()
          << " (importance score, not a value).";
      if (bundle.formatted_weights.size() > 1) {
        out << " Other contributing features:";
        for (std::size_t i = 1; i < bundle.formatted_weights.size(); ++i) {
          out << (i > 1 ? ";" : "") << ' ' << bundle.formatted_weights[i];
        }
        out << '.';
      }
    }
    out << " Recorded wallet statistics:";
    bool first = true;
    for (std::size_t i = 5; i < bundle.formatted_data.size(); ++i) {
      out << (first ? " " : "; ") << bundle.formatted_data[i];
      first = false;
    }
    if (first) out << " none";
    out << ".\n";
    out << "2. No fraud type is assigned by the offline backend; candidate types for analyst review: ";
    for (std::size_t i = 0; i < bundle.fraud_types.size(); ++i) out << (i ? ", " : "") << bundle.fraud_types[i];
    out << ".\n";
    out << "3. The offline backend makes no fairness determination; the flag warrants human review before any "
           "action is taken.\n";
    return out.str();
  }
  NarrativeSource source() const override { return NarrativeSource::offline_stub; }
  std::string model_name() const override { return "offline-stub"; }
  int calls() const { return calls_.load(); }

 private:
  std::atomic<int> calls_{0};
};

/// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw TriageError(Errc::validation, "base_url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

/// JSON chat-completion request body: one user message, temperature 0.
inline nlohmann::json chat_request_body(const std::string& model, const std::string& prompt) {
  return {{"model", model},
          {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", 0}};
}

class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(NarratorConfig config) : config_(std::move(config)) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

  std::string complete(const PromptBundle& bundle) override {
    if (bundle.rendered_prompt.find("{node_id}") != std::string::npos ||
        bundle.rendered_prompt.find("{formatted_weights}") != std::string::npos ||
        bundle.rendered_prompt.find("{formatted_data}") != std::string::npos ||
        bundle.rendered_prompt.find("{fraud_types}") != std::string::npos) {
      throw TriageError(Errc::validation, "refusing to send a prompt with unfilled placeholders");
    }
    if (api_key_.empty()) {
      throw TriageError(Errc::auth_failure, "no API key in environment variable " + config_.api_key_env);
    }
    const auto [host, prefix] = split_base_url(config_.base_url);
    httplib::Client client(host);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    const std::string body = chat_request_body(config_.model, bundle.rendered_prompt).dump();

    std::string last_error;
    bool rate_limited = false;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms) * (1 << (attempt - 1)));
      }
      requests_.fetch_add(1);
      auto res = client.Post(prefix + "/chat/completions", headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        rate_limited = false;
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw TriageError(Errc::auth_failure, "chat endpoint rejected credentials (HTTP " +
                                                  std::to_string(res->status) + ")");
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        rate_limited = res->status == 429;
        continue;
      }
      if (res->status != 200) {
        throw TriageError(Errc::transport, "chat endpoint returned HTTP " + std::to_string(res->status));
      }
      return extract_content(res->body);
    }
    throw TriageError(rate_limited ? Errc::rate_limited : Errc::transport,
                      "chat request failed after " + std::to_string(config_.max_retries + 1) +
                          " attempts: " + last_error);
  }

  NarrativeSource source() const override { return NarrativeSource::llm; }
  std::string model_name() const override { return config_.model; }
  int requests() const { return requests_.load(); }

  /// choices[0].message.content, or the raw body when it is not a chat-completion document.
  static std::string extract_content(const std::string& body) {
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded()) return body;
    try {
      return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return body;
    }
  }

 private:
  NarratorConfig config_;
  std::string api_key_;
  std::atomic<int> requests_{0};
};

inline std::unique_ptr<ChatBackend> make_backend(const NarratorConfig& config) {
  config.validate();
  if (config.backend == "llm") return std::make_unique<HttpChatBackend>(config);
  return std::make_unique<OfflineStubBackend>();
}

// ---------------------------------------------------------------------------
// Narrator

struct Explanation {
  std::string node_id;
  std::string behavior_analysis;
  std::string fraud_classification;
  std::string fairness_judgment;
  std::string raw_response;
  std::string model_name;
  std::string created_at;
  NarrativeSource source = NarrativeSource::offline_stub;
  std::string template_version{kPromptTemplateVersion};
  bool parse_failed = false;
};

inline nlohmann::ordered_json to_json(const Explanation& e) {
  nlohmann::ordered_json doc;
  doc["node_id"] = e.node_id;
  doc["source"] = to_string(e.source);
  doc["model_name"] = e.model_name;
  doc["created_at"] = e.created_at;
  doc["template_version"] = e.template_version;
  doc["parse_failed"] = e.parse_failed;
  doc["behavior_analysis"] = e.behavior_analysis;
  doc["fraud_classification"] = e.fraud_classification;
  doc["fairness_judgment"] = e.fairness_judgment;
  doc["raw_response"] = e.raw_response;
  return doc;
}

inline Explanation narrative_from_json(const nlohmann::ordered_json& doc) {
  try {
    Explanation e;
    e.node_id = doc.at("node_id").get<std::string>();
    e.source = doc.at("source").get<std::string>() == "llm" ? NarrativeSource::llm : NarrativeSource::offline_stub;
    e.model_name = doc.at("model_name").get<std::string>();
    e.created_at = doc.at("created_at").get<std::string>();
    e.template_version = doc.at("template_version").get<std::string>();
    e.parse_failed = doc.at("parse_failed").get<bool>();
    e.behavior_analysis = doc.at("behavior_analysis").get<std::string>();
    e.fraud_classification = doc.at("fraud_classification").get<std::string>();
    e.fairness_judgment = doc.at("fairness_judgment").get<std::string>();
    e.raw_response = doc.at("raw_response").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw TriageError(Errc::parse, std::string("narrative document: ") + ex.what());
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Builds an Explanation from a raw reply; unparseable replies are kept with parse_failed set.
inline Explanation explanation_from_response(const std::string& node_id, const std::string& raw,
                                             const ChatBackend& backend, std::string created_at) {
  Explanation e;
  e.node_id = node_id;
  e.raw_response = raw;
  e.model_name = backend.model_name();
  e.source = backend.source();
  e.created_at = std::move(created_at);
  if (auto parts = parse_narrative(raw)) {
    e.behavior_analysis = std::move(parts->behavior_analysis);
    e.fraud_classification = std::move(parts->fraud_classification);
    e.fairness_judgment = std::move(parts->fairness_judgment);
  } else {
    e.parse_failed = true;
  }
  return e;
}

/// Calls the backend at most once per (node, weights, template) key and bounds
/// the number of in-flight requests.
class Narrator {
 public:
  using Clock = std::function<std::string()>;

  Narrator(std::unique_ptr<ChatBackend> backend, NarratorConfig config, Clock clock = utc_timestamp)
      : backend_(std::move(backend)),
        config_(std::move(config)),
        clock_(std::move(clock)),
        in_flight_(std::max(1, config_.concurrency)) {}

  explicit Narrator(const NarratorConfig& config) : Narrator(make_backend(config), config) {}

  Explanation narrate(const PromptBundle& bundle) {
    const auto key = bundle.cache_key();
    std::shared_ptr<std::mutex> key_lock;
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
      auto& slot = key_locks_[key];
      if (!slot) slot = std::make_shared<std::mutex>();
      key_lock = slot;
    }
    std::lock_guard per_key(*key_lock);
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    if (auto stored = load_from_disk(key)) {
      std::lock_guard lock(mutex_);
      return cache_.emplace(key, *stored).first->second;
    }

    std::string raw;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& sem;
        ~Release() { sem.release(); }
      } release{in_flight_};
      backend_calls_.fetch_add(1);
      raw = backend_->complete(bundle);
    }
    auto explanation = explanation_from_response(bundle.node_id, raw, *backend_, clock_());
    explanation.template_version = bundle.template_version;
    store_to_disk(key, explanation);
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(explanation)).first->second;
  }

  int backend_calls() const { return backend_calls_.load(); }
  const ChatBackend& backend() const { return *backend_; }

 private:
  std::optional<std::filesystem::path> cache_path(const std::string& key) const {
    if (config_.cache_dir.empty()) return std::nullopt;
    return std::filesystem::path(config_.cache_dir) / (sha256_hex(key).substr(0, 32) + ".json");
  }

  std::optional<Explanation> load_from_disk(const std::string& key) const {
    const auto path = cache_path(key);
    if (!path || !std::filesystem::exists(*path)) return std::nullopt;
    std::ifstream in(*path);
    const auto doc = nlohmann::ordered_json::parse(in, nullptr, false);
    if (doc.is_discarded() || doc.value("cache_key", "") != key) return std::nullopt;
    return narrative_from_json(doc.at("explanation"));
  }

  void store_to_disk(const std::string& key, const Explanation& e) const {
    const auto path = cache_path(key);
    if (!path) return;
    std::filesystem::create_directories(path->parent_path());
    nlohmann::ordered_json doc;
    doc["cache_key"] = key;
    doc["explanation"] = to_json(e);
    const auto tmp = path->string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, *path);
  }

  std::unique_ptr<ChatBackend> backend_;
  NarratorConfig config_;
  Clock clock_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<int> backend_calls_{0};
  std::mutex mutex_;
  std::map<std::string, Explanation> cache_;
  std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
};

}  // namespace cryptotriage
