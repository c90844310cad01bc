#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synplug/corpus.hpp"
#include "synplug/knowledge.hpp"

namespace synplug {

// ---------------------------------------------------------------------------
// Prompt templates. Plain text with {sentence}, {aspect} and zero or more
// {plugin:dep|const|ccg} placeholders; anything else in braces is rejected
// when the template is loaded.
// ---------------------------------------------------------------------------
class PromptTemplate {
 public:
  static PromptTemplate parse(const std::string& text);
  static PromptTemplate load(const std::filesystem::path& path);

  // Kinds with a {plugin:...} slot, in order of first appearance.
  const std::vector<KnowledgeKind>& plugin_slots() const { return slots_; }

  // Byte-stable substitution. Throws if a declared slot has no prediction;
  // predictions without a slot trigger `warn` (when set) and are ignored.
  std::string render(const AbsaInstance& inst,
                     const std::map<KnowledgeKind, Polarity>& plugin_preds,
                     const std::function<void(const std::string&)>& warn = nullptr) const;

 private:
  struct Segment {
    enum class Kind { literal, sentence, aspect, plugin } kind;
    std::string text;            // literal text
    KnowledgeKind plugin_kind;   // for plugin segments
  };
  std::vector<Segment> segments_;
  std::vector<KnowledgeKind> slots_;
};

std::string render_prompt(const PromptTemplate& t, const AbsaInstance& inst,
                          const std::map<KnowledgeKind, Polarity>& plugin_preds);

// ---------------------------------------------------------------------------
// Label parsing: case-insensitive scan for the three polarity keywords.
// Exactly one distinct keyword is a parse; zero or several is a failure.
// ---------------------------------------------------------------------------
struct LabelParse {
  std::optional<Polarity> label;
  enum class Failure { none_found, multiple_found } failure = Failure::none_found;

  bool ok() const { return label.has_value(); }
};

LabelParse parse_label(const std::string& text);

// ---------------------------------------------------------------------------
// Chat-completion client, OpenAI-compatible wire format.
// ---------------------------------------------------------------------------
struct ChatConfig {
  std::string endpoint;            // e.g. http://127.0.0.1:8080/v1
  std::string model;
  double temperature = 0.0;
  int max_tokens = 16;
  int max_retries = 3;             // retries after the initial attempt
  int backoff_base_ms = 1000;      // 1s, 2s, 4s by default
  int timeout_s = 30;
  std::string api_key_env = "LLM_API_KEY";
};

struct HttpResponse {
  int status = 0;
  std::string body;
  bool transport_error = false;  // connect failure / timeout
  std::string error;
};

// POSTs `body` to <endpoint>/chat/completions and returns the raw response.
using Transport = std::function<HttpResponse(const std::string& body)>;

Transport make_http_transport(const ChatConfig& cfg);

// Appends one JSON line per completed exchange; thread-safe.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  void append(const nlohmann::json& entry);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

// Serves recorded responses keyed by exact request body; repeated identical
// requests replay in recorded order. Lets a recorded session be re-run
// offline with identical outputs.
Transport make_replay_transport(const std::filesystem::path& audit_path);

struct ChatResult {
  std::string text;   // first choice's message content
  int attempts = 0;
  int status = 0;
};

// Sends one prompt. 429/5xx/transport errors retry with exponential backoff
// (base 1s: 1s, 2s, 4s); auth failures (401/403) never retry. Throws
// NetworkError when attempts are exhausted or the response is malformed.
class ChatClient {
 public:
  ChatClient(ChatConfig cfg, AuditLog* audit = nullptr, Transport transport = nullptr);

  ChatResult complete(const std::string& prompt) const;
  const ChatConfig& config() const { return cfg_; }

  nlohmann::json build_request(const std::string& prompt) const;
  static std::string extract_text(const nlohmann::json& response);

 private:
  ChatConfig cfg_;
  AuditLog* audit_;
  Transport transport_;
};

}  // namespace synplug
