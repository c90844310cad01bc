#include "synplug/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>

namespace synplug {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

PromptTemplate PromptTemplate::parse(const std::string& text) {
  PromptTemplate t;
  std::string literal;
  std::size_t i = 0;
  auto flush = [&]() {
    if (!literal.empty()) {
      t.segments_.push_back({Segment::Kind::literal, literal, KnowledgeKind::dep});
      literal.clear();
    }
  };
  while (i < text.size()) {
    char c = text[i];
    if (c != '{') {
      if (c == '}') throw ValidationError("template: stray '}' at offset " + std::to_string(i));
      literal.push_back(c);
      ++i;
      continue;
    }
    std::size_t close = text.find('}', i);
    if (close == std::string::npos)
      throw ValidationError("template: unclosed '{' at offset " + std::to_string(i));
    std::string name = text.substr(i + 1, close - i - 1);
    flush();
    if (name == "sentence") {
      t.segments_.push_back({Segment::Kind::sentence, "", KnowledgeKind::dep});
    } else if (name == "aspect") {
      t.segments_.push_back({Segment::Kind::aspect, "", KnowledgeKind::dep});
    } else if (name.rfind("plugin:", 0) == 0) {
      KnowledgeKind kind = parse_kind(name.substr(7));
      t.segments_.push_back({Segment::Kind::plugin, "", kind});
      if (std::find(t.slots_.begin(), t.slots_.end(), kind) == t.slots_.end())
        t.slots_.push_back(kind);
    } else {
      throw ValidationError("template: unknown placeholder {" + name + "}");
    }
    i = close + 1;
  }
  flush();
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open template: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text);
}

std::string PromptTemplate::render(const AbsaInstance& inst,
                                   const std::map<KnowledgeKind, Polarity>& plugin_preds,
                                   const std::function<void(const std::string&)>& warn) const {
  for (const auto& [kind, pred] : plugin_preds) {
    (void)pred;
    if (std::find(slots_.begin(), slots_.end(), kind) == slots_.end() && warn)
      warn("prediction for kind \"" + kind_name(kind) + "\" has no slot in the template");
  }
  std::string out;
  for (const Segment& s : segments_) {
    switch (s.kind) {
      case Segment::Kind::literal:
        out += s.text;
        break;
      case Segment::Kind::sentence:
        out += inst.sentence_text();
        break;
      case Segment::Kind::aspect:
        out += inst.aspect_text();
        break;
      case Segment::Kind::plugin: {
        auto it = plugin_preds.find(s.plugin_kind);
        if (it == plugin_preds.end())
          throw ValidationError("template: no prediction supplied for slot {plugin:" +
                                kind_name(s.plugin_kind) + "}");
        out += polarity_name(it->second);
        break;
      }
    }
  }
  return out;
}

std::string render_prompt(const PromptTemplate& t, const AbsaInstance& inst,
                          const std::map<KnowledgeKind, Polarity>& plugin_preds) {
  return t.render(inst, plugin_preds);
}

// ---------------------------------------------------------------------------
// Label parsing
// ---------------------------------------------------------------------------

LabelParse parse_label(const std::string& text) {
  std::string lower(text.size(), '\0');
  std::transform(text.begin(), text.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  LabelParse parse;
  std::vector<Polarity> found;
  for (Polarity p : {Polarity::positive, Polarity::neutral, Polarity::negative}) {
    if (lower.find(polarity_name(p)) != std::string::npos) found.push_back(p);
  }
  if (found.size() == 1) {
    parse.label = found[0];
  } else {
    parse.failure = found.empty() ? LabelParse::Failure::none_found
                                  : LabelParse::Failure::multiple_found;
  }
  return parse;
}

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host:port
  std::string path_prefix;
};

ParsedUrl parse_endpoint(const std::string& url) {
  std::size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw ValidationError("endpoint must include a scheme: " + url);
  std::size_t slash = url.find('/', scheme + 3);
  ParsedUrl p;
  if (slash == std::string::npos) {
    p.base = url;
  } else {
    p.base = url.substr(0, slash);
    p.path_prefix = url.substr(slash);
    while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
  }
  return p;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Transport make_http_transport(const ChatConfig& cfg) {
  ParsedUrl url = parse_endpoint(cfg.endpoint);
  std::string path = url.path_prefix + "/chat/completions";
  std::string api_key;
  if (const char* k = std::getenv(cfg.api_key_env.c_str())) api_key = k;
  int timeout = cfg.timeout_s;
  return [url, path, api_key, timeout](const std::string& body) {
    httplib::Client client(url.base);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    auto res = client.Post(path, headers, body, "application/json");
    HttpResponse out;
    if (!res) {
      out.transport_error = true;
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  };
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

void AuditLog::append(const json& entry) {
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw ValidationError("cannot write audit log: " + path_.string());
  out << entry.dump() << "\n";
}

Transport make_replay_transport(const std::filesystem::path& audit_path) {
  std::ifstream in(audit_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open audit log: " + audit_path.string());
  struct State {
    std::mutex mu;  // callers may run concurrently
    std::unordered_map<std::string, std::deque<HttpResponse>> queues;
  };
  auto state = std::make_shared<State>();
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(audit_path.string() + " line " + std::to_string(ln) +
                            ": malformed audit entry: " + e.what());
    }
    HttpResponse r;
    r.status = j.value("status", 0);
    r.body = j.value("response_raw", "");
    r.transport_error = j.value("transport_error", false);
    r.error = j.value("error", "");
    state->queues[j.at("request").dump()].push_back(std::move(r));
  }
  return [state, audit_path](const std::string& body) {
    std::lock_guard<std::mutex> lock(state->mu);
    auto it = state->queues.find(body);
    if (it == state->queues.end() || it->second.empty())
      throw NetworkError("replay: no recorded response for request in " + audit_path.string());
    HttpResponse r = std::move(it->second.front());
    it->second.pop_front();
    return r;
  };
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

ChatClient::ChatClient(ChatConfig cfg, AuditLog* audit, Transport transport)
    : cfg_(std::move(cfg)), audit_(audit), transport_(std::move(transport)) {
  if (!transport_) transport_ = make_http_transport(cfg_);
}

json ChatClient::build_request(const std::string& prompt) const {
  return json{{"model", cfg_.model},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
              {"temperature", cfg_.temperature},
              {"max_tokens", cfg_.max_tokens}};
}

std::string ChatClient::extract_text(const json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty())
    throw NetworkError("malformed response body: missing choices");
  const json& msg = response["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content") ||
      !msg["message"]["content"].is_string())
    throw NetworkError("malformed response body: missing message content");
  return msg["message"]["content"].get<std::string>();
}

ChatResult ChatClient::complete(const std::string& prompt) const {
  const std::string body = build_request(prompt).dump();
  const int max_attempts = cfg_.max_retries + 1;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    std::int64_t t0 = now_ms();
    HttpResponse res = transport_(body);
    std::int64_t t1 = now_ms();

    if (audit_) {
      json entry = {{"ts_request_ms", t0},
                    {"ts_response_ms", t1},
                    {"endpoint", cfg_.endpoint},
                    {"attempt", attempt},
                    {"request", build_request(prompt)},
                    {"status", res.status},
                    {"transport_error", res.transport_error},
                    {"response_raw", res.body}};
      if (!res.error.empty()) entry["error"] = res.error;
      audit_->append(entry);
    }

    if (res.status == 401 || res.status == 403)
      throw NetworkError("authentication failed (HTTP " + std::to_string(res.status) +
                         "), not retrying");

    bool retryable = res.transport_error || res.status == 429 || res.status >= 500;
    if (!retryable) {
      if (res.status != 200)
        throw NetworkError("HTTP " + std::to_string(res.status) + ": " + res.body);
      json parsed;
      try {
        parsed = json::parse(res.body);
      } catch (const json::parse_error& e) {
        throw NetworkError(std::string("malformed response body: ") + e.what());
      }
      ChatResult out;
      out.text = extract_text(parsed);
      out.attempts = attempt;
      out.status = res.status;
      return out;
    }

    if (attempt == max_attempts)
      throw NetworkError("retries exhausted after " + std::to_string(attempt) + " attempts (" +
                         (res.transport_error ? res.error : "HTTP " + std::to_string(res.status)) +
                         ")");
    int delay = cfg_.backoff_base_ms << (attempt - 1);
    std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }
  throw NetworkError("unreachable");
}

}  // namespace synplug
