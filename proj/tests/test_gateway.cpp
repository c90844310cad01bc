#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "synplug/gateway.hpp"

using namespace synplug;
using nlohmann::json;

namespace {

AbsaInstance bar_service_instance() {
  AbsaInstance inst;
  inst.id = "s1";
  std::vector<std::string> words = {"The", "environment", "is", "fantastic",
                                    "although", "bar",   "service", "is",
                                    "poor",   "."};
  for (std::size_t i = 0; i < words.size(); ++i) inst.tokens.push_back(Token{i, words[i]});
  inst.aspect = {5, 7};
  return inst;
}

std::string chat_body(const std::string& content) {
  return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}}.dump();
}

// Scripted one-shot HTTP server; each request consumes the next (status,
// body) pair.
struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::vector<std::pair<int, std::string>> script;
  std::atomic<int> hits{0};

  explicit MockServer(std::vector<std::pair<int, std::string>> responses)
      : script(std::move(responses)) {
    server.Post("/v1/chat/completions",
                [this](const httplib::Request&, httplib::Response& res) {
                  int i = hits.fetch_add(1);
                  auto& [status, body] =
                      script[std::min<std::size_t>(i, script.size() - 1)];
                  res.status = status;
                  res.set_content(body, "application/json");
                });
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockServer() {
    server.stop();
    thread.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

ChatConfig fast_config(const std::string& endpoint) {
  ChatConfig cfg;
  cfg.endpoint = endpoint;
  cfg.model = "mock-model";
  cfg.backoff_base_ms = 20;  // keep retry tests fast
  cfg.timeout_s = 5;
  return cfg;
}

}  // namespace

TEST_CASE("render_prompt fills the plugin-prediction slot verbatim") {
  PromptTemplate t = PromptTemplate::parse(
      "Sentence: {sentence}\nAspect: {aspect}\nThe prediction of the plugin is {plugin:dep}.");
  std::string got =
      t.render(bar_service_instance(), {{KnowledgeKind::dep, Polarity::positive}});
  CHECK(got.find("The prediction of the plugin is positive.") != std::string::npos);
  CHECK(got.find("bar service") != std::string::npos);
  CHECK(got.find("The environment is fantastic although bar service is poor .") !=
        std::string::npos);
}

TEST_CASE("a template without slots renders as the zero-knowledge prompt") {
  PromptTemplate t = PromptTemplate::parse("What is the sentiment of {aspect} in {sentence}?");
  CHECK(t.plugin_slots().empty());
  std::string got = t.render(bar_service_instance(), {});
  CHECK(got == "What is the sentiment of bar service in The environment is fantastic although "
               "bar service is poor .?");
}

TEST_CASE("rendering twice is byte-identical") {
  PromptTemplate t = PromptTemplate::parse(
      "{sentence} | {aspect} | {plugin:dep} {plugin:const} {plugin:ccg}");
  std::map<KnowledgeKind, Polarity> preds = {{KnowledgeKind::dep, Polarity::negative},
                                             {KnowledgeKind::constituent, Polarity::neutral},
                                             {KnowledgeKind::ccg, Polarity::positive}};
  CHECK(t.render(bar_service_instance(), preds) == t.render(bar_service_instance(), preds));
}

TEST_CASE("a declared slot without a prediction fails naming the slot") {
  PromptTemplate t = PromptTemplate::parse("The prediction of the plugin is {plugin:ccg}.");
  CHECK_THROWS_WITH_AS(t.render(bar_service_instance(), {}), doctest::Contains("plugin:ccg"),
                       ValidationError);
}

TEST_CASE("extra predictions without slots only warn") {
  PromptTemplate t = PromptTemplate::parse("{sentence}");
  int warnings = 0;
  t.render(bar_service_instance(), {{KnowledgeKind::dep, Polarity::positive}},
           [&](const std::string&) { ++warnings; });
  CHECK(warnings == 1);
}

TEST_CASE("unknown placeholders are rejected at load time") {
  CHECK_THROWS_WITH_AS(PromptTemplate::parse("hello {world}"), doctest::Contains("{world}"),
                       ValidationError);
  CHECK_THROWS_AS(PromptTemplate::parse("{plugin:bogus}"), ValidationError);
  CHECK_THROWS_AS(PromptTemplate::parse("unclosed {sentence"), ValidationError);
}

TEST_CASE("parse_label matches exactly one polarity keyword") {
  CHECK(*parse_label("positive").label == Polarity::positive);
  CHECK(*parse_label("The sentiment is Negative.").label == Polarity::negative);
  LabelParse multi = parse_label("either positive or negative");
  CHECK_FALSE(multi.ok());
  CHECK(multi.failure == LabelParse::Failure::multiple_found);
  LabelParse none = parse_label("I cannot tell.");
  CHECK_FALSE(none.ok());
  CHECK(none.failure == LabelParse::Failure::none_found);
  // Repetition of the same keyword still counts once.
  CHECK(*parse_label("negative, definitely negative").label == Polarity::negative);
}

TEST_CASE("parse_label round-trips every gold polarity word") {
  for (Polarity p : {Polarity::positive, Polarity::neutral, Polarity::negative}) {
    PromptTemplate t = PromptTemplate::parse("The prediction of the plugin is {plugin:dep}.");
    std::string rendered = t.render(bar_service_instance(), {{KnowledgeKind::dep, p}});
    CHECK(*parse_label(rendered).label == p);
  }
}

TEST_CASE("chat_complete returns the first choice's text") {
  MockServer mock({{200, chat_body("negative")}});
  ChatClient client(fast_config(mock.endpoint()));
  ChatResult res = client.complete("hello");
  CHECK(res.text == "negative");
  CHECK(res.attempts == 1);
  CHECK(mock.hits.load() == 1);
}

TEST_CASE("429 twice then 200 succeeds with exactly three attempts") {
  MockServer mock({{429, "slow down"}, {429, "slow down"}, {200, chat_body("neutral")}});
  ChatClient client(fast_config(mock.endpoint()));
  ChatResult res = client.complete("hi");
  CHECK(res.text == "neutral");
  CHECK(res.attempts == 3);
  CHECK(mock.hits.load() == 3);
}

TEST_CASE("auth failures never retry") {
  MockServer mock({{401, "no"}});
  ChatClient client(fast_config(mock.endpoint()));
  CHECK_THROWS_AS(client.complete("hi"), NetworkError);
  CHECK(mock.hits.load() == 1);
}

TEST_CASE("server errors exhaust retries then fail") {
  MockServer mock({{500, "boom"}, {503, "boom"}, {500, "boom"}, {500, "boom"}, {500, "boom"}});
  ChatConfig cfg = fast_config(mock.endpoint());
  ChatClient client(cfg);
  CHECK_THROWS_WITH_AS(client.complete("hi"), doctest::Contains("retries exhausted"),
                       NetworkError);
  CHECK(mock.hits.load() == cfg.max_retries + 1);
}

TEST_CASE("malformed response bodies are reported") {
  MockServer mock({{200, "{\"nope\":1}"}});
  ChatClient client(fast_config(mock.endpoint()));
  CHECK_THROWS_WITH_AS(client.complete("hi"), doctest::Contains("malformed response"),
                       NetworkError);
}

TEST_CASE("the audit log records every attempt and replays identically") {
  auto audit_path = std::filesystem::temp_directory_path() / "audit_replay.jsonl";
  std::filesystem::remove(audit_path);
  {
    MockServer mock({{429, "wait"}, {200, chat_body("positive")}, {200, chat_body("negative")}});
    AuditLog audit(audit_path);
    ChatClient client(fast_config(mock.endpoint()), &audit);
    CHECK(client.complete("prompt-A").text == "positive");
    CHECK(client.complete("prompt-B").text == "negative");
  }
  // Three attempts -> three audit lines.
  std::ifstream in(audit_path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 3);

  // Offline replay, no server: same prompts give the same answers including
  // the retry sequence.
  ChatConfig cfg = fast_config("http://replay.invalid/v1");
  ChatClient replayed(cfg, nullptr, make_replay_transport(audit_path));
  ChatResult a = replayed.complete("prompt-A");
  CHECK(a.text == "positive");
  CHECK(a.attempts == 2);
  CHECK(replayed.complete("prompt-B").text == "negative");
  // A prompt that was never recorded cannot be served.
  CHECK_THROWS_AS(replayed.complete("prompt-C"), NetworkError);
}

TEST_CASE("transport errors retry and surface after exhaustion") {
  // Port 1 on localhost refuses connections.
  ChatConfig cfg = fast_config("http://127.0.0.1:1/v1");
  cfg.max_retries = 1;
  ChatClient client(cfg);
  CHECK_THROWS_AS(client.complete("hi"), NetworkError);
}
