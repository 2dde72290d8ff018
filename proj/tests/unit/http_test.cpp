#include <gtest/gtest.h>

#include "mpcprobe/http_backend.hpp"
#include "mpcprobe/scoring.hpp"
#include "test_support.hpp"

using namespace mpcprobe;

namespace {

std::string fixture(const std::string& name) {
  auto s = read_file(support::fixture_dir() / "http" / name);
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

const std::string kContext = "[INST]<<SYS>> s <</SYS>> i [/INST] The next message is: ";

RetryPolicy fast_retry() {
  RetryPolicy p;
  p.base_delay = std::chrono::milliseconds(5);
  return p;
}

}  // namespace

TEST(Wire, RequestBodiesMatchRecordedFixtures) {
  EXPECT_EQ(wire::logprobs_request(kContext, "did you reboot?"), fixture("logprobs_request.json"));
  EXPECT_EQ(wire::generate_request("List one topic:\nTopic 1: <title> - <explanation>", 16),
            fixture("generate_request.json"));
}

TEST(Wire, ResponseParsing) {
  auto r = wire::parse_logprobs_response(fixture("logprobs_response.json"));
  EXPECT_EQ(r.tokens, (std::vector<std::string>{"did", "you", "reboot?"}));
  ASSERT_EQ(r.logprobs.size(), 3u);
  EXPECT_EQ(r.logprobs[0], -1.9419966155933581);

  auto base2 = wire::parse_logprobs_response(R"({"tokens":["a"],"logprobs":[-1.0],"log_base":"2"})");
  EXPECT_NEAR(base2.logprobs[0], -std::log(2.0), 1e-15);
  EXPECT_THROW(wire::parse_logprobs_response(R"({"tokens":["a"],"logprobs":[-1.0],"log_base":"7"})"), Error);
  EXPECT_THROW(wire::parse_logprobs_response("not json"), Error);
  EXPECT_EQ(wire::parse_generate_response(R"({"text":"hello"})"), "hello");
  EXPECT_THROW(wire::parse_generate_response(R"({"txt":"hello"})"), Error);
}

TEST(StubServer, RecordedExchange) {
  MockBackend model(7);
  StubServer stub(model);
  stub.start();
  HttpBackend http(stub.endpoint());

  auto r = http.continuation_logprobs(kContext, "did you reboot?");
  EXPECT_EQ(r.logprobs, wire::parse_logprobs_response(fixture("logprobs_response.json")).logprobs);
  EXPECT_EQ(r.logprobs, model.continuation_logprobs(kContext, "did you reboot?").logprobs);

  const std::string prompt = "List one topic:\nTopic 1: <title> - <explanation>";
  EXPECT_EQ(http.generate(prompt, 16), model.generate(prompt, 16));

  auto ex = stub.exchanges();
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[0].first, "/v1/logprobs");
  EXPECT_EQ(ex[0].second, fixture("logprobs_request.json"));
  EXPECT_EQ(ex[1].first, "/v1/generate");
  EXPECT_EQ(ex[1].second, fixture("generate_request.json"));
  stub.stop();
}

TEST(StubServer, HttpScoringMatchesMock) {
  MockBackend model(11);
  StubServer stub(model);
  stub.start();
  HttpBackend http(stub.endpoint());
  const std::vector<std::string> cands = {"[ALEX]", "[BENNY]", "[JORDAN]"};
  auto a = score_candidates(kContext, cands, http);
  auto b = score_candidates(kContext, cands, model);
  for (std::size_t i = 0; i < cands.size(); ++i) EXPECT_EQ(a[i].cppl, b[i].cppl);
}

TEST(StubServer, RetryRecoversFromTransientFailures) {
  MockBackend model(1);
  StubServer stub(model);
  stub.start();
  HttpBackend http(stub.endpoint());
  stub.fail_next(2);
  auto r = with_retry(fast_retry(), [&] { return http.continuation_logprobs("ctx ", "x y"); });
  EXPECT_EQ(r.tokens.size(), 2u);
  EXPECT_EQ(stub.exchanges().size(), 3u);

  stub.fail_next(3);
  ScoringOptions opts;
  opts.retry = fast_retry();
  try {
    score_candidates("ctx ", {"a", "b"}, http, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInstanceAborted);
  }
}

TEST(StubServer, ClientErrorsAreNotRetried) {
  MockBackend model(1);
  StubServer stub(model);
  stub.start();
  HttpBackend http(stub.endpoint());
  try {
    http.continuation_logprobs("ctx", "");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmptyContinuation);
  }
  EXPECT_TRUE(stub.exchanges().empty());
}

TEST(HttpBackend, UnreachableEndpointIsRetryable) {
  HttpBackend::Options o;
  o.connect_timeout = std::chrono::seconds(1);
  HttpBackend http("http://127.0.0.1:1", o);
  try {
    http.continuation_logprobs("ctx", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kBackendError);
    EXPECT_TRUE(e.retryable());
  }
}
