#include <gtest/gtest.h>

#include <thread>

#include "g4r/chat_engine.hpp"
#include "g4r/error.hpp"
#include "test_support.hpp"

namespace g4r {
namespace {

using testing::FlakyProvider;
using testing::RecordingProvider;
using testing::TempDir;

InterfaceConfig composed_config() {
  PartialConfig p;
  p.study_name = "composition";
  p.system_prompt = "You are a helpful assistant.";
  p.first_message = "Hi, how can I help?";
  p.prepend_text = "Please be concise";
  p.append_text = "Thank you";
  return apply_defaults(p);
}

MessageExchange past(std::int64_t seq, std::string user, std::string reply) {
  return {SessionId{"s"}, seq, std::move(user), std::move(reply), {}};
}

TEST(Wrap, JoinsWithSingleNewlines) {
  auto cfg = composed_config();
  EXPECT_EQ(wrap_participant_text(cfg, "hello"), "Please be concise\nhello\nThank you");
  cfg.prepend_text.reset();
  EXPECT_EQ(wrap_participant_text(cfg, "hello"), "hello\nThank you");
  cfg.append_text.reset();
  EXPECT_EQ(wrap_participant_text(cfg, "hello"), "hello");
}

TEST(Compose, FullRoleSequence) {
  const auto cfg = composed_config();
  const std::vector<MessageExchange> history{past(1, "first", "reply one")};
  const auto msgs = compose_upstream(cfg, history, "second");
  const std::vector<UpstreamMessage> want{
      {Role::System, "You are a helpful assistant."},
      {Role::Assistant, "Hi, how can I help?"},
      {Role::User, "Please be concise\nfirst\nThank you"},
      {Role::Assistant, "reply one"},
      {Role::User, "Please be concise\nsecond\nThank you"},
  };
  EXPECT_EQ(msgs, want);
}

TEST(Compose, OmitsAbsentSystemAndFirstMessage) {
  PartialConfig p;
  p.study_name = "bare";
  p.first_message = "";
  const auto cfg = apply_defaults(p);
  const auto msgs = compose_upstream(cfg, {}, "only");
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0], (UpstreamMessage{Role::User, "only"}));
}

TEST(Compose, LengthAndAlternationProperty) {
  auto cfg = composed_config();
  for (std::size_t n = 0; n < 12; ++n) {
    std::vector<MessageExchange> history;
    for (std::size_t i = 0; i < n; ++i) history.push_back(past(static_cast<std::int64_t>(i + 1), "u", "a"));
    const auto msgs = compose_upstream(cfg, history, "new");
    ASSERT_EQ(msgs.size(), 2 * n + 3);
    for (std::size_t i = 2; i < msgs.size(); ++i) {
      EXPECT_EQ(msgs[i].role, (i % 2 == 0) ? Role::User : Role::Assistant);
      if (msgs[i].role == Role::User) {
        // Wrapped exactly once: the prepend appears once at the start.
        EXPECT_EQ(msgs[i].content.find("Please be concise"), 0u);
        EXPECT_EQ(msgs[i].content.find("Please be concise", 1), std::string::npos);
      }
    }
  }
}

TEST(Unquote, ReplacesOnlyTheWholeWrappedTurn) {
  const auto cfg = composed_config();
  EXPECT_EQ(unquote_wrapped_turn(cfg, "hi", "echo: Please be concise\nhi\nThank you"), "echo: hi");
  EXPECT_EQ(unquote_wrapped_turn(cfg, "hi", "Thank you for asking"), "Thank you for asking");
  EXPECT_EQ(unquote_wrapped_turn(cfg, "hi", "Please be concise\nhi\nThank you x Please be concise\nhi\nThank you"),
            "hi x hi");
  PartialConfig bare;
  bare.study_name = "s";
  EXPECT_EQ(unquote_wrapped_turn(apply_defaults(bare), "hi", "echo: hi"), "echo: hi");
}

TEST(Quota, ClampsAtZero) {
  ParticipantSession s;
  InterfaceConfig cfg;
  cfg.max_messages = 3;
  s.messages_sent = 1;
  EXPECT_EQ(remaining_quota(s, cfg), 2);
  s.messages_sent = 5;
  EXPECT_EQ(remaining_quota(s, cfg), 0);
}

class EngineTest : public ::testing::Test {
 protected:
  EngineTest() : store(dir / "g4r.db", testing::fixed_key()) {}

  InterfaceId make_interface(std::int64_t max_messages, std::optional<std::string> key = "sk-test") {
    PartialConfig p;
    p.study_name = "engine";
    p.max_messages = max_messages;
    p.system_prompt = "sys";
    p.prepend_text = "Please be concise";
    p.append_text = "Thank you";
    p.temperature = Temperature::parse("0.7");
    auto cfg = apply_defaults(p);
    cfg.api_key = std::move(key);
    return store.save_interface(cfg);
  }

  TempDir dir;
  Store store;
};

TEST_F(EngineTest, CapStopsAfterMaxMessages) {
  for (std::int64_t cap : {0, 1, 5}) {
    RecordingProvider provider;
    ChatEngine engine(store, provider, {});
    const auto id = make_interface(cap);
    const auto session = engine.start_session(id, "p-" + std::to_string(cap));
    for (std::int64_t i = 0; i < cap; ++i) {
      ASSERT_TRUE(std::holds_alternative<MessageExchange>(engine.handle_participant_message(session.session_id, "hi")));
    }
    const auto capped = engine.handle_participant_message(session.session_id, "one more");
    ASSERT_TRUE(std::holds_alternative<CapReached>(capped));
    EXPECT_EQ(std::get<CapReached>(capped).message, "You have sent the maximum allowed messages");
    EXPECT_EQ(store.session_exchanges(session.session_id).size(), static_cast<std::size_t>(cap));
    EXPECT_EQ(provider.requests().size(), static_cast<std::size_t>(cap));
  }
}

TEST_F(EngineTest, RequestCarriesTemperatureModelAndKey) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {"model-x", std::nullopt});
  const auto session = engine.start_session(make_interface(5), "p");
  const auto out = engine.handle_participant_message(session.session_id, "question");
  ASSERT_TRUE(std::holds_alternative<MessageExchange>(out));
  const auto& x = std::get<MessageExchange>(out);
  EXPECT_EQ(x.participant_message, "question");
  EXPECT_EQ(x.gpt_message, "echo: question");
  EXPECT_EQ(x.seq, 1);

  const auto reqs = provider.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_DOUBLE_EQ(reqs[0].temperature, 0.7);
  EXPECT_EQ(reqs[0].model_id, "model-x");
  EXPECT_EQ(reqs[0].api_key, "sk-test");
  EXPECT_EQ(store.audit_upstream_text(session.session_id, 1), "Please be concise\nquestion\nThank you");
}

TEST_F(EngineTest, ServerDefaultKeyUsedWhenInterfaceHasNone) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {"m", "sk-server"});
  const auto session = engine.start_session(make_interface(5, std::nullopt), "p");
  engine.handle_participant_message(session.session_id, "x");
  EXPECT_EQ(provider.requests().at(0).api_key, "sk-server");
}

TEST_F(EngineTest, MissingKeyIsAnUpstreamFailure) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {});
  const auto session = engine.start_session(make_interface(5, std::nullopt), "p");
  const auto out = engine.handle_participant_message(session.session_id, "x");
  ASSERT_TRUE(std::holds_alternative<UpstreamFailure>(out));
  EXPECT_FALSE(std::get<UpstreamFailure>(out).kind);
  EXPECT_TRUE(provider.requests().empty());
}

TEST_F(EngineTest, ProviderFailurePersistsNothingAndKeepsQuota) {
  FlakyProvider provider(ProviderErrorKind::Timeout);
  ChatEngine engine(store, provider, {});
  const auto id = make_interface(2);
  const auto session = engine.start_session(id, "p");
  const auto failed = engine.handle_participant_message(session.session_id, "x");
  ASSERT_TRUE(std::holds_alternative<UpstreamFailure>(failed));
  EXPECT_EQ(std::get<UpstreamFailure>(failed).kind, ProviderErrorKind::Timeout);
  EXPECT_TRUE(store.session_exchanges(session.session_id).empty());

  provider.arm(false);
  EXPECT_TRUE(std::holds_alternative<MessageExchange>(engine.handle_participant_message(session.session_id, "x")));
  EXPECT_TRUE(std::holds_alternative<MessageExchange>(engine.handle_participant_message(session.session_id, "y")));
  EXPECT_TRUE(std::holds_alternative<CapReached>(engine.handle_participant_message(session.session_id, "z")));
}

TEST_F(EngineTest, HistoryFeedsLaterRequests) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {});
  const auto session = engine.start_session(make_interface(5), "p");
  engine.handle_participant_message(session.session_id, "one");
  engine.handle_participant_message(session.session_id, "two");
  const auto reqs = provider.requests();
  ASSERT_EQ(reqs.size(), 2u);
  const std::vector<Role> roles{Role::System, Role::Assistant, Role::User, Role::Assistant, Role::User};
  ASSERT_EQ(reqs[1].messages.size(), roles.size());
  for (std::size_t i = 0; i < roles.size(); ++i) EXPECT_EQ(reqs[1].messages[i].role, roles[i]);
  EXPECT_EQ(reqs[1].messages[3].content, "echo: one");
}

TEST_F(EngineTest, ConcurrentSendsInOneSessionAreSerialized) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {});
  const auto session = engine.start_session(make_interface(1000), "p");
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 5; ++i) engine.handle_participant_message(session.session_id, "m" + std::to_string(t));
      });
    }
  }
  const auto all = store.session_exchanges(session.session_id);
  ASSERT_EQ(all.size(), 40u);
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(all[i].seq, static_cast<std::int64_t>(i + 1));
    if (i) EXPECT_GE(all[i].exchanged_at, all[i - 1].exchanged_at);
  }
}

TEST_F(EngineTest, TimestampsNeverDecreaseEvenIfClockDoes) {
  RecordingProvider provider;
  std::int64_t tick = 1'000'000;
  ChatEngine engine(store, provider, {"m", std::nullopt, [&] { return Timestamp{std::chrono::milliseconds{tick -= 10}}; }});
  const auto session = engine.start_session(make_interface(5), "p");
  for (int i = 0; i < 3; ++i) engine.handle_participant_message(session.session_id, "x");
  const auto all = store.session_exchanges(session.session_id);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_LE(all[0].exchanged_at, all[1].exchanged_at);
  EXPECT_LE(all[1].exchanged_at, all[2].exchanged_at);
}

TEST_F(EngineTest, RejectsUnknownSessionAndEmptyText) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {});
  try {
    engine.handle_participant_message(SessionId{"nope"}, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
  const auto session = engine.start_session(make_interface(5), "p");
  try {
    engine.handle_participant_message(session.session_id, "");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
  try {
    engine.start_session(InterfaceId{"missing"}, "p");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownInterface);
  }
}

TEST_F(EngineTest, SessionsAreIdempotentPerParticipant) {
  RecordingProvider provider;
  ChatEngine engine(store, provider, {});
  const auto id = make_interface(5);
  const auto a = engine.start_session(id, "p");
  engine.handle_participant_message(a.session_id, "x");
  const auto b = engine.start_session(id, "p");
  EXPECT_EQ(a.session_id, b.session_id);
  EXPECT_EQ(b.messages_sent, 1);
  EXPECT_NE(engine.start_session(id, "q").session_id, a.session_id);
}

}  // namespace
}  // namespace g4r
