#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "g4r/credentials.hpp"
#include "g4r/error.hpp"

namespace g4r::crypto {
namespace {

TEST(Passwords, HashVerifiesOnlyTheOriginal) {
  const auto hash = hash_password("correct horse battery");
  EXPECT_EQ(hash.rfind("$argon2id$", 0), 0u);
  EXPECT_EQ(hash.find("correct horse"), std::string::npos);
  EXPECT_TRUE(verify_password(hash, "correct horse battery"));
  EXPECT_FALSE(verify_password(hash, "correct horse batterY"));
  EXPECT_FALSE(verify_password(hash, ""));
  EXPECT_FALSE(verify_password("garbage", "correct horse battery"));
  EXPECT_NE(hash_password("correct horse battery"), hash);
}

TEST(SecretBox, SealOpenRoundTrip) {
  const auto key = random_secret_key();
  const auto sealed = seal(key, "sk-live-123");
  EXPECT_EQ(sealed.find("sk-live-123"), std::string::npos);
  EXPECT_EQ(open(key, sealed), "sk-live-123");
  EXPECT_NE(seal(key, "sk-live-123"), sealed);
  EXPECT_THROW(open(random_secret_key(), sealed), Error);
  EXPECT_THROW(open(key, "AAAA"), Error);
}

TEST(SecretBox, HexKeyRoundTrip) {
  const auto key = random_secret_key();
  EXPECT_EQ(secret_key_from_hex(to_hex(key)), key);
  EXPECT_FALSE(secret_key_from_hex("abcd"));
  EXPECT_FALSE(secret_key_from_hex(std::string(64, 'z')));
}

TEST(RandomIds, AlphabetAndLength) {
  const std::regex alnum("^[A-Za-z0-9]{20}$");
  std::set<char> seen;
  for (int i = 0; i < 200; ++i) {
    const auto id = random_alnum(20);
    EXPECT_TRUE(std::regex_match(id, alnum)) << id;
    seen.insert(id.begin(), id.end());
  }
  EXPECT_EQ(seen.size(), 62u);
  EXPECT_EQ(random_hex(16).size(), 32u);
}

}  // namespace
}  // namespace g4r::crypto
