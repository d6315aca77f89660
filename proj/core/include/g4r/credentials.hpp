#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace g4r::crypto {

/// Argon2id hash string in the standard `$argon2id$v=19$m=...` encoding,
/// which carries the algorithm, parameters and salt.
std::string hash_password(std::string_view password);

/// Constant-time verification against a hash_password() string.
bool verify_password(std::string_view hash, std::string_view password);

using SecretKey = std::array<std::uint8_t, 32>;

SecretKey random_secret_key();
std::optional<SecretKey> secret_key_from_hex(std::string_view hex);
std::string to_hex(const SecretKey& key);

/// Authenticated encryption; output is base64(nonce || ciphertext).
std::string seal(const SecretKey& key, std::string_view plaintext);
/// Throws Error(Crypto) when the box fails to authenticate.
std::string open(const SecretKey& key, std::string_view sealed);

/// `length` characters drawn uniformly from [A-Za-z0-9] using the OS CSPRNG.
std::string random_alnum(std::size_t length);
/// `bytes` random bytes, hex encoded.
std::string random_hex(std::size_t bytes);

}  // namespace g4r::crypto
