#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "g4r/credentials.hpp"
#include "g4r/llm_gateway.hpp"

namespace g4r::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "g4r-test-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline crypto::SecretKey fixed_key() {
  crypto::SecretKey key{};
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<std::uint8_t>(i * 7 + 3);
  return key;
}

/// Every byte of every regular file below `dir`, concatenated.
inline std::string dump_directory(const std::filesystem::path& dir) {
  std::string all;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    all += ss.str();
  }
  return all;
}

/// Echoes like EchoProvider and records every request it receives.
class RecordingProvider final : public CompletionProvider {
 public:
  CompletionResult complete(const CompletionRequest& request) const override {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    return EchoProvider{}.complete(request);
  }

  std::vector<CompletionRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  mutable std::mutex mutex_;
  mutable std::vector<CompletionRequest> requests_;
};

/// Fails with `kind` while armed, echoes otherwise.
class FlakyProvider final : public CompletionProvider {
 public:
  explicit FlakyProvider(ProviderErrorKind kind) : kind_(kind) {}

  void arm(bool failing) { failing_ = failing; }

  CompletionResult complete(const CompletionRequest& request) const override {
    ++calls_;
    if (failing_) return ProviderError{kind_, "injected"};
    return EchoProvider{}.complete(request);
  }

  int calls() const { return calls_; }

 private:
  ProviderErrorKind kind_;
  std::atomic<bool> failing_{true};
  mutable std::atomic<int> calls_{0};
};

}  // namespace g4r::testing
