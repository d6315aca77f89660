#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "g4r/credentials.hpp"
#include "g4r/domain.hpp"

namespace g4r {

inline constexpr std::size_t kMinPasswordLength = 8;
inline constexpr auto kGuestRetention = std::chrono::days{30};

struct InterfaceSummary {
  InterfaceId interface_id;
  std::string study_name;
  Timestamp created_at{};

  friend bool operator==(const InterfaceSummary&, const InterfaceSummary&) = default;
};

/// Durable storage in one SQLite file.
///
/// Schema:
///   accounts(researcher_id PK, display_name, email UNIQUE, password_hash, created_at)
///   interfaces(interface_id PK, owner_id NULL -> accounts, created_at, study_name,
///              config JSON without api_key, api_key_sealed NULL)
///   sessions(session_id PK, interface_id, participant_id, started_at,
///            UNIQUE(interface_id, participant_id))
///   exchanges(id PK, session_id, seq, participant_message, gpt_message,
///             upstream_text, exchanged_at, UNIQUE(session_id, seq))
/// Timestamps are integer milliseconds since the Unix epoch. Passwords are
/// stored only as Argon2id hashes; api keys only sealed with the store key.
///
/// Safe for concurrent use from any number of threads.
class Store {
 public:
  /// Opens (creating if needed) the database at `path`.
  Store(const std::filesystem::path& path, const crypto::SecretKey& key);
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;
  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;

  const std::filesystem::path& path() const noexcept;

  /// Throws InvalidEmail, WeakPassword or DuplicateEmail.
  ResearcherAccount create_account(std::string_view name, std::string_view email, std::string_view password,
                                   Timestamp now = now_utc());
  /// Throws AuthFailed with the same message for unknown email and wrong password.
  ResearcherAccount verify_credentials(std::string_view email, std::string_view password);
  std::optional<ResearcherAccount> find_account(const ResearcherId& id);

  /// Persists `cfg`, assigning an interface_id when it has none.
  InterfaceId save_interface(InterfaceConfig cfg);
  /// Throws NotFound.
  InterfaceConfig get_interface(const InterfaceId& id);
  /// Owned interfaces, newest first.
  std::vector<InterfaceSummary> list_interfaces(const ResearcherId& owner);
  /// Removes guest interfaces (and their transcripts) created before `now - kGuestRetention`.
  std::size_t purge_guest_interfaces(Timestamp now);

  /// Returns the existing session for (interface, participant) or creates one.
  /// Throws UnknownInterface or InvalidArgument (empty participant id).
  ParticipantSession open_session(const InterfaceId& interface_id, std::string_view participant_id,
                                  Timestamp now = now_utc());
  std::optional<ParticipantSession> find_session(const SessionId& id);

  /// Atomically appends one exchange. `upstream_text` is the wrapped user
  /// turn that was actually sent; it is kept for audit only.
  /// Throws SequenceGap unless x.seq is the session's last seq + 1.
  void append_exchange(const MessageExchange& x, std::string_view upstream_text = {});
  std::vector<MessageExchange> session_exchanges(const SessionId& id);
  /// Participants in first-seen order, each participant's exchanges in seq order.
  std::vector<TranscriptEntry> fetch_exchanges(const InterfaceId& interface_id);
  std::optional<std::string> audit_upstream_text(const SessionId& id, std::int64_t seq);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Key for sealing api keys: G4R_SECRET_KEY (hex) if set, otherwise the
/// file `<db>.key`, generated with owner-only permissions on first use.
crypto::SecretKey load_or_create_store_key(const std::filesystem::path& db_path);

}  // namespace g4r
