#include "g4r/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>

#include "json_codec.hpp"
#include "sqlite.hpp"

namespace g4r {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS accounts (
  researcher_id TEXT PRIMARY KEY,
  display_name  TEXT NOT NULL,
  email         TEXT NOT NULL UNIQUE,
  password_hash TEXT NOT NULL,
  created_at    INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS interfaces (
  interface_id   TEXT PRIMARY KEY,
  owner_id       TEXT REFERENCES accounts(researcher_id),
  created_at     INTEGER NOT NULL,
  study_name     TEXT NOT NULL,
  config         TEXT NOT NULL,
  api_key_sealed TEXT
);
CREATE INDEX IF NOT EXISTS interfaces_owner ON interfaces(owner_id, created_at);
CREATE TABLE IF NOT EXISTS sessions (
  session_id     TEXT PRIMARY KEY,
  interface_id   TEXT NOT NULL REFERENCES interfaces(interface_id),
  participant_id TEXT NOT NULL,
  started_at     INTEGER NOT NULL,
  UNIQUE(interface_id, participant_id)
);
CREATE TABLE IF NOT EXISTS exchanges (
  id                  INTEGER PRIMARY KEY AUTOINCREMENT,
  session_id          TEXT NOT NULL REFERENCES sessions(session_id),
  seq                 INTEGER NOT NULL,
  participant_message TEXT NOT NULL,
  gpt_message         TEXT NOT NULL,
  upstream_text       TEXT NOT NULL,
  exchanged_at        INTEGER NOT NULL,
  UNIQUE(session_id, seq)
);
)sql";

constexpr std::size_t kReaderPoolSize = 4;

std::int64_t to_millis(Timestamp ts) { return ts.time_since_epoch().count(); }
Timestamp from_millis(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

std::string normalize_email(std::string_view email) {
  while (!email.empty() && std::isspace(static_cast<unsigned char>(email.front()))) email.remove_prefix(1);
  while (!email.empty() && std::isspace(static_cast<unsigned char>(email.back()))) email.remove_suffix(1);
  std::string out(email);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool plausible_email(std::string_view email) {
  const auto at = email.find('@');
  if (at == 0 || at == std::string_view::npos || email.find('@', at + 1) != std::string_view::npos) return false;
  const auto domain = email.substr(at + 1);
  const auto dot = domain.find('.');
  if (dot == 0 || dot == std::string_view::npos || domain.back() == '.') return false;
  return std::none_of(email.begin(), email.end(), [](unsigned char c) { return std::isspace(c) || c < 0x20; });
}

ResearcherAccount read_account(const sqlite::Statement& st) {
  return {ResearcherId{st.text(0)}, st.text(1), st.text(2), st.text(3), from_millis(st.int64(4))};
}

}  // namespace

struct Store::Impl {
  std::filesystem::path path;
  crypto::SecretKey key;
  std::mutex write_mutex;
  std::unique_ptr<sqlite::Connection> writer;
  std::mutex pool_mutex;
  std::vector<std::unique_ptr<sqlite::Connection>> readers;
  std::string dummy_hash;
  std::once_flag dummy_once;

  /// A pooled read connection, returned on destruction.
  class Reader {
   public:
    explicit Reader(Impl& impl) : impl_(impl) {
      {
        std::lock_guard lock(impl_.pool_mutex);
        if (!impl_.readers.empty()) {
          conn_ = std::move(impl_.readers.back());
          impl_.readers.pop_back();
        }
      }
      if (!conn_) conn_ = std::make_unique<sqlite::Connection>(impl_.path.string());
    }
    ~Reader() {
      std::lock_guard lock(impl_.pool_mutex);
      if (impl_.readers.size() < kReaderPoolSize) impl_.readers.push_back(std::move(conn_));
    }
    sqlite::Connection& operator*() { return *conn_; }

   private:
    Impl& impl_;
    std::unique_ptr<sqlite::Connection> conn_;
  };

  const std::string& dummy() {
    std::call_once(dummy_once, [this] { dummy_hash = crypto::hash_password(crypto::random_hex(16)); });
    return dummy_hash;
  }

  InterfaceConfig decode_interface(const sqlite::Statement& st) {
    auto cfg = codec::config_from_json(nlohmann::json::parse(st.text(0)));
    if (auto sealed = st.optional_text(1)) cfg.api_key = crypto::open(key, *sealed);
    return cfg;
  }

  std::int64_t last_seq(sqlite::Connection& conn, const SessionId& id) {
    sqlite::Statement st(conn, "SELECT COALESCE(MAX(seq), 0) FROM exchanges WHERE session_id = ?");
    st.bind(1, id.value);
    st.step();
    return st.int64(0);
  }

  std::optional<ParticipantSession> session_by(sqlite::Connection& conn, std::string_view where,
                                               std::string_view a, std::string_view b = {}) {
    std::string sql =
        "SELECT s.session_id, s.interface_id, s.participant_id, s.started_at,"
        " (SELECT COALESCE(MAX(seq), 0) FROM exchanges e WHERE e.session_id = s.session_id)"
        " FROM sessions s WHERE ";
    sql += where;
    sqlite::Statement st(conn, sql);
    st.bind(1, a);
    if (!b.empty()) st.bind(2, b);
    if (!st.step()) return std::nullopt;
    return ParticipantSession{SessionId{st.text(0)}, InterfaceId{st.text(1)}, st.text(2), st.int64(4),
                              from_millis(st.int64(3))};
  }
};

Store::Store(const std::filesystem::path& path, const crypto::SecretKey& key) : impl_(std::make_unique<Impl>()) {
  impl_->path = path;
  impl_->key = key;
  impl_->writer = std::make_unique<sqlite::Connection>(path.string());
  impl_->writer->exec("PRAGMA journal_mode=WAL");
  impl_->writer->exec("PRAGMA synchronous=NORMAL");
  impl_->writer->exec("PRAGMA foreign_keys=ON");
  impl_->writer->exec(kSchema);
}

Store::~Store() = default;
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;

const std::filesystem::path& Store::path() const noexcept { return impl_->path; }

ResearcherAccount Store::create_account(std::string_view name, std::string_view email, std::string_view password,
                                        Timestamp now) {
  const auto normalized = normalize_email(email);
  if (!plausible_email(normalized)) throw Error(ErrorCode::InvalidEmail, "email address is not valid");
  if (utf8_length(password) < kMinPasswordLength) {
    throw Error(ErrorCode::WeakPassword,
                "password must be at least " + std::to_string(kMinPasswordLength) + " characters");
  }
  ResearcherAccount account{ResearcherId{"r" + crypto::random_alnum(15)}, std::string(name), normalized,
                            crypto::hash_password(password), now};

  std::lock_guard lock(impl_->write_mutex);
  sqlite::Statement st(*impl_->writer,
                       "INSERT INTO accounts (researcher_id, display_name, email, password_hash, created_at)"
                       " VALUES (?, ?, ?, ?, ?)");
  st.bind(1, account.researcher_id.value)
      .bind(2, account.display_name)
      .bind(3, account.email)
      .bind(4, account.password_hash)
      .bind(5, to_millis(now));
  const int rc = st.run();
  if (rc == SQLITE_CONSTRAINT_UNIQUE) throw Error(ErrorCode::DuplicateEmail, "an account with this email exists");
  if (rc != SQLITE_OK) throw Error(ErrorCode::Storage, "cannot create account");
  return account;
}

ResearcherAccount Store::verify_credentials(std::string_view email, std::string_view password) {
  std::optional<ResearcherAccount> account;
  {
    Impl::Reader reader(*impl_);
    sqlite::Statement st(*reader,
                         "SELECT researcher_id, display_name, email, password_hash, created_at FROM accounts"
                         " WHERE email = ?");
    st.bind(1, normalize_email(email));
    if (st.step()) account = read_account(st);
  }
  // Unknown emails still pay for one hash verification.
  const bool ok = crypto::verify_password(account ? account->password_hash : impl_->dummy(), password);
  if (!account || !ok) throw Error(ErrorCode::AuthFailed, "invalid email or password");
  return *account;
}

std::optional<ResearcherAccount> Store::find_account(const ResearcherId& id) {
  Impl::Reader reader(*impl_);
  sqlite::Statement st(*reader,
                       "SELECT researcher_id, display_name, email, password_hash, created_at FROM accounts"
                       " WHERE researcher_id = ?");
  st.bind(1, id.value);
  if (!st.step()) return std::nullopt;
  return read_account(st);
}

InterfaceId Store::save_interface(InterfaceConfig cfg) {
  if (cfg.interface_id.empty()) cfg.interface_id = InterfaceId{crypto::random_alnum(12)};
  std::optional<std::string> sealed;
  if (cfg.api_key) sealed = crypto::seal(impl_->key, *cfg.api_key);
  const auto config = codec::config_to_json(cfg).dump();

  std::lock_guard lock(impl_->write_mutex);
  sqlite::Statement st(*impl_->writer,
                       "INSERT INTO interfaces (interface_id, owner_id, created_at, study_name, config, api_key_sealed)"
                       " VALUES (?, ?, ?, ?, ?, ?)");
  st.bind(1, cfg.interface_id.value)
      .bind_optional(2, cfg.owner_id ? std::optional<std::string>(cfg.owner_id->value) : std::nullopt)
      .bind(3, to_millis(cfg.created_at))
      .bind(4, cfg.study_name)
      .bind(5, config)
      .bind_optional(6, sealed);
  if (st.run() != SQLITE_OK) throw Error(ErrorCode::Storage, "cannot save interface " + cfg.interface_id.value);
  return cfg.interface_id;
}

InterfaceConfig Store::get_interface(const InterfaceId& id) {
  Impl::Reader reader(*impl_);
  sqlite::Statement st(*reader, "SELECT config, api_key_sealed FROM interfaces WHERE interface_id = ?");
  st.bind(1, id.value);
  if (!st.step()) throw Error(ErrorCode::NotFound, "no interface " + id.value);
  return impl_->decode_interface(st);
}

std::vector<InterfaceSummary> Store::list_interfaces(const ResearcherId& owner) {
  Impl::Reader reader(*impl_);
  sqlite::Statement st(*reader,
                       "SELECT interface_id, study_name, created_at FROM interfaces WHERE owner_id = ?"
                       " ORDER BY created_at DESC, rowid DESC");
  st.bind(1, owner.value);
  std::vector<InterfaceSummary> out;
  while (st.step()) out.push_back({InterfaceId{st.text(0)}, st.text(1), from_millis(st.int64(2))});
  return out;
}

std::size_t Store::purge_guest_interfaces(Timestamp now) {
  const auto cutoff = to_millis(now - std::chrono::duration_cast<std::chrono::milliseconds>(kGuestRetention));
  std::lock_guard lock(impl_->write_mutex);
  auto& db = *impl_->writer;
  sqlite::Transaction tx(db);
  const char* doomed = "SELECT interface_id FROM interfaces WHERE owner_id IS NULL AND created_at < ?1";
  sqlite::Statement ex(db, std::string("DELETE FROM exchanges WHERE session_id IN (SELECT session_id FROM sessions "
                                       "WHERE interface_id IN (") + doomed + "))");
  ex.bind(1, cutoff).run();
  sqlite::Statement se(db, std::string("DELETE FROM sessions WHERE interface_id IN (") + doomed + ")");
  se.bind(1, cutoff).run();
  sqlite::Statement in(db, "DELETE FROM interfaces WHERE owner_id IS NULL AND created_at < ?1");
  in.bind(1, cutoff).run();
  const auto removed = static_cast<std::size_t>(sqlite3_changes(db.get()));
  tx.commit();
  return removed;
}

ParticipantSession Store::open_session(const InterfaceId& interface_id, std::string_view participant_id,
                                       Timestamp now) {
  if (participant_id.empty()) throw Error(ErrorCode::InvalidArgument, "participant id must not be empty");
  std::lock_guard lock(impl_->write_mutex);
  auto& db = *impl_->writer;
  if (auto existing = impl_->session_by(db, "s.interface_id = ? AND s.participant_id = ?", interface_id.value,
                                        participant_id)) {
    return *existing;
  }
  {
    sqlite::Statement st(db, "SELECT 1 FROM interfaces WHERE interface_id = ?");
    st.bind(1, interface_id.value);
    if (!st.step()) throw Error(ErrorCode::UnknownInterface, "no interface " + interface_id.value);
  }
  ParticipantSession session{SessionId{crypto::random_alnum(20)}, interface_id, std::string(participant_id), 0, now};
  sqlite::Statement st(db,
                       "INSERT INTO sessions (session_id, interface_id, participant_id, started_at) VALUES (?, ?, ?, ?)");
  st.bind(1, session.session_id.value)
      .bind(2, interface_id.value)
      .bind(3, session.participant_id)
      .bind(4, to_millis(now));
  if (st.run() != SQLITE_OK) throw Error(ErrorCode::Storage, "cannot open session");
  return session;
}

std::optional<ParticipantSession> Store::find_session(const SessionId& id) {
  Impl::Reader reader(*impl_);
  return impl_->session_by(*reader, "s.session_id = ?", id.value);
}

void Store::append_exchange(const MessageExchange& x, std::string_view upstream_text) {
  std::lock_guard lock(impl_->write_mutex);
  auto& db = *impl_->writer;
  sqlite::Transaction tx(db);
  {
    sqlite::Statement st(db, "SELECT 1 FROM sessions WHERE session_id = ?");
    st.bind(1, x.session.value);
    if (!st.step()) throw Error(ErrorCode::NotFound, "no session " + x.session.value);
  }
  const auto last = impl_->last_seq(db, x.session);
  if (x.seq != last + 1) {
    throw Error(ErrorCode::SequenceGap,
                "expected seq " + std::to_string(last + 1) + " but got " + std::to_string(x.seq));
  }
  sqlite::Statement st(db,
                       "INSERT INTO exchanges (session_id, seq, participant_message, gpt_message, upstream_text,"
                       " exchanged_at) VALUES (?, ?, ?, ?, ?, ?)");
  st.bind(1, x.session.value)
      .bind(2, x.seq)
      .bind(3, x.participant_message)
      .bind(4, x.gpt_message)
      .bind(5, upstream_text.empty() ? std::string_view(x.participant_message) : upstream_text)
      .bind(6, to_millis(x.exchanged_at));
  if (st.run() != SQLITE_OK) throw Error(ErrorCode::Storage, "cannot append exchange");
  tx.commit();
}

std::vector<MessageExchange> Store::session_exchanges(const SessionId& id) {
  Impl::Reader reader(*impl_);
  sqlite::Statement st(*reader,
                       "SELECT seq, participant_message, gpt_message, exchanged_at FROM exchanges"
                       " WHERE session_id = ? ORDER BY seq");
  st.bind(1, id.value);
  std::vector<MessageExchange> out;
  while (st.step()) out.push_back({id, st.int64(0), st.text(1), st.text(2), from_millis(st.int64(3))});
  return out;
}

std::vector<TranscriptEntry> Store::fetch_exchanges(const InterfaceId& interface_id) {
  Impl::Reader reader(*impl_);
  sqlite::Statement st(*reader,
                       "SELECT s.participant_id, e.session_id, e.seq, e.participant_message, e.gpt_message,"
                       " e.exchanged_at FROM exchanges e JOIN sessions s ON s.session_id = e.session_id"
                       " WHERE s.interface_id = ?"
                       " ORDER BY (SELECT MIN(f.id) FROM exchanges f WHERE f.session_id = e.session_id), e.seq");
  st.bind(1, interface_id.value);
  std::vector<TranscriptEntry> out;
  while (st.step()) {
    out.push_back({st.text(0),
                   MessageExchange{SessionId{st.text(1)}, st.int64(2), st.text(3), st.text(4), from_millis(st.int64(5))}});
  }
  return out;
}

std::optional<std::string> Store::audit_upstream_text(const SessionId& id, std::int64_t seq) {
  Impl::Reader reader(*impl_);
  sqlite::Statement st(*reader, "SELECT upstream_text FROM exchanges WHERE session_id = ? AND seq = ?");
  st.bind(1, id.value).bind(2, seq);
  if (!st.step()) return std::nullopt;
  return st.text(0);
}

crypto::SecretKey load_or_create_store_key(const std::filesystem::path& db_path) {
  if (const char* env = std::getenv("G4R_SECRET_KEY"); env && *env) {
    auto key = crypto::secret_key_from_hex(env);
    if (!key) throw Error(ErrorCode::InvalidArgument, "G4R_SECRET_KEY must be 64 hex characters");
    return *key;
  }
  auto key_path = db_path;
  key_path += ".key";
  if (std::ifstream in(key_path); in) {
    std::string hex;
    in >> hex;
    auto key = crypto::secret_key_from_hex(hex);
    if (!key) throw Error(ErrorCode::InvalidArgument, "corrupt key file " + key_path.string());
    return *key;
  }
  const auto key = crypto::random_secret_key();
  const int fd = ::open(key_path.c_str(), O_WRONLY | O_CREAT | O_EXCL, S_IRUSR | S_IWUSR);
  if (fd < 0) throw Error(ErrorCode::Storage, "cannot create key file " + key_path.string());
  const auto line = crypto::to_hex(key) + "\n";
  const bool written = ::write(fd, line.data(), line.size()) == static_cast<ssize_t>(line.size());
  ::close(fd);
  if (!written) throw Error(ErrorCode::Storage, "cannot write key file " + key_path.string());
  return key;
}

}  // namespace g4r
