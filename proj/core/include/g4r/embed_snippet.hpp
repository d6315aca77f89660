#pragma once

#include <string>
#include <string_view>

#include "g4r/domain.hpp"

namespace g4r {

/// Name of the survey's embedded-data field holding the participant id.
inline constexpr std::string_view kEmbeddedDataKey = "g4r_pid";
inline constexpr std::size_t kParticipantIdLength = 16;
inline constexpr std::string_view kIframeWidth = "100%";
inline constexpr std::string_view kIframeHeight = "500px";

struct SnippetTemplate {
  InterfaceId interface_id;
  AccessMode access_mode = AccessMode::NewTab;
  std::string service_base_url;  // absolute, e.g. "https://chat.example.org"
};

/// 16 characters over [A-Za-z0-9] from the OS CSPRNG. Server-side twin of
/// the generator embedded in the snippet.
std::string generate_participant_id();

/// Question-script JavaScript for the survey platform. At participant
/// runtime it creates (or reuses) a participant id, stores it in the
/// `g4r_pid` embedded-data field, and then either shows a green button that
/// opens {base}/embed/{id}?pid=... in a new tab (NewTab) or inserts an
/// iframe at that URL into the question (Embedded).
/// Pure function of the template. Throws InvalidArgument for a base URL
/// that is not absolute http(s).
std::string generate_snippet(const SnippetTemplate& t);

/// The page served at /embed/{id}: window title, researcher header markup
/// (NewTab only), and the chat widget bound to `participant_id`.
std::string render_embed_page(const WidgetBootstrap& bootstrap, std::string_view participant_id);

std::string html_escape(std::string_view text);

}  // namespace g4r
