#include "g4r/embed_snippet.hpp"

#include <algorithm>
#include <cstdio>

#include "g4r/credentials.hpp"
#include "g4r/error.hpp"
#include "json_codec.hpp"

namespace g4r {

namespace {

/// Double-quoted JavaScript string literal; '<' and '>' are escaped so the
/// literal is also safe inside an HTML script element.
std::string js_string(std::string_view text) {
  std::string out = "\"";
  for (unsigned char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '<': out += "\\u003c"; break;
      case '>': out += "\\u003e"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
  return out;
}

std::string normalized_base_url(std::string_view url) {
  const bool absolute = url.starts_with("http://") || url.starts_with("https://");
  const bool clean = std::none_of(url.begin(), url.end(), [](unsigned char c) {
    return c <= 0x20 || c == '"' || c == '\'' || c == '<' || c == '>' || c == '\\' || c == '`';
  });
  if (!absolute || !clean) throw Error(ErrorCode::InvalidArgument, "service base URL must be an absolute http(s) URL");
  while (!url.empty() && url.back() == '/') url.remove_suffix(1);
  return std::string(url);
}

constexpr std::string_view kSnippetPrologue = R"js(Qualtrics.SurveyEngine.addOnload(function () {
  var G4R_FIELD = "g4r_pid";
  var ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

  // 16 characters, uniform over ALPHABET (rejection sampling on random bytes).
  function g4rParticipantId() {
    var id = "";
    var bytes = new Uint8Array(64);
    while (id.length < 16) {
      window.crypto.getRandomValues(bytes);
      for (var i = 0; i < bytes.length && id.length < 16; i++) {
        if (bytes[i] < 248) id += ALPHABET.charAt(bytes[i] % 62);
      }
    }
    return id;
  }

  var pid = Qualtrics.SurveyEngine.getEmbeddedData(G4R_FIELD);
  if (!pid) {
    pid = g4rParticipantId();
  }
  Qualtrics.SurveyEngine.setEmbeddedData(G4R_FIELD, pid);

)js";

constexpr std::string_view kNewTabBody = R"js(  var container = this.getQuestionContainer();
  var opener = document.createElement("button");
  opener.type = "button";
  opener.className = "g4r-green-button";
  opener.textContent = "Open the GPT Interface";
  opener.style.backgroundColor = "green";
  opener.style.color = "white";
  opener.style.fontSize = "18px";
  opener.style.fontWeight = "bold";
  opener.style.padding = "14px 28px";
  opener.style.border = "none";
  opener.style.borderRadius = "6px";
  opener.style.cursor = "pointer";
  opener.onclick = function () {
    window.open(url, "_blank", "noopener");
  };
  container.appendChild(opener);
});
)js";

constexpr std::string_view kEmbeddedBody = R"js(  var container = this.getQuestionContainer();
  var frame = document.createElement("iframe");
  frame.src = url;
  frame.title = "GPT Interface";
  frame.style.width = WIDTH;
  frame.style.height = HEIGHT;
  frame.style.border = "0";
  container.appendChild(frame);
});
)js";

constexpr std::string_view kPageStyle = R"css(
body { margin: 0; font-family: system-ui, -apple-system, "Segoe UI", sans-serif; background: #f7f7f8; }
#g4r-top { }
#g4r-chat { max-width: 760px; margin: 0 auto; padding: 16px; display: flex; flex-direction: column; height: calc(100vh - 32px); box-sizing: border-box; }
#g4r-transcript { flex: 1; overflow-y: auto; padding: 8px 0; }
.g4r-msg { margin: 10px 0; }
.g4r-label { font-weight: 600; font-size: 13px; color: #555; margin-bottom: 2px; }
.g4r-bubble { display: inline-block; padding: 10px 14px; border-radius: 12px; white-space: pre-wrap; max-width: 90%; }
.g4r-participant .g4r-bubble { background: #dbeafe; }
.g4r-gpt .g4r-bubble { background: #ffffff; border: 1px solid #e5e7eb; }
#g4r-status { min-height: 20px; color: #b91c1c; font-size: 14px; }
#g4r-form { display: flex; gap: 8px; }
#g4r-input { flex: 1; resize: none; padding: 10px; font: inherit; border-radius: 8px; border: 1px solid #d1d5db; }
#g4r-send { padding: 0 20px; border-radius: 8px; border: none; background: #10a37f; color: white; font-weight: 600; cursor: pointer; }
#g4r-send:disabled { background: #9ca3af; cursor: not-allowed; }
)css";

constexpr std::string_view kWidgetScript = R"js(
(function () {
  var boot = JSON.parse(document.getElementById("g4r-bootstrap").textContent);
  var pid = document.getElementById("g4r-chat").getAttribute("data-pid");
  var transcript = document.getElementById("g4r-transcript");
  var input = document.getElementById("g4r-input");
  var send = document.getElementById("g4r-send");
  var status = document.getElementById("g4r-status");
  var sessionId = null;
  var remaining = boot.max_messages;
  var inFlight = false;
  var capped = false;

  function bubble(kind, label, text) {
    var row = document.createElement("div");
    row.className = "g4r-msg g4r-" + kind;
    var name = document.createElement("div");
    name.className = "g4r-label";
    name.textContent = label;
    var body = document.createElement("div");
    body.className = "g4r-bubble";
    body.textContent = text;
    row.appendChild(name);
    row.appendChild(body);
    transcript.appendChild(row);
    transcript.scrollTop = transcript.scrollHeight;
    return row;
  }
  function refresh() {
    send.disabled = capped || inFlight || remaining <= 0 || sessionId === null;
  }
  function showCap(text) {
    capped = true;
    status.textContent = text;
    refresh();
  }

  if (boot.first_message) bubble("gpt", boot.gpt_label, boot.first_message);
  refresh();

  fetch("/api/interfaces/" + encodeURIComponent(boot.interface_id) + "/sessions", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ participant_id: pid })
  }).then(function (r) {
    if (!r.ok) throw new Error("session");
    return r.json();
  }).then(function (s) {
    sessionId = s.session_id;
    remaining = s.remaining_quota;
    if (remaining <= 0) showCap("You have sent the maximum allowed messages");
    refresh();
  }).catch(function () {
    status.textContent = "Could not connect. Please reload the page.";
  });

  function submit() {
    var text = input.value;
    if (!text.trim() || send.disabled) return;
    inFlight = true;
    refresh();
    var mine = bubble("participant", boot.participant_label, text);
    fetch("/api/sessions/" + encodeURIComponent(sessionId) + "/messages", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text: text })
    }).then(function (r) {
      if (r.status === 409) {
        return r.text().then(function (t) { transcript.removeChild(mine); showCap(t); });
      }
      if (!r.ok) throw new Error("send");
      return r.json().then(function (reply) {
        input.value = "";
        status.textContent = "";
        bubble("gpt", boot.gpt_label, reply.gpt_message);
        remaining = reply.remaining_quota;
        if (remaining <= 0) showCap("You have sent the maximum allowed messages");
      });
    }).catch(function () {
      transcript.removeChild(mine);
      status.textContent = "The message could not be delivered. Please try again.";
    }).then(function () {
      inFlight = false;
      refresh();
    });
  }

  send.addEventListener("click", submit);
  input.addEventListener("keydown", function (e) {
    if (e.key === "Enter" && !e.shiftKey) {
      e.preventDefault();
      submit();
    }
  });
})();
)js";

}  // namespace

std::string generate_participant_id() { return crypto::random_alnum(kParticipantIdLength); }

std::string generate_snippet(const SnippetTemplate& t) {
  const auto base = normalized_base_url(t.service_base_url);
  std::string out(kSnippetPrologue);
  out += "  var url = " + js_string(base + "/embed/" + t.interface_id.value) + " + \"?pid=\" + encodeURIComponent(pid);\n";
  if (t.access_mode == AccessMode::NewTab) {
    out += kNewTabBody;
  } else {
    out += "  var WIDTH = " + js_string(kIframeWidth) + ";\n";
    out += "  var HEIGHT = " + js_string(kIframeHeight) + ";\n";
    out += kEmbeddedBody;
  }
  return out;
}

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render_embed_page(const WidgetBootstrap& bootstrap, std::string_view participant_id) {
  auto boot_json = codec::bootstrap_to_json(bootstrap).dump();
  // Keep "</script>" from terminating the data block early.
  for (std::size_t pos = 0; (pos = boot_json.find("</", pos)) != std::string::npos; pos += 3) {
    boot_json.replace(pos, 2, "<\\/");
  }

  std::string page = "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
  page += "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n";
  page += "<title>" + html_escape(bootstrap.window_title) + "</title>\n";
  page += "<style>";
  page += kPageStyle;
  page += "</style>\n</head>\n<body>\n";
  if (bootstrap.access_mode == AccessMode::NewTab && bootstrap.top_html) {
    // Researcher-authored markup, rendered as given.
    page += "<div id=\"g4r-top\">" + *bootstrap.top_html + "</div>\n";
  }
  page += "<div id=\"g4r-chat\" data-pid=\"" + html_escape(participant_id) + "\">\n";
  page += "<div id=\"g4r-transcript\"></div>\n<div id=\"g4r-status\"></div>\n";
  page += "<div id=\"g4r-form\"><textarea id=\"g4r-input\" rows=\"2\" aria-label=\"Message\"></textarea>";
  page += "<button id=\"g4r-send\" type=\"button\">Send</button></div>\n</div>\n";
  page += "<script type=\"application/json\" id=\"g4r-bootstrap\">" + boot_json + "</script>\n";
  page += "<script>";
  page += kWidgetScript;
  page += "</script>\n</body>\n</html>\n";
  return page;
}

}  // namespace g4r
