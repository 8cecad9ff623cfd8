#include "propmatch/service/parser_hook.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/service/project_store.hpp"

namespace propmatch::service {

namespace {

std::string Lines(std::span<const std::string> sentences) {
  std::string body;
  for (std::string s : sentences) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    body += s;
    body += '\n';
  }
  return body;
}

// Removes the file when it goes out of scope.
class TempFile {
 public:
  explicit TempFile(const std::string& contents) {
    std::string pattern = (std::filesystem::temp_directory_path() / "propmatch-hook-XXXXXX").string();
    const int fd = mkstemp(pattern.data());
    if (fd < 0) throw ServiceError(ServiceError::Kind::kUpstream, "cannot create a temporary file");
    close(fd);
    path_ = pattern;
    std::ofstream(path_, std::ios::binary) << contents;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string RunCommand(const std::string& command, const std::string& input) {
  TempFile in(input);
  const std::string line = "(" + command + ") < " + ShellQuote(in.path());
  FILE* pipe = popen(line.c_str(), "r");
  if (pipe == nullptr) throw ServiceError(ServiceError::Kind::kUpstream, "cannot start parser command");
  std::string out;
  char buf[4096];
  for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, got);
  const int status = pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw ServiceError(ServiceError::Kind::kUpstream,
                       "parser command failed (status " + std::to_string(status == -1 ? -1 : WEXITSTATUS(status)) + ")");
  }
  return out;
}

std::string PostText(const std::string& url, const std::string& body) {
  const std::size_t scheme = url.find("://");
  const std::size_t slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const std::string host = slash == std::string::npos ? url : url.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : url.substr(slash);
  httplib::Client client(host);
  client.set_connection_timeout(10);
  client.set_read_timeout(300);
  const httplib::Result res = client.Post(path, body, "text/plain");
  if (!res) {
    throw ServiceError(ServiceError::Kind::kUpstream,
                       "parser at " + url + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ServiceError(ServiceError::Kind::kUpstream, "parser at " + url + " answered " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace

ParserHook::ParserHook(Mode mode, std::string target) : mode_(mode), target_(std::move(target)) {
  if (mode_ != Mode::kNone && target_.empty()) {
    throw ServiceError(ServiceError::Kind::kInvalid, "parser hook needs a target");
  }
}

ParserHook::Mode ParserHook::ParseMode(std::string_view name) {
  if (name == "none" || name.empty()) return Mode::kNone;
  if (name == "command") return Mode::kCommand;
  if (name == "http") return Mode::kHttp;
  throw ServiceError(ServiceError::Kind::kInvalid, "unknown parser mode '" + std::string(name) + "' (none, command, http)");
}

std::string_view ParserHook::ModeName(Mode mode) {
  switch (mode) {
    case Mode::kNone: return "none";
    case Mode::kCommand: return "command";
    case Mode::kHttp: return "http";
  }
  return "none";
}

std::string ParserHook::RunRaw(std::span<const std::string> sentences) const {
  const std::string input = Lines(sentences);
  switch (mode_) {
    case Mode::kNone:
      break;
    case Mode::kCommand:
      return RunCommand(target_, input);
    case Mode::kHttp:
      return PostText(target_, input);
  }
  throw ServiceError(ServiceError::Kind::kUnavailable, "no parser hook configured");
}

std::vector<ParsedSentence> ParserHook::Parse(std::span<const std::string> sentences) const {
  if (sentences.empty()) return {};
  std::vector<ParsedSentence> parsed;
  try {
    parsed = ParseConllu(RunRaw(sentences));
  } catch (const MalformedParse& e) {
    throw ServiceError(ServiceError::Kind::kUpstream, std::string("parser output: ") + e.what());
  }
  if (parsed.size() != sentences.size()) {
    throw ServiceError(ServiceError::Kind::kUpstream, "parser returned " + std::to_string(parsed.size()) +
                                                          " sentences for " + std::to_string(sentences.size()));
  }
  return parsed;
}

std::string ParseDocuments(const ParserHook& hook, const std::string& documents_jsonl) {
  std::vector<std::string> keys, texts;
  std::istringstream in(documents_jsonl);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw BadInput(std::string("document line: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string() || !doc.contains("sentences") ||
        !doc["sentences"].is_array()) {
      throw BadInput("document line: expected object with string 'id' and array 'sentences'");
    }
    const std::string id = doc["id"].get<std::string>();
    int position = 0;
    for (const auto& s : doc["sentences"]) {
      if (!s.is_string()) throw BadInput("document '" + id + "': sentences must be strings");
      keys.push_back(id + ":" + std::to_string(position++));
      texts.push_back(s.get<std::string>());
    }
  }
  const std::vector<ParsedSentence> parsed = hook.Parse(texts);
  std::string out;
  for (std::size_t i = 0; i < parsed.size(); ++i) out += SerializeConllu(parsed[i].tokens, keys[i]);
  return out;
}

std::string ParseQuery(const ParserHook& hook, const std::string& text) {
  const std::vector<std::string> one{text};
  const std::vector<ParsedSentence> parsed = hook.Parse(one);
  return SerializeConllu(parsed.front().tokens);
}

}  // namespace propmatch::service
