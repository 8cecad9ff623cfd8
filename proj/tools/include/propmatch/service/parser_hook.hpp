#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "propmatch/corpus.hpp"

namespace propmatch::service {

// External dependency parser. In command mode the target is a shell command
// that reads raw sentences on stdin, one per line, and writes CoNLL-U on
// stdout. In http mode the target is a URL that takes a text/plain POST of
// the same lines and answers with a CoNLL-U body. Either way the output
// must hold exactly one block per input sentence, in input order.
class ParserHook {
 public:
  enum class Mode { kNone, kCommand, kHttp };

  ParserHook() = default;
  ParserHook(Mode mode, std::string target);

  static Mode ParseMode(std::string_view name);
  static std::string_view ModeName(Mode mode);

  Mode mode() const { return mode_; }
  const std::string& target() const { return target_; }
  bool enabled() const { return mode_ != Mode::kNone; }

  // Raw CoNLL-U for `sentences`. Throws ServiceError(kUpstream) when the
  // parser cannot be reached or fails, kUnavailable when no hook is set.
  std::string RunRaw(std::span<const std::string> sentences) const;

  // Parses and checks the block count. Embedded newlines in a sentence are
  // sent as spaces.
  std::vector<ParsedSentence> Parse(std::span<const std::string> sentences) const;

 private:
  Mode mode_ = Mode::kNone;
  std::string target_;
};

// Parses every sentence of a documents JSONL stream through `hook` and
// returns a CoNLL-U stream whose sent_ids name "docid:position".
std::string ParseDocuments(const ParserHook& hook, const std::string& documents_jsonl);

// One CoNLL-U block for a query sentence.
std::string ParseQuery(const ParserHook& hook, const std::string& text);

}  // namespace propmatch::service
