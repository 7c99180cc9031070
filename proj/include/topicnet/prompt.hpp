// Copyright 2026 The topicnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOPICNET_PROMPT_HPP_
#define TOPICNET_PROMPT_HPP_

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "topicnet/corpus.hpp"
#include "topicnet/error.hpp"
#include "topicnet/topics.hpp"

namespace topicnet {

enum class PromptStep { kDiscover, kLabel };

// Marks the comment inside a labeling request. The mock provider keys on it.
inline constexpr std::string_view kCommentOpen = "<<<";
inline constexpr std::string_view kCommentClose = ">>>";

namespace detail {

struct TemplatePiece {
  bool is_placeholder = false;
  std::string text;  // literal text, or placeholder name
};

inline bool is_name_char(char c, bool first) {
  return c == '_' || std::islower(static_cast<unsigned char>(c)) ||
         (!first && std::isdigit(static_cast<unsigned char>(c)));
}

// `{name}` is a placeholder; `{{` and `}}` are literal braces. Any other
// brace is a literal.
inline std::vector<TemplatePiece> tokenize_template(std::string_view text) {
  std::vector<TemplatePiece> out;
  std::string literal;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if ((c == '{' || c == '}') && i + 1 < text.size() && text[i + 1] == c) {
      literal += c;
      ++i;
      continue;
    }
    if (c == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && is_name_char(text[j], j == i + 1)) ++j;
      if (j > i + 1 && j < text.size() && text[j] == '}') {
        if (!literal.empty()) out.push_back({false, std::move(literal)});
        literal.clear();
        out.push_back({true, std::string(text.substr(i + 1, j - i - 1))});
        i = j;
        continue;
      }
    }
    literal += c;
  }
  if (!literal.empty()) out.push_back({false, std::move(literal)});
  return out;
}

}  // namespace detail

class PromptTemplate {
 public:
  // Throws UsageError when the text uses a placeholder not listed in
  // `declared`.
  PromptTemplate(PromptStep step, std::string system_text, std::string user_text,
                 std::set<std::string> declared)
      : step_(step),
        system_text_(std::move(system_text)),
        user_text_(std::move(user_text)),
        declared_(std::move(declared)) {
    for (const auto* text : {&system_text_, &user_text_}) {
      for (const auto& piece : detail::tokenize_template(*text)) {
        if (piece.is_placeholder && !declared_.contains(piece.text)) {
          throw UsageError(fmt::format("template uses undeclared placeholder '{{{}}}'",
                                       piece.text));
        }
      }
    }
  }

  PromptStep step() const { return step_; }
  const std::string& system_text() const { return system_text_; }
  const std::string& user_text() const { return user_text_; }
  const std::set<std::string>& declared() const { return declared_; }

 private:
  PromptStep step_;
  std::string system_text_;
  std::string user_text_;
  std::set<std::string> declared_;
};

struct RenderedPrompt {
  std::string system_message;
  std::string user_message;
  std::vector<std::string> warnings;  // variables the template never uses
};

inline RenderedPrompt render_prompt(const PromptTemplate& tmpl,
                                    const std::map<std::string, std::string>& vars) {
  RenderedPrompt out;
  std::set<std::string> used;
  auto render = [&](const std::string& text) {
    std::string s;
    for (const auto& piece : detail::tokenize_template(text)) {
      if (!piece.is_placeholder) {
        s += piece.text;
        continue;
      }
      auto it = vars.find(piece.text);
      if (it == vars.end()) {
        throw UsageError(fmt::format("missing template variable '{}'", piece.text));
      }
      used.insert(piece.text);
      s += it->second;
    }
    return s;
  };
  out.system_message = render(tmpl.system_text());
  out.user_message = render(tmpl.user_text());
  for (const auto& [name, value] : vars) {
    if (!used.contains(name)) {
      out.warnings.push_back(fmt::format("template variable '{}' is not used", name));
    }
  }
  return out;
}

// Built-in templates. ** marks bold in the rendered prompt.
inline PromptTemplate default_discover_template() {
  return PromptTemplate(
      PromptStep::kDiscover,
      "You are an experienced qualitative researcher performing inductive "
      "content analysis of YouTube comments posted under videos about climate "
      "change.\n"
      "**Task:** read all comments supplied by the user and identify the "
      "overarching topics they discuss. Identify at most {max_topics} topics.\n"
      "**Rationale:** for each topic, provide a rationale of one or two "
      "sentences explaining what kind of comments the topic covers and why it "
      "is salient.\n"
      "**Output format:** reply with a single fenced block (```). Put one topic "
      "per line, written as `label \xe2\x80\x94 rationale`. Labels are short "
      "lowercase noun phrases. Write nothing else inside the block.",
      "Here are {count} comments, one per line:\n{comments}",
      {"max_topics", "count", "comments"});
}

inline PromptTemplate default_label_template() {
  return PromptTemplate(
      PromptStep::kLabel,
      "You are annotating YouTube comments about climate change with a fixed "
      "set of topics. Each topic comes with a rationale describing the "
      "comments it covers.\n"
      "**Rules:** assign exactly one topic from the list to the comment. Use "
      "the label exactly as written. If no topic fits, answer OUTLIER.\n"
      "**Output format:** reply with a single fenced block (```) containing "
      "only the label, optionally followed by ` \xe2\x80\x94 ` and a "
      "one-sentence rationale.",
      "**Topics:**\n{topics}\n\n**Comment:**\n<<<\n{comment}\n>>>",
      {"topics", "comment"});
}

// Template file: a "[system]" line opens the system text and a "[user]"
// line opens the user text; both sections are required. Placeholders must
// be the ones the built-in template of the same step declares.
inline PromptTemplate parse_template(std::string_view text, PromptStep step) {
  std::string sections[2];
  int current = -1;
  bool seen[2] = {false, false};
  for (const auto& line : detail::lines(text)) {
    const auto t = detail::trim(line);
    if (t == "[system]" || t == "[user]") {
      current = t == "[system]" ? 0 : 1;
      if (seen[current]) throw UsageError(fmt::format("template repeats section {}", t));
      seen[current] = true;
      continue;
    }
    if (current < 0) {
      if (!t.empty()) throw UsageError("template text before the first [system]/[user] line");
      continue;
    }
    sections[current] += line;
    sections[current] += '\n';
  }
  if (!seen[0] || !seen[1]) throw UsageError("template needs both [system] and [user] sections");
  for (auto& s : sections) {
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  }
  auto declared = (step == PromptStep::kDiscover ? default_discover_template()
                                                 : default_label_template()).declared();
  return PromptTemplate(step, std::move(sections[0]), std::move(sections[1]), std::move(declared));
}

// "- label — rationale" per line.
inline std::string format_topic_list(const TopicSet& topics) {
  std::string out;
  for (const auto& t : topics.topics) {
    if (!out.empty()) out += '\n';
    out += fmt::format("- {} \xe2\x80\x94 {}", t.label, t.rationale);
  }
  return out;
}

// "[i] text" per line; embedded newlines are flattened.
inline std::string format_comment_list(const std::vector<Comment>& comments) {
  std::string out;
  for (std::size_t i = 0; i < comments.size(); ++i) {
    std::string text = comments[i].text;
    for (auto& c : text) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    if (i) out += '\n';
    out += fmt::format("[{}] {}", i + 1, text);
  }
  return out;
}

}  // namespace topicnet

#endif  // TOPICNET_PROMPT_HPP_
