#include "stepsearch/textops/format.hpp"

#include <cctype>
#include <vector>

#include "stepsearch/core/error.hpp"

namespace stepsearch::textops {
namespace {

enum class Section { None, Formulation, Step, Final };

struct Header {
  Section section = Section::None;
  int index = 0;
  std::string title;
};

// Recognizes `**Step 12: title**` and `**Step 12. title**`.
std::optional<Header> parse_header(std::string_view line) {
  if (line == kFormulationHeader) return Header{Section::Formulation, 0, {}};
  if (line == kFinalAnswerHeader) return Header{Section::Final, 0, {}};
  constexpr std::string_view prefix = "**Step ";
  if (line.size() < prefix.size() + 4 || line.substr(0, prefix.size()) != prefix ||
      line.substr(line.size() - 2) != "**") {
    return std::nullopt;
  }
  std::string_view rest = line.substr(prefix.size(), line.size() - prefix.size() - 2);
  std::size_t digits = 0;
  while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) {
    ++digits;
  }
  if (digits == 0 || digits > 9 || digits >= rest.size()) return std::nullopt;
  if (rest[digits] != ':' && rest[digits] != '.') return std::nullopt;
  std::string_view title = rest.substr(digits + 1);
  if (!title.empty() && title.front() == ' ') title.remove_prefix(1);
  return Header{Section::Step, std::stoi(std::string(rest.substr(0, digits))),
                std::string(title)};
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string join_body(const std::vector<std::string_view>& lines) {
  std::size_t end = lines.size();
  while (end > 0 && lines[end - 1].find_first_not_of(" \t\r") == std::string_view::npos) {
    --end;
  }
  std::string body;
  for (std::size_t i = 0; i < end; ++i) {
    if (i > 0) body.push_back('\n');
    body.append(lines[i]);
  }
  return body;
}

}  // namespace

CandidateSolution parse_solution(std::string_view raw_text) {
  CandidateSolution out;
  out.raw_text = std::string(raw_text);

  bool saw_step = false;
  bool saw_final = false;
  Header current;
  std::vector<std::string_view> body;

  auto flush = [&] {
    switch (current.section) {
      case Section::Formulation:
        out.rephrasing = join_body(body);
        break;
      case Section::Step:
        out.steps.push_back(Step{current.index, current.title, join_body(body)});
        break;
      case Section::Final:
      case Section::None:
        break;
    }
    body.clear();
  };

  for (std::string_view line : split_lines(raw_text)) {
    std::string_view trimmed = line;
    if (!trimmed.empty() && trimmed.back() == '\r') trimmed.remove_suffix(1);
    if (auto header = parse_header(trimmed)) {
      flush();
      current = *header;
      saw_step = saw_step || header->section == Section::Step;
      saw_final = saw_final || header->section == Section::Final;
      continue;
    }
    body.push_back(line);
  }
  flush();

  if (!saw_step && !saw_final) {
    throw Error(ErrorKind::MalformedFormat,
                "no step header and no final-answer block");
  }
  try {
    out.final_answer = extract_boxed(raw_text);
  } catch (const Error& e) {
    throw Error(ErrorKind::MalformedFormat, e.what());
  }
  return out;
}

std::string format_step(const Step& step) {
  std::string out = "**Step " + std::to_string(step.index) + ": " + step.title + "**\n";
  out += step.body;
  return out;
}

std::string format_prefix(std::string_view rephrasing, std::span<const Step> steps) {
  std::string out;
  auto section = [&out](const std::string& s) {
    if (!out.empty()) out += "\n\n";
    out += s;
  };
  if (!rephrasing.empty()) {
    section(std::string(kFormulationHeader) + "\n" + std::string(rephrasing));
  }
  for (const auto& step : steps) section(format_step(step));
  return out;
}

std::string format_solution(const CandidateSolution& s) {
  std::string out = format_prefix(s.rephrasing, s.steps);
  if (s.final_answer) {
    if (!out.empty()) out += "\n\n";
    out += std::string(kFinalAnswerHeader) + "\n\\boxed{" + *s.final_answer + "}";
  }
  return out;
}

std::optional<std::string> extract_boxed(std::string_view text) {
  constexpr std::string_view opener = "\\boxed{";
  const auto pos = text.rfind(opener);
  if (pos == std::string_view::npos) return std::nullopt;
  const std::size_t start = pos + opener.size();
  int depth = 1;
  for (std::size_t i = start; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}' && --depth == 0) {
      return std::string(text.substr(start, i - start));
    }
  }
  throw Error(ErrorKind::UnbalancedBraces,
              "\\boxed{ at offset " + std::to_string(pos) + " is never closed");
}

bool has_final_answer(std::string_view text) {
  try {
    return extract_boxed(text).has_value();
  } catch (const Error&) {
    return false;
  }
}

bool is_clean_text(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c < 0x80) {
      if (c < 0x20 && c != '\n' && c != '\t' && c != '\r') return false;
      if (c == 0x7f) return false;
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > text.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong encodings, surrogates, and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10ffff ||
        (cp >= 0xd800 && cp <= 0xdfff)) {
      return false;
    }
    i += len;
  }
  return true;
}

}  // namespace stepsearch::textops
