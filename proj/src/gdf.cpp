#include "thyia/gdf.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <vector>

namespace thyia {

namespace {

constexpr std::size_t kMaxSprites = 32;

struct Token {
  std::string_view text;
  int column = 1;
};

std::vector<Token> Tokenize(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    tokens.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return tokens;
}

bool IsIdentifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

template <typename T>
bool ParseNumber(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string FormatDouble(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view ConditionName(Condition c) {
  switch (c) {
    case Condition::kAllCollected: return "all-collected";
    case Condition::kAvatarOnGoal: return "avatar-on-goal";
    case Condition::kAvatarDead: return "avatar-dead";
    case Condition::kTimeout: return "timeout";
  }
  return "?";
}

enum class Section { kNone, kSprites, kTermination, kLevel };

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  GameSpec Run() {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      std::size_t nl = text_.find('\n', pos);
      if (nl == std::string_view::npos) nl = text_.size();
      std::string_view line = text_.substr(pos, nl - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++line_no;
      HandleLine(line, line_no);
      pos = nl + 1;
    }
    last_line_ = line_no;
    return Finish();
  }

 private:
  [[noreturn]] void Fail(GdfErrorCode code, int line, int column, const std::string& msg) {
    throw GdfError(code, line, column, msg);
  }

  void HandleLine(std::string_view line, int line_no) {
    const auto tokens = Tokenize(line);
    if (tokens.empty() || tokens.front().text.front() == '#') return;
    const Token& head = tokens.front();

    if (!have_header_) {
      if (head.text != "game") {
        Fail(GdfErrorCode::kMissingHeader, line_no, head.column, "expected 'game <name>' header");
      }
      if (tokens.size() != 2 || !IsIdentifier(tokens[1].text)) {
        Fail(GdfErrorCode::kBadName, line_no, tokens.size() > 1 ? tokens[1].column : head.column,
             "game name must be a single identifier");
      }
      spec_.name = std::string(tokens[1].text);
      have_header_ = true;
      return;
    }

    if (tokens.size() == 1 && section_ != Section::kLevel) {
      if (head.text == "sprites") return Enter(Section::kSprites, line_no, head.column);
      if (head.text == "termination") return Enter(Section::kTermination, line_no, head.column);
      if (head.text == "level") return Enter(Section::kLevel, line_no, head.column);
    }

    switch (section_) {
      case Section::kNone:
        Fail(GdfErrorCode::kSyntax, line_no, head.column, "expected a section header");
      case Section::kSprites:
        return SpriteLine(tokens, line_no);
      case Section::kTermination:
        return RuleLine(tokens, line_no);
      case Section::kLevel:
        if (tokens.size() != 1) {
          Fail(GdfErrorCode::kSyntax, line_no, tokens[1].column, "level rows may not contain spaces");
        }
        level_rows_.push_back({std::string(head.text), line_no, head.column});
        return;
    }
  }

  void Enter(Section s, int line_no, int column) {
    if (seen_[static_cast<int>(s)]) {
      Fail(GdfErrorCode::kSyntax, line_no, column, "section declared twice");
    }
    seen_[static_cast<int>(s)] = true;
    section_ = s;
  }

  void SpriteLine(const std::vector<Token>& t, int line_no) {
    if (t.size() < 3) {
      Fail(GdfErrorCode::kSyntax, line_no, t.front().column,
           "sprite line needs '<symbol> <name> <kind>'");
    }
    if (t[0].text.size() != 1) {
      Fail(GdfErrorCode::kSyntax, line_no, t[0].column, "sprite symbol must be one character");
    }
    SpriteDef def;
    def.symbol = t[0].text[0];
    if (def.symbol == '.' || def.symbol == '#') {
      Fail(GdfErrorCode::kReservedSymbol, line_no, t[0].column,
           std::string("symbol '") + def.symbol + "' is reserved");
    }
    for (const auto& existing : spec_.sprites) {
      if (existing.symbol == def.symbol) {
        Fail(GdfErrorCode::kDuplicateSymbol, line_no, t[0].column,
             std::string("duplicate sprite symbol '") + def.symbol + "'");
      }
    }
    if (!IsIdentifier(t[1].text)) {
      Fail(GdfErrorCode::kBadName, line_no, t[1].column, "sprite name must be an identifier");
    }
    def.name = std::string(t[1].text);
    const auto kind = SpriteKindFromName(t[2].text);
    if (!kind) {
      Fail(GdfErrorCode::kUnknownKind, line_no, t[2].column,
           "unknown sprite kind '" + std::string(t[2].text) + "'");
    }
    def.kind = *kind;
    for (std::size_t i = 3; i < t.size(); ++i) {
      const std::string_view attr = t[i].text;
      if (attr.starts_with("score=")) {
        if (!ParseNumber(attr.substr(6), def.score_delta)) {
          Fail(GdfErrorCode::kBadAttribute, line_no, t[i].column, "score must be an integer");
        }
      } else if (attr.starts_with("noise=")) {
        if (!ParseNumber(attr.substr(6), def.move_noise)) {
          Fail(GdfErrorCode::kBadAttribute, line_no, t[i].column, "noise must be a number");
        }
        if (!(def.move_noise >= 0.0 && def.move_noise <= 1.0)) {
          Fail(GdfErrorCode::kNoiseRange, line_no, t[i].column, "noise must lie in [0, 1]");
        }
      } else {
        Fail(GdfErrorCode::kBadAttribute, line_no, t[i].column,
             "unknown attribute '" + std::string(attr) + "'");
      }
    }
    if (spec_.sprites.size() == kMaxSprites) {
      Fail(GdfErrorCode::kTooManySprites, line_no, t[0].column, "at most 32 sprites per game");
    }
    spec_.sprites.push_back(std::move(def));
  }

  void RuleLine(const std::vector<Token>& t, int line_no) {
    TerminationRule rule;
    std::size_t arrow = 1;
    const std::string_view cond = t[0].text;
    if (cond == "all-collected") {
      rule.condition = Condition::kAllCollected;
    } else if (cond == "avatar-on-goal") {
      rule.condition = Condition::kAvatarOnGoal;
    } else if (cond == "avatar-dead") {
      rule.condition = Condition::kAvatarDead;
    } else if (cond == "timeout") {
      rule.condition = Condition::kTimeout;
      if (t.size() < 2 || !ParseNumber(t[1].text, rule.timeout_ticks) || rule.timeout_ticks < 1) {
        Fail(GdfErrorCode::kSyntax, line_no, t.size() > 1 ? t[1].column : t[0].column,
             "timeout needs a positive tick count");
      }
      arrow = 2;
    } else {
      Fail(GdfErrorCode::kUnknownCondition, line_no, t[0].column,
           "unknown condition '" + std::string(cond) + "'");
    }
    if (t.size() != arrow + 2 || t[arrow].text != "->") {
      Fail(GdfErrorCode::kSyntax, line_no, t.back().column, "expected '<condition> -> <outcome>'");
    }
    const std::string_view outcome = t[arrow + 1].text;
    if (outcome == "win") {
      rule.outcome = Outcome::kWin;
    } else if (outcome == "loss") {
      rule.outcome = Outcome::kLoss;
    } else {
      Fail(GdfErrorCode::kUnknownOutcome, line_no, t[arrow + 1].column,
           "unknown outcome '" + std::string(outcome) + "'");
    }
    spec_.termination.push_back(rule);
    rule_lines_.push_back(line_no);
  }

  GameSpec Finish() {
    if (!have_header_) Fail(GdfErrorCode::kMissingHeader, 1, 1, "empty game description");
    if (spec_.termination.empty()) {
      Fail(GdfErrorCode::kNoTermination, last_line_, 1, "at least one termination rule required");
    }
    if (!spec_.HasRule(Condition::kTimeout)) {
      Fail(GdfErrorCode::kMissingTimeout, rule_lines_.back(), 1, "a timeout rule is required");
    }
    if (level_rows_.empty()) Fail(GdfErrorCode::kMissingLevel, last_line_, 1, "missing level");

    const std::size_t width = level_rows_.front().text.size();
    for (std::size_t r = 1; r < level_rows_.size(); ++r) {
      const auto& row = level_rows_[r];
      if (row.text.size() != width) {
        Fail(GdfErrorCode::kRaggedRows, row.line,
             row.column + static_cast<int>(std::min(width, row.text.size())),
             "level row " + std::to_string(r + 1) + " has length " +
                 std::to_string(row.text.size()) + ", expected " + std::to_string(width));
      }
    }
    if (width * level_rows_.size() < 2) {
      Fail(GdfErrorCode::kLevelTooSmall, level_rows_.front().line, 1,
           "level needs at least two cells");
    }

    std::sort(spec_.sprites.begin(), spec_.sprites.end(),
              [](const SpriteDef& a, const SpriteDef& b) { return a.symbol < b.symbol; });

    int avatars = 0;
    for (const auto& row : level_rows_) {
      for (std::size_t x = 0; x < row.text.size(); ++x) {
        const char c = row.text[x];
        const int col = row.column + static_cast<int>(x);
        if (c == '.') continue;
        const int idx = spec_.SpriteIndex(c);
        if (idx < 0) {
          Fail(GdfErrorCode::kUnknownSymbol, row.line, col,
               std::string("undeclared level symbol '") + c + "'");
        }
        if (spec_.sprites[idx].kind == SpriteKind::kAvatar && ++avatars > 1) {
          Fail(GdfErrorCode::kMultipleAvatars, row.line, col, "level has more than one avatar");
        }
      }
      spec_.level.push_back(row.text);
    }
    if (avatars == 0) {
      Fail(GdfErrorCode::kNoAvatar, level_rows_.front().line, 1, "level has no avatar");
    }
    return std::move(spec_);
  }

  struct Row {
    std::string text;
    int line;
    int column;
  };

  std::string_view text_;
  GameSpec spec_;
  bool have_header_ = false;
  Section section_ = Section::kNone;
  std::array<bool, 4> seen_{};
  std::vector<Row> level_rows_;
  std::vector<int> rule_lines_;
  int last_line_ = 0;
};

}  // namespace

std::string_view GdfErrorName(GdfErrorCode code) {
  switch (code) {
    case GdfErrorCode::kSyntax: return "syntax";
    case GdfErrorCode::kMissingHeader: return "missing-header";
    case GdfErrorCode::kBadName: return "bad-name";
    case GdfErrorCode::kDuplicateSymbol: return "duplicate-symbol";
    case GdfErrorCode::kReservedSymbol: return "reserved-symbol";
    case GdfErrorCode::kUnknownKind: return "unknown-kind";
    case GdfErrorCode::kBadAttribute: return "bad-attribute";
    case GdfErrorCode::kNoiseRange: return "noise-range";
    case GdfErrorCode::kTooManySprites: return "too-many-sprites";
    case GdfErrorCode::kUnknownCondition: return "unknown-condition";
    case GdfErrorCode::kUnknownOutcome: return "unknown-outcome";
    case GdfErrorCode::kNoTermination: return "no-termination";
    case GdfErrorCode::kMissingTimeout: return "missing-timeout";
    case GdfErrorCode::kMissingLevel: return "missing-level";
    case GdfErrorCode::kRaggedRows: return "ragged-rows";
    case GdfErrorCode::kUnknownSymbol: return "unknown-symbol";
    case GdfErrorCode::kNoAvatar: return "no-avatar";
    case GdfErrorCode::kMultipleAvatars: return "multiple-avatars";
    case GdfErrorCode::kLevelTooSmall: return "level-too-small";
  }
  return "?";
}

GdfError::GdfError(GdfErrorCode code, int line, int column, const std::string& message)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
            message + " [" + std::string(GdfErrorName(code)) + "]"),
      code_(code),
      line_(line),
      column_(column) {}

GameSpec ParseGdf(std::string_view text) { return Parser(text).Run(); }

std::string SerializeGdf(const GameSpec& spec) {
  std::vector<const SpriteDef*> sorted;
  for (const auto& s : spec.sprites) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(),
            [](const SpriteDef* a, const SpriteDef* b) { return a->symbol < b->symbol; });

  std::string out = "game " + spec.name + "\nsprites\n";
  for (const SpriteDef* s : sorted) {
    out += s->symbol;
    out += ' ' + s->name + ' ' + std::string(SpriteKindName(s->kind));
    if (s->score_delta != 0) out += " score=" + std::to_string(s->score_delta);
    if (s->move_noise != 0.0) out += " noise=" + FormatDouble(s->move_noise);
    out += '\n';
  }
  out += "termination\n";
  for (const auto& rule : spec.termination) {
    out += ConditionName(rule.condition);
    if (rule.condition == Condition::kTimeout) out += ' ' + std::to_string(rule.timeout_ticks);
    out += rule.outcome == Outcome::kWin ? " -> win\n" : " -> loss\n";
  }
  out += "level\n";
  for (const auto& row : spec.level) out += row + '\n';
  return out;
}

}  // namespace thyia
