#include "maskprobe/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "maskprobe/errors.hpp"

namespace maskprobe::toml {

namespace {

using nlohmann::json;

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("toml line " + std::to_string(line) + ": " + what);
}

bool is_bare(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string_view trim_view(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Cuts an end-of-line comment, honoring '#' inside basic strings.
std::string_view strip_comment(std::string_view line, int line_no) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  if (in_string) fail(line_no, "unterminated string");
  return line;
}

std::vector<std::string> parse_key_path(std::string_view text, int line_no) {
  std::vector<std::string> path;
  std::string part;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.') {
      const auto t = trim_view(part);
      if (t.empty()) fail(line_no, "empty key segment");
      for (char c : t) {
        if (!is_bare(c)) {
          fail(line_no, std::string("bad key character '") + c + "'");
        }
      }
      path.emplace_back(t);
      part.clear();
    } else {
      part.push_back(text[i]);
    }
  }
  return path;
}

struct Cursor {
  std::string_view s;
  std::size_t pos = 0;
  int line_no = 0;

  bool done() const { return pos >= s.size(); }
  char peek() const { return s[pos]; }
  void skip_ws() {
    while (!done() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
};

json parse_value(Cursor& c);

json parse_string(Cursor& c) {
  ++c.pos;  // opening quote
  std::string out;
  while (true) {
    if (c.done()) fail(c.line_no, "unterminated string");
    const char ch = c.s[c.pos++];
    if (ch == '"') break;
    if (ch == '\\') {
      if (c.done()) fail(c.line_no, "dangling escape");
      const char e = c.s[c.pos++];
      switch (e) {
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        default:
          fail(c.line_no, std::string("unsupported escape '\\") + e + "'");
      }
    } else {
      out.push_back(ch);
    }
  }
  return json(out);
}

json parse_array(Cursor& c) {
  ++c.pos;  // '['
  json arr = json::array();
  while (true) {
    c.skip_ws();
    if (c.done()) fail(c.line_no, "unterminated array");
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    arr.push_back(parse_value(c));
    c.skip_ws();
    if (c.done()) fail(c.line_no, "unterminated array");
    if (c.peek() == ',') {
      ++c.pos;
    } else if (c.peek() != ']') {
      fail(c.line_no, "expected ',' or ']' in array");
    }
  }
}

json parse_scalar(Cursor& c) {
  const std::size_t start = c.pos;
  while (!c.done()) {
    const char ch = c.peek();
    if (ch == ',' || ch == ']' ||
        std::isspace(static_cast<unsigned char>(ch))) {
      break;
    }
    ++c.pos;
  }
  const std::string_view tok = c.s.substr(start, c.pos - start);
  if (tok.empty()) fail(c.line_no, "missing value");
  if (tok == "true") return json(true);
  if (tok == "false") return json(false);

  bool integral = true;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    const char ch = tok[i];
    if (i == 0 && (ch == '+' || ch == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(ch))) integral = false;
  }
  if (integral) {
    std::int64_t v = 0;
    const char* first = tok.data() + (tok.front() == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
    if (ec == std::errc() && ptr == tok.data() + tok.size()) return json(v);
  }
  double d = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
  if (ec == std::errc() && ptr == tok.data() + tok.size()) return json(d);
  fail(c.line_no, "cannot parse value '" + std::string(tok) + "'");
}

json parse_value(Cursor& c) {
  c.skip_ws();
  if (c.done()) fail(c.line_no, "missing value");
  const char ch = c.peek();
  if (ch == '"') return parse_string(c);
  if (ch == '[') return parse_array(c);
  return parse_scalar(c);
}

}  // namespace

json parse(std::string_view text) {
  json root = json::object();
  json* table = &root;
  std::vector<std::string> table_names;

  std::size_t begin = 0;
  int line_no = 0;
  while (begin <= text.size()) {
    ++line_no;
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view raw = text.substr(begin, end - begin);
    begin = end + 1;

    const std::string_view line = trim_view(strip_comment(raw, line_no));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "expected ']' after table name");
      const auto path =
          parse_key_path(line.substr(1, line.size() - 2), line_no);
      std::string joined;
      for (const auto& p : path) joined += p + ".";
      for (const auto& seen : table_names) {
        if (seen == joined) fail(line_no, "table redefined");
      }
      table_names.push_back(joined);
      table = &root;
      for (const auto& key : path) {
        json& next = (*table)[key];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) fail(line_no, "'" + key + "' is not a table");
        table = &next;
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const auto path = parse_key_path(line.substr(0, eq), line_no);

    Cursor c{line.substr(eq + 1), 0, line_no};
    const json value = parse_value(c);
    c.skip_ws();
    if (!c.done()) fail(line_no, "trailing characters after value");

    json* slot = table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      json& next = (*slot)[path[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) {
        fail(line_no, "'" + path[i] + "' is not a table");
      }
      slot = &next;
    }
    if (slot->contains(path.back())) {
      fail(line_no, "duplicate key '" + path.back() + "'");
    }
    (*slot)[path.back()] = value;
  }
  return root;
}

json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace maskprobe::toml
