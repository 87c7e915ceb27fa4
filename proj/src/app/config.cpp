#include "slidepp/app/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "slidepp/error.hpp"
#include "slidepp/rng.hpp"

namespace slidepp::app {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
  });
}

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::filesystem::path absolute_path(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative()) p = base / p;
  return std::filesystem::weakly_canonical(p);
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

Config Config::parse(const std::string& text, const std::filesystem::path& base_dir, const std::string& source) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (c.entries_.count(key)) throw ConfigError(where + ": key '" + key + "' is set twice");
    c.entries_[key] = {value, base_dir, where};
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto abs = std::filesystem::absolute(path);
  return parse(ss.str(), abs.parent_path(), path.string());
}

void Config::set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "' in override");
  entries_[key] = {trim(value), base_dir, "--set " + key};
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  }
  return out;
}

const Config::Entry* Config::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_[key] = true;
  return &it->second;
}

void Config::bad(const std::string& key, const std::string& what) const {
  auto it = entries_.find(key);
  const std::string where = it == entries_.end() ? key : it->second.origin + " (" + key + ")";
  throw ConfigError(where + ": " + what);
}

void Config::record(const std::string& key, const std::string& value) const { resolved_[key] = value; }

void Config::consume(const std::string& key) const { find(key); }

std::string Config::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e || e->value.empty()) bad(key, "required key is missing");
  record(key, e->value);
  return e->value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = find(key);
  const std::string v = e ? e->value : fallback;
  record(key, v);
  return v;
}

double Config::get_double(const std::string& key) const {
  if (!find(key)) bad(key, "required key is missing");
  return get_double(key, 0.0);
}

double Config::get_double(const std::string& key, double fallback) const {
  const Entry* e = find(key);
  double v = fallback;
  if (e) {
    const std::string& s = e->value;
    const char* first = s.data() + (!s.empty() && s.front() == '+' ? 1 : 0);
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) bad(key, "'" + s + "' is not a finite number");
  }
  record(key, format_number(v));
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  const Entry* e = find(key);
  int v = fallback;
  if (e) {
    const std::string& s = e->value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) bad(key, "'" + s + "' is not an integer");
  }
  record(key, std::to_string(v));
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = find(key);
  std::uint64_t v = fallback;
  if (e) {
    const std::string& s = e->value;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) bad(key, "'" + s + "' is not a non-negative integer");
  }
  record(key, std::to_string(v));
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = find(key);
  bool v = fallback;
  if (e) {
    std::string s = e->value;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") {
      v = true;
    } else if (s == "false" || s == "no" || s == "off" || s == "0") {
      v = false;
    } else {
      bad(key, "'" + e->value + "' is not a boolean");
    }
  }
  record(key, v ? "true" : "false");
  return v;
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const {
  const Entry* e = find(key);
  const auto v = e ? split_list(e->value) : fallback;
  record(key, join(v));
  return v;
}

std::vector<double> Config::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
  const Entry* e = find(key);
  std::vector<double> v = fallback;
  if (e) {
    v.clear();
    for (const auto& item : split_list(e->value)) {
      double x = 0.0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
      if (ec != std::errc{} || ptr != item.data() + item.size() || !std::isfinite(x)) {
        bad(key, "'" + item + "' is not a finite number");
      }
      v.push_back(x);
    }
  }
  std::vector<std::string> text;
  for (double x : v) text.push_back(format_number(x));
  record(key, join(text));
  return v;
}

std::filesystem::path Config::get_path(const std::string& key) const {
  const Entry* e = find(key);
  if (!e || e->value.empty()) bad(key, "required path is missing");
  const auto p = absolute_path(e->base_dir, e->value);
  if (!std::filesystem::exists(p)) bad(key, "path does not exist: " + p.string());
  record(key, p.string());
  return p;
}

std::vector<std::filesystem::path> Config::get_path_list(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) bad(key, "required path list is missing");
  std::vector<std::filesystem::path> out;
  std::vector<std::string> text;
  for (const auto& item : split_list(e->value)) {
    const auto p = absolute_path(e->base_dir, item);
    if (!std::filesystem::exists(p)) bad(key, "path does not exist: " + p.string());
    out.push_back(p);
    text.push_back(p.string());
  }
  if (out.empty()) bad(key, "path list is empty");
  record(key, join(text));
  return out;
}

std::vector<std::string> Config::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (!used_.count(k)) out.push_back(k);
  }
  return out;
}

std::string Manifest::render() const {
  std::ostringstream out;
  out << "# slidepp run manifest\n";
  out << "# rerun: slidepp " << command << " --config manifest.txt --out DIR\n";
  if (!failed_stage.empty()) out << "# failed stage: " << failed_stage << '\n';
  for (const auto& a : artifacts) out << "# artifact: " << a << '\n';
  out << "command = " << command << '\n';
  out << "seed = " << seed << '\n';
  out << "threads = " << threads << '\n';
  out << "version.slidepp = " << kVersion << '\n';
  out << "version.rng = " << SeededRng::kAlgorithm << '\n';
  out << "version.model_format = 1\n";
  for (const auto& [k, v] : parameters) out << k << " = " << v << '\n';
  return out.str();
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << render();
}

}  // namespace slidepp::app
