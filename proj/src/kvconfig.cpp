#include "loadbench/kvconfig.hpp"

#include <algorithm>
#include <cmath>

#include "loadbench/error.hpp"
#include "loadbench/text.hpp"

namespace loadbench {

KvConfig KvConfig::load(const std::string& path) {
  KvConfig cfg;
  cfg.merge_file(path);
  return cfg;
}

KvConfig KvConfig::parse(const std::string& content) {
  KvConfig cfg;
  std::size_t lineno = 0;
  for (auto line : text::split(content, '\n')) {
    ++lineno;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorKind::Usage,
           "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = text::trim(line.substr(0, eq));
    if (key.empty()) {
      fail(ErrorKind::Usage, "config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.set(std::string(key), std::string(text::trim(line.substr(eq + 1))));
  }
  return cfg;
}

void KvConfig::merge_file(const std::string& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error&) {
    fail(ErrorKind::Usage, "cannot read config file '" + path + "'");
  }
  for (const auto& [k, v] : parse(content).entries_) entries_[k] = v;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> KvConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::require(const std::string& key) const {
  auto v = get(key);
  if (!v || v->empty()) fail(ErrorKind::Usage, "missing required setting '" + key + "'");
  return *v;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
  auto v = get(key);
  return v ? *v : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "inf" || *v == "off" || *v == "none") return INFINITY;
  try {
    return text::parse_double(*v);
  } catch (const Error&) {
    fail(ErrorKind::Usage, "setting '" + key + "' is not a number: '" + *v + "'");
  }
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    return text::parse_int(*v);
  } catch (const Error&) {
    fail(ErrorKind::Usage, "setting '" + key + "' is not an integer: '" + *v + "'");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  fail(ErrorKind::Usage, "setting '" + key + "' is not a boolean: '" + *v + "'");
}

std::vector<double> KvConfig::get_double_list(const std::string& key,
                                              const std::vector<double>& fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    try {
      out.push_back(text::parse_double(item));
    } catch (const Error&) {
      fail(ErrorKind::Usage, "setting '" + key + "' has a non-numeric item '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  const auto v = get(key);
  if (!v) return out;
  for (auto item : text::split(*v, ',')) {
    item = text::trim(item);
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

std::string KvConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace loadbench
