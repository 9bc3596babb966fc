#pragma once
//
// Scenario configuration: TOML or JSON files read into one JSON tree, plus a
// parameter accessor that records every value it hands out (defaults
// included) so the resolved configuration can be echoed into reports.
//

#include "c1split/chart.hpp"
#include "c1split/core.hpp"

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace c1split::cli {

using json = nlohmann::json;

namespace detail {

inline json from_toml(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (auto&& [k, v] : *t) out[std::string(k.str())] = from_toml(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (auto&& v : *a) out.push_back(from_toml(v));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  throw Error(Errc::ConfigParse, "dates and times are not accepted in scenarios");
}

}  // namespace detail

/// Reads a scenario file. `.json` files are parsed as JSON, everything else as TOML.
inline json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ConfigParse, "cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  if (std::filesystem::path(path).extension() == ".json") {
    try {
      return json::parse(buf.str());
    } catch (const json::exception& e) {
      throw Error(Errc::ConfigParse, path + ": " + e.what());
    }
  }
  try {
    return detail::from_toml(toml::parse(buf.str(), path));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw Error(Errc::ConfigParse, os.str());
  }
}

/// Typed view of one config table. Every lookup is copied into resolved(),
/// and finish() rejects keys that were never read.
class Params {
 public:
  Params() : in_(json::object()), resolved_(json::object()) {}
  Params(json in, std::string where) : in_(std::move(in)), resolved_(json::object()), where_(std::move(where)) {
    if (in_.is_null()) in_ = json::object();
    if (!in_.is_object()) fail("", "expected a table");
  }

  bool has(const std::string& key) const { return in_.contains(key); }
  const std::string& where() const { return where_; }

  double num(const std::string& key, double fallback) { return has(key) ? num(key) : record(key, fallback); }
  double num(const std::string& key) {
    const json& v = need(key);
    if (!v.is_number()) fail(key, "expected a number");
    return record(key, v.get<double>());
  }

  int integer(const std::string& key, int fallback) { return has(key) ? integer(key) : record(key, fallback); }
  int integer(const std::string& key) {
    const json& v = need(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return record(key, v.get<int>());
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return record(key, fallback);
    const json& v = need(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return record(key, v.get<bool>());
  }

  std::string str(const std::string& key, const std::string& fallback) {
    return has(key) ? str(key) : record(key, fallback);
  }
  std::string str(const std::string& key) {
    const json& v = need(key);
    if (!v.is_string()) fail(key, "expected a string");
    return record(key, v.get<std::string>());
  }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) {
    return has(key) ? list(key) : record(key, fallback);
  }
  std::vector<double> list(const std::string& key) {
    const json& v = need(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return record(key, out);
  }

  std::vector<int> ints(const std::string& key, const std::vector<int>& fallback) {
    if (!has(key)) return record(key, fallback);
    const json& v = need(key);
    if (!v.is_array()) fail(key, "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return record(key, out);
  }

  Vec vec(const std::string& key, int n) {
    const auto v = list(key);
    if (static_cast<int>(v.size()) != n) fail(key, "expected " + std::to_string(n) + " components");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
  }
  Vec vec(const std::string& key, const Vec& fallback) {
    if (has(key)) return vec(key, static_cast<int>(fallback.size()));
    record(key, std::vector<double>(fallback.data(), fallback.data() + fallback.size()));
    return fallback;
  }

  std::vector<Vec> points(const std::string& key, int n) {
    const json& v = need(key);
    if (!v.is_array()) fail(key, "expected an array of points");
    std::vector<Vec> out;
    json rec = json::array();
    for (const auto& p : v) {
      if (!p.is_array() || static_cast<int>(p.size()) != n) fail(key, "each point needs " + std::to_string(n) + " numbers");
      Vec x(n);
      for (int k = 0; k < n; ++k) {
        if (!p[k].is_number()) fail(key, "expected numbers");
        x(k) = p[k].get<double>();
      }
      out.push_back(x);
      rec.push_back(p);
    }
    resolved_[key] = rec;
    used_.insert(key);
    return out;
  }

  /// Nested table, e.g. a per-op grid.
  Params table(const std::string& key) {
    used_.insert(key);
    return Params(has(key) ? in_.at(key) : json::object(), where_ + "." + key);
  }
  void store(const std::string& key, const Params& sub) { resolved_[key] = sub.resolved(); }

  /// Positive-number guard shared by all tolerances.
  double positive(const std::string& key, double fallback) {
    const double v = num(key, fallback);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it)
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
  }

  const json& resolved() const { return resolved_; }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw Error(Errc::ConfigParse, where_ + (key.empty() ? "" : "." + key) + ": " + msg);
  }

 private:
  const json& need(const std::string& key) {
    if (!has(key)) fail(key, "missing");
    used_.insert(key);
    return in_.at(key);
  }
  template <class T>
  T record(const std::string& key, T value) {
    used_.insert(key);
    resolved_[key] = value;
    return value;
  }

  json in_;
  json resolved_;
  std::set<std::string> used_;
  std::string where_;
};

/// Window from {lo, hi, shape}; missing keys fall back to `base`.
inline ChartWindow read_window(Params& p, const ChartWindow* base, int n) {
  if (!base && !p.has("lo")) p.fail("lo", "missing");
  const Vec lo = base ? p.vec("lo", base->lo()) : p.vec("lo", n);
  const Vec hi = base ? p.vec("hi", base->hi()) : p.vec("hi", n);
  std::vector<int> shape = p.ints("shape", base ? base->shape() : std::vector<int>(n, 33));
  if (shape.size() == 1) shape.assign(n, shape[0]);
  if (static_cast<int>(shape.size()) != n) p.fail("shape", "expected " + std::to_string(n) + " entries");
  try {
    return ChartWindow(lo, hi, shape);
  } catch (const Error& e) {
    p.fail("", e.what());
  }
}

}  // namespace c1split::cli
