#ifndef NICHOLSON_MODEL_IO_HPP
#define NICHOLSON_MODEL_IO_HPP

// Key-value model description files:
//
//   # two-patch reference model
//   m = 2
//   delays = 1, 2
//   mu = 1
//   alpha12 = 1
//   alpha21 = 1
//   p = sin
//   q = cos
//   nonlinearity = nicholson        # or rational:<alpha>
//
// `family = constant` switches to constant coefficients given by the keys
// d, beta, c (one value per patch) and a (m*m values, row-major).
// `beta_scale` (one value per patch) multiplies the birth rates of the
// two-patch family.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nicholson/errors.hpp"
#include "nicholson/model.hpp"

namespace nicholson {

/// Ordered key-value pairs of a model or config file.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text) {
    KeyValues kv;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      std::string_view line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ParseError("empty key", line_no);
      if (kv.values_.count(key)) throw ParseError("duplicate key '" + key + "'", line_no);
      kv.values_[key] = value;
      kv.lines_[key] = line_no;
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return parse(ss.str());
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what());
    }
  }

  /// Keys of `other` replace ours.
  void merge(const KeyValues& other) {
    for (const auto& [k, v] : other.values_) {
      values_[k] = v;
      lines_[k] = other.line(k);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const { return values_.at(key); }
  int line(const std::string& key) const {
    auto it = lines_.find(key);
    return it == lines_.end() ? 0 : it->second;
  }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
};

/// Decimal literal to the nearest binary64.
inline double parse_double(std::string_view s, const std::string& what = "number") {
  s = KeyValues::trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ParseError("invalid " + what + " '" + std::string(s) + "'");
  return v;
}

inline std::vector<double> parse_list(std::string_view s, const std::string& what = "list") {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find_first_of(",;", pos);
    out.push_back(parse_double(s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos), what));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_list(const double* v, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s;
}

inline Nonlinearity parse_nonlinearity(std::string_view s) {
  if (s == "nicholson") return Nonlinearity::nicholson();
  if (s.substr(0, 9) == "rational:") {
    try {
      return Nonlinearity::rational(parse_double(s.substr(9), "rational exponent"));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what());
    }
  }
  throw ParseError("unknown nonlinearity '" + std::string(s) + "'");
}

inline SystemSpec build_spec(const KeyValues& kv) {
  static const char* const known[] = {"m",  "delays", "mu",     "alpha12", "alpha21",   "p", "q", "nonlinearity",
                                      "family", "d", "beta", "c",   "a", "beta_scale"};
  for (const auto& [k, v] : kv.entries()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ParseError("unknown key '" + k + "'", kv.line(k));
  }
  auto number = [&](const std::string& key, double dflt) {
    if (!kv.has(key)) return dflt;
    try {
      return parse_double(kv.get(key), key);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), kv.line(key));
    }
  };
  auto list = [&](const std::string& key) {
    try {
      return parse_list(kv.get(key), key);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), kv.line(key));
    }
  };

  const std::string family = kv.has("family") ? kv.get("family") : "paper";
  int m = 2;
  if (kv.has("m")) {
    const double mv = number("m", 2.0);
    if (mv != std::floor(mv) || mv < 1.0 || mv > 1e6) throw ParseError("m must be a positive integer", kv.line("m"));
    m = static_cast<int>(mv);
  }
  std::vector<double> delays;
  if (kv.has("delays")) {
    delays = list("delays");
  } else if (family == "paper") {
    delays = {1.0, 2.0};
  } else {
    throw ParseError("missing key 'delays'");
  }
  if (static_cast<int>(delays.size()) != m) throw ParseError("need exactly m delays", kv.line("delays"));

  Nonlinearity g = Nonlinearity::nicholson();
  if (kv.has("nonlinearity")) {
    try {
      g = parse_nonlinearity(kv.get("nonlinearity"));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), kv.line("nonlinearity"));
    }
  }

  try {
    if (family == "paper") {
      for (const char* k : {"d", "beta", "c", "a"})
        if (kv.has(k)) throw ParseError(std::string("key '") + k + "' needs family = constant", kv.line(k));
      auto shape = [&](const char* key, Shape dflt) {
        if (!kv.has(key)) return dflt;
        const auto s = parse_shape(kv.get(key));
        if (!s) throw ParseError("unknown shape '" + kv.get(key) + "'", kv.line(key));
        return *s;
      };
      if (m != 2) throw ParseError("the two-patch family needs m = 2", kv.line("m"));
      ParamSet params{number("mu", 1.0), number("alpha12", 1.0), number("alpha21", 1.0)};
      SystemSpec spec = SystemSpec::paper(params, shape("p", Shape::Sin), shape("q", Shape::Cos), g, delays);
      if (kv.has("beta_scale")) {
        const auto bs = list("beta_scale");
        if (bs.size() != 2) throw ParseError("beta_scale needs two values", kv.line("beta_scale"));
        spec.paper_family()->beta_scale = {bs[0], bs[1]};
      }
      return spec;
    }
    if (family == "constant") {
      for (const char* k : {"mu", "alpha12", "alpha21", "p", "q", "beta_scale"})
        if (kv.has(k)) throw ParseError(std::string("key '") + k + "' needs family = paper", kv.line(k));
      CoeffValues k(m);
      auto fill = [&](const char* key, Vector& out) {
        if (!kv.has(key)) throw ParseError(std::string("missing key '") + key + "'");
        const auto v = list(key);
        if (static_cast<int>(v.size()) != m) throw ParseError(std::string("need m values for '") + key + "'", kv.line(key));
        for (int i = 0; i < m; ++i) out[i] = v[i];
      };
      fill("d", k.d);
      fill("beta", k.beta);
      fill("c", k.c);
      if (kv.has("a")) {
        const auto v = list("a");
        if (static_cast<long>(v.size()) != static_cast<long>(m) * m)
          throw ParseError("need m*m values for 'a'", kv.line("a"));
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) k.a(i, j) = v[static_cast<std::size_t>(i) * m + j];
      }
      return SystemSpec::constant(std::move(k), delays, g);
    }
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  throw ParseError("unknown family '" + family + "'", kv.line("family"));
}

inline SystemSpec load_model(const std::string& path) { return build_spec(KeyValues::load(path)); }

/// Canonical text of a model; build_spec(parse(write_model(s))) reproduces s.
inline std::string write_model(const SystemSpec& spec) {
  std::ostringstream os;
  os << "m = " << spec.dim() << '\n';
  os << "delays = " << format_list(spec.delays().data(), spec.delays().size()) << '\n';
  os << "nonlinearity = " << spec.nonlinearity().describe() << '\n';
  if (const auto* fam = spec.paper_family()) {
    os << "family = paper\n";
    os << "mu = " << format_double(fam->params.mu) << '\n';
    os << "alpha12 = " << format_double(fam->params.alpha12) << '\n';
    os << "alpha21 = " << format_double(fam->params.alpha21) << '\n';
    os << "p = " << to_string(fam->p) << '\n';
    os << "q = " << to_string(fam->q) << '\n';
    if (fam->beta_scale != std::array<double, 2>{1.0, 1.0})
      os << "beta_scale = " << format_list(fam->beta_scale.data(), 2) << '\n';
  } else if (const auto* cf = std::get_if<ConstantFamily>(&spec.family())) {
    const auto& k = cf->values;
    const int m = spec.dim();
    os << "family = constant\n";
    os << "d = " << format_list(k.d.data(), m) << '\n';
    os << "beta = " << format_list(k.beta.data(), m) << '\n';
    os << "c = " << format_list(k.c.data(), m) << '\n';
    std::vector<double> a;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) a.push_back(k.a(i, j));
    os << "a = " << format_list(a.data(), a.size()) << '\n';
  } else {
    throw InvalidArgument("custom families have no file representation");
  }
  return os.str();
}

}  // namespace nicholson

#endif  // NICHOLSON_MODEL_IO_HPP
